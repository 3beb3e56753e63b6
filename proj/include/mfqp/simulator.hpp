#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfqp/measures.hpp"
#include "mfqp/models.hpp"
#include "mfqp/rng.hpp"

namespace mfqp {

struct ParticleSystemState {
  std::vector<std::int64_t> counts;  // occupancy of {0..z_max}
  std::int64_t N = 0;

  static ParticleSystemState all_at_zero(std::int64_t N, int z_max);
  int z_max() const { return static_cast<int>(counts.size()) - 1; }
  void validate() const;
  StateDistribution empirical() const;
};

struct SimConfig {
  std::int64_t N = 1;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  double horizon = 100.0;
  double burn_in = -1.0;  // negative: 20 / lambda_lower
  int z_max = 40;
  double thinning = 1.0;

  double effective_burn_in(const RateModel& model) const;
  void validate(const RateModel& model) const;
};

struct Event {
  std::string name;
  std::function<bool(const StateDistribution&)> holds;
};

// Common events.
Event whole_space();
Event tv_ball(const StateDistribution& center, double radius, const std::string& name);
// Complement of the class K_M.
Event outside_KM(double M);

struct RateEstimate {
  std::string event;
  std::int64_t N = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double rate = 0.0;              // -(1/N) log p_hat, or the bound from ci_high
  bool lower_bound_only = false;  // event never observed
  std::uint64_t seed = 0;
  std::string algorithm;
  std::int64_t hits = 0;
  std::int64_t samples = 0;
  bool diagnostic_ok = true;  // first and second half agree (occupation estimates)
};

struct StepResult {
  double dt = 0.0;
  int from = 0;
  int to = 0;
};

// One jump of the N-particle chain; the state is updated in place.
StepResult gillespie_step(const RateModel& model, ParticleSystemState& state, Philox4x32& rng);

struct SimPath {
  std::vector<double> times;
  std::vector<StateDistribution> states;
  std::int64_t jumps = 0;
};

// Starts with every particle at 0; samples at multiples of config.thinning.
SimPath simulate_path(const RateModel& model, const SimConfig& config);

// Time-weighted occupation of the event over [burn_in, horizon], 20 batches.
RateEstimate estimate_invariant(const RateModel& model, const SimConfig& config, const Event& event);

ParticleSystemState sample_iid_stationary(const RateModel& model, std::int64_t N, int z_max,
                                          Philox4x32& rng);

struct RateCurveConfig {
  std::vector<std::int64_t> N_list;
  std::int64_t samples_per_N = 1000;
  std::uint64_t seed = 0;
  int z_max = 40;
  unsigned threads = 1;
  // Used for interacting models only.
  double horizon = 2000.0;
  double burn_in = -1.0;
};

std::vector<RateEstimate> estimate_rate_curve(const RateModel& model, const Event& event,
                                              const RateCurveConfig& config);

// 95% Wilson score interval.
std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t n);

void write_rate_csv(std::ostream& os, const std::vector<RateEstimate>& rows);
// MvePath schema plus a replica column.
void write_sim_path_csv(std::ostream& os, const SimPath& path, std::uint64_t replica);

}  // namespace mfqp
