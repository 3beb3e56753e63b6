#pragma once

#include <string>
#include <vector>

#include "mfqp/measures.hpp"
#include "mfqp/rng.hpp"

namespace mfqp {

enum class EdgeKind { chain_with_resets, birth_death };

struct Edge {
  int z = 0;
  int z_prime = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Edges with both endpoints in {0..z_max}. The forward edge out of z_max is omitted,
// which is the reflecting closure used everywhere.
std::vector<Edge> enumerate_edges(EdgeKind kind, int z_max);

// Rate model whose field dependence is through xi(0) only. That covers every
// builtin model and lets the hot loops evaluate rates from one scalar.
class RateModel {
 public:
  enum class Family { mm1, wlan_const, wlan_decay, interacting_wlan };

  EdgeKind edge_kind() const { return kind_; }
  Family family() const { return family_; }
  const std::string& name() const { return name_; }
  bool interacting() const { return family_ == Family::interacting_wlan && kappa_ > 0.0; }
  // A2 constants. For models without declared bounds these are nominal (max/min rate).
  double lambda_upper() const { return upper_; }
  double lambda_lower() const { return lower_; }
  bool bounds_declared() const { return bounds_declared_; }
  double lambda_f() const { return lf_; }
  double lambda_b() const { return lb_; }
  double kappa() const { return kappa_; }

  // Rate of edge (z, z') at field xi; throws edge_not_present for non-edges.
  double rate(int z, int z_prime, const StateDistribution& xi) const;
  double forward_rate(int z, double xi0) const;
  // Rate of (z, z-1) for birth-death, (z, 0) for chain with resets; z >= 1.
  double backward_rate(int z, double xi0) const;

  // Tables on {0..z_max} at field xi0 with fwd[z_max] = 0 and bwd[0] = 0.
  void fill_rates(double xi0, int z_max, double* fwd, double* bwd) const;

  // The edge's target of the backward move from z.
  int backward_target(int z) const { return kind_ == EdgeKind::birth_death ? z - 1 : 0; }

  friend RateModel mm1_model(double, double);
  friend RateModel wlan_const_model(double, double);
  friend RateModel wlan_decay_model(double, double);
  friend RateModel interacting_wlan_model(double);
  friend RateModel dominating_chain(const RateModel&);

 private:
  RateModel() = default;

  EdgeKind kind_ = EdgeKind::chain_with_resets;
  Family family_ = Family::wlan_decay;
  std::string name_;
  double lf_ = 1.0;
  double lb_ = 1.0;
  double kappa_ = 0.0;
  double upper_ = 1.0;
  double lower_ = 1.0;
  bool bounds_declared_ = false;
};

RateModel mm1_model(double lambda_f, double lambda_b);
RateModel wlan_const_model(double lambda_f, double lambda_b);
RateModel wlan_decay_model(double lambda_f, double lambda_b);
RateModel interacting_wlan_model(double kappa);
RateModel dominating_chain(const RateModel& model);

// Balance equations of the single-particle generator at a frozen field.
StateDistribution single_particle_stationary(const RateModel& model, int z_max);
StateDistribution single_particle_stationary(const RateModel& model, int z_max,
                                             const StateDistribution& frozen_field);

// l1 norm of Lambda*_field pi on the truncation.
double stationarity_residual(const RateModel& model, const StateDistribution& pi,
                             const StateDistribution& field);

struct A2Report {
  bool pass = true;
  std::string first_violation;
};
A2Report verify_A2(const RateModel& model, const std::vector<StateDistribution>& samples);

double lipschitz_estimate(const RateModel& model, int trials, std::uint64_t rng_seed);

// Closed forms used as references.
double mm1_stationary_closed_form(double lambda_f, double lambda_b, int z);
double wlan_const_stationary_closed_form(double lambda_f, double lambda_b, int z);

// Random distribution on {0..z_max} for audits (exponential weights, random support size).
StateDistribution random_distribution(int z_max, Philox4x32& rng);

}  // namespace mfqp
