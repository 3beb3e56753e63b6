#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfqp/measures.hpp"
#include "mfqp/models.hpp"

namespace mfqp {

struct MvePath {
  std::vector<double> times;
  std::vector<StateDistribution> states;
};

// mu' = Lambda*_mu mu on {0..z_max}, written into out.
void mve_drift(const RateModel& model, const std::vector<double>& mu, std::vector<double>& out);

// Adaptive RK4: a full step is compared with two half steps and accepted when the
// max-norm difference is below tol. Accepted steps are recorded.
MvePath integrate(const RateModel& model, const StateDistribution& nu, double T, double tol,
                  double max_dt = 0.25);

// States at the requested grid times (which must start at 0 and increase).
MvePath integrate_on_grid(const RateModel& model, const StateDistribution& nu,
                          const std::vector<double>& grid, double tol);

StateDistribution find_equilibrium(const RateModel& model, int z_max, double tol);
StateDistribution find_equilibrium(const RateModel& model, int z_max, double tol,
                                   const StateDistribution& start);

struct B2Report {
  bool pass = false;
  double threshold = 1e-3;
  double terminal_gap = 0.0;
  std::vector<double> grid;
  std::vector<double> sup_gap;  // sup over samples of |<mu_t, theta> - <xi*, theta>|
  std::vector<StateDistribution> initials;
  std::string statement;
};

B2Report check_B2(const RateModel& model, double M, double horizon, int n_samples, std::uint64_t seed,
                  int z_max = 40, double threshold = 1e-3, unsigned threads = 1);
B2Report check_B2_from(const RateModel& model, const std::vector<StateDistribution>& initials,
                       double horizon, double threshold = 1e-3, unsigned threads = 1);

// Smallest time on a grid of spacing grid_dt at which mu_nu(t) is in K(delta); infinity
// if not reached by the horizon (default 10 / lambda_lower).
ExtReal time_to_KDelta(const RateModel& model, const StateDistribution& nu, double delta,
                       double horizon = -1.0, double grid_dt = 0.01);

void write_mve_csv(std::ostream& os, const MvePath& path);

}  // namespace mfqp
