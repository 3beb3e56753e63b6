#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mfqp/cost.hpp"
#include "mfqp/measures.hpp"
#include "mfqp/models.hpp"

namespace mfqp {

// Moves xi(z) from 0 up to z in unit steps, z descending. Starts at delta_0.
FluxTrajectory construct_delta0_to_target(const RateModel& model, const StateDistribution& xi);

// Sweeps xi*(z) from z to 0 for z ascending. Ends at delta_0.
FluxTrajectory construct_equilibrium_to_delta0(const RateModel& model, const StateDistribution& xi_star);

// Five-phase transfer from `from` to `to` that only touches the tail above z0 in bulk.
FluxTrajectory connector(const RateModel& model, const StateDistribution& from,
                         const StateDistribution& to, int z0);

// Smallest z0 with sum_{z > z0} theta(z) to(z) < 0.1 * tolerance.
int choose_z0(const StateDistribution& to, double tolerance);

// MVE flow into K(delta), then a connector into xi*.
FluxTrajectory descend_to_equilibrium(const RateModel& model, const StateDistribution& nu, double delta,
                                      double dt_max = 1e-3);

struct LowerParams {
  double T = 0.0;
  int n = 0;
  TestFunction kind = TestFunction::linear_fn;
};

struct VBound {
  StateDistribution target;
  ExtReal upper;
  // Best test-function bound at the witness duration, floored at 0.
  double lower = 0.0;
  FluxTrajectory witness;
  LowerParams lower_params;
  std::string witness_kind;  // "empty", "glued", "connector"
};

VBound v_upper_bound(const RateModel& model, const StateDistribution& xi, bool refine);

// Per-target evaluation of the explicit bound on the glued construction's cost.
double cm_bound(const RateModel& model, const StateDistribution& xi);

enum class Finiteness { finite, infinite };
Finiteness v_finiteness_predicate(const RateModel& model, const AnalyticDistribution& xi);

// xi(z) proportional to 1 / (z^2 log^2 z) on {2..K}.
StateDistribution heavy_tail_target(int K);

struct CounterexampleRow {
  int K = 0;
  double entropy = 0.0;       // I(xi^(K) | xi*)
  double theta_moment = 0.0;
  double first_moment = 0.0;
  double best_linear = 0.0;   // max over n, T of the linear-tent bound
  double best_theta = 0.0;    // max over n, T of the theta-tent bound
  double best = 0.0;
  LowerParams best_params;
};

struct CounterexampleReport {
  std::string model;
  std::vector<double> T_grid;
  std::vector<CounterexampleRow> rows;
  double entropy_change = 0.0;  // between the largest and smallest K
  double bound_change = 0.0;
  double divergence_ratio = 0.0;  // bound_change / |entropy_change|
};

CounterexampleReport counterexample_report(const RateModel& model, const std::vector<int>& K_list,
                                           const std::vector<double>& T_grid);

const char* test_function_name(TestFunction k);
void write_vbound_json(std::ostream& os, const VBound& b, const std::string& target_file,
                       const std::string& witness_file);

}  // namespace mfqp
