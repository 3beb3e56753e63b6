#pragma once

#include <iosfwd>
#include <vector>

#include "mfqp/measures.hpp"
#include "mfqp/models.hpp"

namespace mfqp {

double tau(double u);
ExtReal tau_star(double u);

// Per-edge fluxes on {0..z_max}: fwd[z] on (z, z+1) for z < z_max, bwd[z] on the
// backward edge out of z (to z-1 or to 0 depending on the edge kind), bwd[0] unused.
struct Segment {
  double duration = 0.0;
  std::vector<double> fwd;
  std::vector<double> bwd;
};

class FluxTrajectory {
 public:
  FluxTrajectory(StateDistribution initial, EdgeKind kind);

  const StateDistribution& initial() const { return initial_; }
  EdgeKind edge_kind() const { return kind_; }
  int z_max() const { return initial_.z_max(); }
  const std::vector<Segment>& segments() const { return segments_; }
  std::vector<Segment>& mutable_segments() { return segments_; }
  double duration() const;

  Segment blank_segment(double duration) const;
  void append(Segment s);
  // Moves `mass` along edge (z, z') at unit velocity: one segment of duration `mass`.
  void append_unit_move(int z, int z_prime, double mass);
  void append_idle(double duration);

 private:
  StateDistribution initial_;
  EdgeKind kind_;
  std::vector<Segment> segments_;
};

// Piecewise-affine path: states at the knots, affine in between.
struct SampledPath {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
};

SampledPath evolve(const FluxTrajectory& traj);
StateDistribution terminal_state(const FluxTrajectory& traj);

ExtReal cost_nonvariational(const RateModel& model, const FluxTrajectory& traj);
// Cost of one segment started from `start` (affine path, same rules as above).
ExtReal segment_cost(const RateModel& model, EdgeKind kind, const std::vector<double>& start,
                     const Segment& seg);

struct VariationalResult {
  ExtReal value;
  bool converged = true;  // false when some inner ascent stopped early
  int refinements = 0;
  double max_gradient = 0.0;
};
VariationalResult cost_variational(const RateModel& model, const SampledPath& path, int z_max,
                                   EdgeKind kind);

// Maximizer of <alpha, v> - sum_e w_e (exp(alpha(z') - alpha(z)) - 1); exposed for tests.
struct DualSolution {
  double value = 0.0;
  std::vector<double> alpha;
  std::vector<double> flux_fwd;
  std::vector<double> flux_bwd;
  double grad_inf = 0.0;
  bool converged = true;
};
DualSolution solve_dual(EdgeKind kind, const std::vector<double>& w_fwd,
                        const std::vector<double>& w_bwd, const std::vector<double>& velocity);

FluxTrajectory flux_from_path(const RateModel& model, const SampledPath& path,
                              const StateDistribution& initial, EdgeKind kind);

FluxTrajectory concatenate(const FluxTrajectory& a, const FluxTrajectory& b);

enum class TestFunction { linear_fn, theta_n };

// Lower bound on the cost of any trajectory of duration T from start to target.
double testfunction_lower_bound(const RateModel& model, const StateDistribution& start,
                                const StateDistribution& target, double T, int n, TestFunction kind);

// Tent functions: f_n(z) = z up to n then 2n - z down to 0; theta_n likewise with theta.
double tent_linear(int z, int n);
double tent_theta(int z, int n);

struct MomentCheck {
  bool holds = true;
  double lhs = 0.0;  // sup_t <phi_t, theta>
  double rhs = 0.0;
};
MomentCheck moment_inequality(const RateModel& model, const FluxTrajectory& traj);
bool moment_inequality_check(const RateModel& model, const FluxTrajectory& traj);

// MVE flow as a flux plan: fixed RK4 steps whose per-edge flows are integrated with the
// same weights as the state, so the plan reproduces the RK4 path exactly.
FluxTrajectory mve_flux_trajectory(const RateModel& model, const StateDistribution& nu, double T,
                                   double dt_max);

void write_flux_trajectory(std::ostream& os, const FluxTrajectory& traj);
FluxTrajectory read_flux_trajectory(std::istream& is);

}  // namespace mfqp
