#include "mfqp/quasipotential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "mfqp/mckean_vlasov.hpp"

namespace mfqp {

namespace {

void require_resets(const RateModel& model) {
  if (model.edge_kind() != EdgeKind::chain_with_resets)
    throw Error(Reason::invalid_argument, model.name() + " does not have the chain-with-resets edge set");
}

void require_no_tail(const StateDistribution& xi, const char* what) {
  if (xi.tail_mass() > 0.0)
    throw Error(Reason::invalid_argument, std::string(what) + " must have no mass beyond z_max");
}

// Tracks the state while unit moves are appended.
class Builder {
 public:
  Builder(const StateDistribution& from) : traj_(from, EdgeKind::chain_with_resets), cur_(from.probs()) {}

  void move(int z, int z_prime, double mass) {
    if (!(mass > 0.0)) return;
    traj_.append_unit_move(z, z_prime, mass);
    cur_[static_cast<std::size_t>(z)] -= mass;
    cur_[static_cast<std::size_t>(z_prime)] += mass;
  }
  // Carries `mass` from state s up to state t through the forward edges.
  void carry_up(int s, int t, double mass) {
    for (int k = s + 1; k <= t; ++k) move(k - 1, k, mass);
  }
  double at(int z) const { return cur_[static_cast<std::size_t>(z)]; }
  FluxTrajectory take() { return std::move(traj_); }

 private:
  FluxTrajectory traj_;
  std::vector<double> cur_;
};

double best_lower(const RateModel& model, const StateDistribution& start, const StateDistribution& target,
                  double T, LowerParams& params) {
  double best = 0.0;
  params = LowerParams{T, 0, TestFunction::linear_fn};
  if (!(T > 0.0)) return best;
  for (int n = 1; n <= target.z_max(); ++n)
    for (TestFunction k : {TestFunction::linear_fn, TestFunction::theta_n}) {
      const double v = testfunction_lower_bound(model, start, target, T, n, k);
      if (v > best) {
        best = v;
        params = LowerParams{T, n, k};
      }
    }
  return best;
}

// Multiplicative coordinate descent on segment durations. Scaling a duration by c and
// its fluxes by 1/c keeps every knot, so feasibility is preserved.
void refine_durations(const RateModel& model, FluxTrajectory& traj, ExtReal& cost) {
  if (cost.is_infinite() || traj.segments().empty()) return;
  const SampledPath path = evolve(traj);
  auto& segs = traj.mutable_segments();
  std::vector<double> seg_cost(segs.size());
  for (std::size_t k = 0; k < segs.size(); ++k)
    seg_cost[k] = segment_cost(model, traj.edge_kind(), path.states[k], segs[k]).as_double();
  double c = 2.0;
  for (int round = 0; round < 200 && c > 1.001; ++round) {
    bool improved = false;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      for (double f : {c, 1.0 / c}) {
        Segment trial = segs[k];
        trial.duration *= f;
        for (auto& x : trial.fwd) x /= f;
        for (auto& x : trial.bwd) x /= f;
        const ExtReal v = segment_cost(model, traj.edge_kind(), path.states[k], trial);
        if (v.is_finite() && v.value() < seg_cost[k]) {
          segs[k] = std::move(trial);
          seg_cost[k] = v.value();
          improved = true;
          break;
        }
      }
    }
    if (!improved) c = std::sqrt(c);
  }
  const ExtReal total = cost_nonvariational(model, traj);
  if (total.is_finite() && total.value() <= cost.value()) cost = total;
}

}  // namespace

FluxTrajectory construct_delta0_to_target(const RateModel& model, const StateDistribution& xi) {
  require_resets(model);
  require_no_tail(xi, "target");
  Builder b(StateDistribution::point_mass(0, xi.z_max()));
  for (int z = xi.z_max(); z >= 1; --z) b.carry_up(0, z, xi[z]);
  return b.take();
}

FluxTrajectory construct_equilibrium_to_delta0(const RateModel& model, const StateDistribution& xi_star) {
  require_resets(model);
  require_no_tail(xi_star, "equilibrium");
  Builder b(xi_star);
  for (int z = 1; z <= xi_star.z_max(); ++z) b.move(z, 0, xi_star[z]);
  return b.take();
}

int choose_z0(const StateDistribution& to, double tolerance) {
  if (!(tolerance > 0.0)) throw Error(Reason::invalid_argument, "tolerance must be > 0");
  double tail = 0.0;
  int z0 = to.z_max();
  for (int z = to.z_max(); z >= 1; --z) {
    tail += theta_fn(z) * to[z];
    if (tail >= 0.1 * tolerance) break;
    z0 = z - 1;
  }
  return z0;
}

FluxTrajectory connector(const RateModel& model, const StateDistribution& from, const StateDistribution& to,
                         int z0) {
  require_resets(model);
  require_no_tail(from, "from");
  require_no_tail(to, "to");
  if (from.z_max() != to.z_max()) throw Error(Reason::truncation_mismatch, "connector endpoints");
  const int z_max = to.z_max();
  if (z0 < 0 || z0 > z_max) throw Error(Reason::invalid_argument, "z0 out of range");
  Builder b(from);
  if (from.probs() == to.probs()) return b.take();

  // Sweep the tail of `from` to 0.
  for (int z = z0 + 1; z <= z_max; ++z) b.move(z, 0, b.at(z));
  // Make sure state 0 can supply the tail mass of `to`.
  double eps = 0.0;
  for (int z = z0 + 1; z <= z_max; ++z) eps += to[z];
  double need = eps - b.at(0);
  for (int z = z0; z >= 1 && need > 0.0; --z) {
    const double take = std::min(b.at(z), need);
    b.move(z, 0, take);
    need -= take;
  }
  if (need > 1e-15)
    throw Error(Reason::infeasible_trajectory, "connector phase ordering: z0 too small");
  // Carry the tail mass to z0 + 1, then spread it along the tail.
  if (z0 < z_max && eps > 0.0) {
    b.carry_up(0, z0 + 1, eps);
    for (int z = z_max; z >= z0 + 2; --z) b.carry_up(z0 + 1, z, to[z]);
  }
  // Reconcile {1..z0}.
  for (int z = 1; z <= z0; ++z)
    if (b.at(z) > to[z]) b.move(z, 0, b.at(z) - to[z]);
  for (int z = z0; z >= 1; --z)
    if (b.at(z) < to[z]) b.carry_up(0, z, to[z] - b.at(z));
  return b.take();
}

FluxTrajectory descend_to_equilibrium(const RateModel& model, const StateDistribution& nu, double delta,
                                      double dt_max) {
  require_resets(model);
  if (!model.bounds_declared()) throw Error(Reason::missing_bounds, model.name());
  const StateDistribution xi_star = find_equilibrium(model, nu.z_max(), 1e-12);
  const int z0 = choose_z0(xi_star, delta);
  const ExtReal t_hit = time_to_KDelta(model, nu, delta);
  if (t_hit.is_infinite())
    throw Error(Reason::equilibrium_not_found, "K(delta) not reached within the descent horizon");
  if (t_hit.value() == 0.0) return connector(model, nu, xi_star, z0);
  const FluxTrajectory flow = mve_flux_trajectory(model, nu, t_hit.value(), dt_max);
  const StateDistribution mid = terminal_state(flow);
  return concatenate(flow, connector(model, mid, xi_star, z0));
}

VBound v_upper_bound(const RateModel& model, const StateDistribution& xi, bool refine) {
  require_resets(model);
  if (!model.bounds_declared()) throw Error(Reason::missing_bounds, model.name());
  require_no_tail(xi, "target");
  const StateDistribution xi_star = find_equilibrium(model, xi.z_max(), 1e-12);

  struct Candidate {
    FluxTrajectory traj;
    ExtReal cost;
    std::string kind;
  };
  std::vector<Candidate> cands;
  if (xi.probs() == xi_star.probs()) {
    cands.push_back({FluxTrajectory(xi_star, EdgeKind::chain_with_resets), ExtReal(0.0), "empty"});
  } else {
    FluxTrajectory glued = concatenate(construct_equilibrium_to_delta0(model, xi_star),
                                       construct_delta0_to_target(model, xi));
    ExtReal c = cost_nonvariational(model, glued);
    cands.push_back({std::move(glued), c, "glued"});
    FluxTrajectory conn = connector(model, xi_star, xi, choose_z0(xi, 1e-6));
    c = cost_nonvariational(model, conn);
    cands.push_back({std::move(conn), c, "connector"});
  }
  auto best = std::min_element(cands.begin(), cands.end(),
                               [](const Candidate& a, const Candidate& b) { return a.cost < b.cost; });
  VBound out{xi, best->cost, 0.0, std::move(best->traj), {}, best->kind};
  if (refine) refine_durations(model, out.witness, out.upper);
  out.lower = best_lower(model, xi_star, xi, out.witness.duration(), out.lower_params);
  return out;
}

double cm_bound(const RateModel& model, const StateDistribution& xi) {
  require_resets(model);
  if (!model.bounds_declared()) throw Error(Reason::missing_bounds, model.name());
  require_no_tail(xi, "target");
  const double hi = model.lambda_upper();
  const double lo_term = std::log(1.0 / model.lambda_lower()) + 2.0 * hi;
  int J = 0;
  for (int z = 0; z <= xi.z_max(); ++z)
    if (xi[z] > 0.0) J = z;
  double main = 1.0 / std::numbers::e;
  for (int z = 1; z <= J; ++z) {
    const double p = xi[z];
    main += 3.0 * (std::log(z) / (double(z) * z) + theta_fn(z) * p);
    main += (z * std::log(z) + z) * p + z * p * lo_term;
    main += 2.0 * hi * z * p;
  }
  // Bound on the sweep from xi* to delta_0.
  const StateDistribution xi_star = find_equilibrium(model, xi.z_max(), 1e-12);
  double leg = 0.0;
  for (int z = 1; z <= xi_star.z_max(); ++z) {
    const double p = xi_star[z];
    if (p > 0.0) leg += p * std::log(1.0 / p) + p * lo_term;
  }
  return main + leg;
}

Finiteness v_finiteness_predicate(const RateModel& model, const AnalyticDistribution& xi) {
  require_resets(model);
  if (!model.bounds_declared()) throw Error(Reason::missing_bounds, model.name());
  return xi.theta_moment_finite() ? Finiteness::finite : Finiteness::infinite;
}

StateDistribution heavy_tail_target(int K) {
  if (K < 2) throw Error(Reason::invalid_argument, "K must be >= 2");
  std::vector<double> w(static_cast<std::size_t>(K) + 1, 0.0);
  for (int z = 2; z <= K; ++z) {
    const double l = std::log(z);
    w[static_cast<std::size_t>(z)] = 1.0 / (double(z) * z * l * l);
  }
  return StateDistribution::from_weights(std::move(w));
}

CounterexampleReport counterexample_report(const RateModel& model, const std::vector<int>& K_list,
                                           const std::vector<double>& T_grid) {
  using F = RateModel::Family;
  if (model.family() != F::mm1 && model.family() != F::wlan_const)
    throw Error(Reason::invalid_argument, "counterexample models are mm1 and wlan_const");
  if (K_list.empty() || T_grid.empty()) throw Error(Reason::invalid_argument, "empty K list or T grid");
  if (!std::is_sorted(K_list.begin(), K_list.end()))
    throw Error(Reason::invalid_argument, "K list must increase");
  const double rho = model.family() == F::mm1 ? model.lambda_f() / model.lambda_b()
                                              : model.lambda_f() / (model.lambda_f() + model.lambda_b());
  if (!(rho < 1.0)) throw Error(Reason::instability, model.name() + " has no stationary law");
  CounterexampleReport rep;
  rep.model = model.name();
  rep.T_grid = T_grid;
  for (int K : K_list) {
    const StateDistribution target = heavy_tail_target(K);
    const StateDistribution xi_star = StateDistribution::geometric(rho, K);
    CounterexampleRow row;
    row.K = K;
    row.entropy = relative_entropy(target, xi_star).value();
    row.theta_moment = theta_moment(target).value();
    row.first_moment = first_moment(target).value();
    row.best_linear = row.best_theta = row.best = -std::numeric_limits<double>::infinity();
    for (double T : T_grid)
      for (int n = 1; n <= K; ++n) {
        const double l = testfunction_lower_bound(model, xi_star, target, T, n, TestFunction::linear_fn);
        const double t = testfunction_lower_bound(model, xi_star, target, T, n, TestFunction::theta_n);
        row.best_linear = std::max(row.best_linear, l);
        row.best_theta = std::max(row.best_theta, t);
        if (l > row.best) {
          row.best = l;
          row.best_params = {T, n, TestFunction::linear_fn};
        }
        if (t > row.best) {
          row.best = t;
          row.best_params = {T, n, TestFunction::theta_n};
        }
      }
    rep.rows.push_back(row);
  }
  const auto& first = rep.rows.front();
  const auto& last = rep.rows.back();
  rep.entropy_change = last.entropy - first.entropy;
  rep.bound_change = last.best - first.best;
  rep.divergence_ratio = rep.bound_change / std::max(std::fabs(rep.entropy_change), 1e-300);
  return rep;
}

const char* test_function_name(TestFunction k) {
  return k == TestFunction::theta_n ? "theta_n" : "linear";
}

void write_vbound_json(std::ostream& os, const VBound& b, const std::string& target_file,
                       const std::string& witness_file) {
  auto quote = [](const std::string& s) {
    std::string o = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') o += '\\';
      o += c;
    }
    return o + "\"";
  };
  os << "{\n"
     << "  \"target_file\": " << quote(target_file) << ",\n"
     << "  \"upper\": " << (b.upper.is_infinite() ? "\"inf\"" : format_real(b.upper.value())) << ",\n"
     << "  \"upper_label\": \"upper bound (unverified gap)\",\n"
     << "  \"lower\": " << format_real(b.lower) << ",\n"
     << "  \"witness_file\": " << quote(witness_file) << ",\n"
     << "  \"witness_kind\": " << quote(b.witness_kind) << ",\n"
     << "  \"lower_params\": {\"T\": " << format_real(b.lower_params.T) << ", \"n\": " << b.lower_params.n
     << ", \"kind\": " << quote(test_function_name(b.lower_params.kind)) << "}\n"
     << "}\n";
}

}  // namespace mfqp
