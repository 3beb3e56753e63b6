#include "mfqp/mckean_vlasov.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mfqp/kernels.hpp"
#include "mfqp/parallel.hpp"
#include "mfqp/rng.hpp"

namespace mfqp {

namespace {

struct Workspace {
  std::vector<double> fwd, bwd, k1, k2, k3, k4, tmp;
  explicit Workspace(std::size_t n) : fwd(n), bwd(n), k1(n), k2(n), k3(n), k4(n), tmp(n) {}
};

void drift_into(const RateModel& model, const std::vector<double>& mu, std::vector<double>& out,
                Workspace& ws) {
  const std::size_t n = mu.size();
  model.fill_rates(mu[0], static_cast<int>(n) - 1, ws.fwd.data(), ws.bwd.data());
  if (model.edge_kind() == EdgeKind::birth_death)
    kernels::drift_birth_death(mu.data(), ws.fwd.data(), ws.bwd.data(), out.data(), n);
  else
    kernels::drift_resets(mu.data(), ws.fwd.data(), ws.bwd.data(), out.data(), n);
}

void rk4_step(const RateModel& model, const std::vector<double>& y, double h, std::vector<double>& out,
              Workspace& ws) {
  const std::size_t n = y.size();
  drift_into(model, y, ws.k1, ws);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + 0.5 * h * ws.k1[i];
  drift_into(model, ws.tmp, ws.k2, ws);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + 0.5 * h * ws.k2[i];
  drift_into(model, ws.tmp, ws.k3, ws);
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + h * ws.k3[i];
  drift_into(model, ws.tmp, ws.k4, ws);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = y[i] + h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
}

}  // namespace

void mve_drift(const RateModel& model, const std::vector<double>& mu, std::vector<double>& out) {
  Workspace ws(mu.size());
  out.resize(mu.size());
  drift_into(model, mu, out, ws);
}

MvePath integrate(const RateModel& model, const StateDistribution& nu, double T, double tol,
                  double max_dt) {
  if (!(T > 0.0) || !(tol > 0.0)) throw Error(Reason::invalid_argument, "T and tol must be > 0");
  const std::size_t n = nu.size();
  const double mass = 1.0 - nu.tail_mass();
  Workspace ws(n);
  std::vector<double> y = nu.probs(), full(n), mid(n), half(n);
  MvePath path;
  path.times.push_back(0.0);
  path.states.push_back(nu);
  double t = 0.0;
  double h = std::min({max_dt, T, 1e-2});
  while (t < T) {
    const bool last = h >= T - t;
    const double step = last ? T - t : h;
    rk4_step(model, y, step, full, ws);
    rk4_step(model, y, 0.5 * step, mid, ws);
    rk4_step(model, mid, 0.5 * step, half, ws);
    double err = 0.0;
    double lowest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err = std::max(err, std::fabs(full[i] - half[i]));
      lowest = std::min(lowest, half[i]);
    }
    if (err > tol || lowest < -1e-12) {
      h = 0.5 * step;
      if (h < 1e-12) throw Error(Reason::stiffness, "step size underflow at t=" + format_real(t));
      continue;
    }
    double s = 0.0;
    for (auto& v : half) {
      v = std::max(v, 0.0);
      s += v;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] = half[i] * (mass / s);
    t = last ? T : t + step;
    path.times.push_back(t);
    path.states.emplace_back(y, nu.tail_mass(), nu.tail_profile());
    if (err < tol / 64.0) h = std::min(2.0 * step, max_dt);
  }
  return path;
}

MvePath integrate_on_grid(const RateModel& model, const StateDistribution& nu,
                          const std::vector<double>& grid, double tol) {
  if (grid.empty() || grid.front() != 0.0) throw Error(Reason::invalid_argument, "grid must start at 0");
  MvePath out;
  out.times.push_back(0.0);
  out.states.push_back(nu);
  StateDistribution cur = nu;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    if (!(dt > 0.0)) throw Error(Reason::invalid_argument, "grid must increase");
    cur = integrate(model, cur, dt, tol).states.back();
    out.times.push_back(grid[k]);
    out.states.push_back(cur);
  }
  return out;
}

StateDistribution find_equilibrium(const RateModel& model, int z_max, double tol,
                                   const StateDistribution& start) {
  if (!(tol > 0.0)) throw Error(Reason::invalid_argument, "tol must be > 0");
  if (!model.interacting()) return single_particle_stationary(model, z_max, start);
  constexpr double kOmega = 0.5;
  constexpr int kMaxIters = 10000;
  StateDistribution xi = start.retruncated(z_max);
  if (xi.tail_mass() > 0.0) xi = StateDistribution::from_weights(xi.probs());
  for (int it = 0; it < kMaxIters; ++it) {
    // Re-solving at the converged field drops the blend history from the small tail entries.
    if (stationarity_residual(model, xi, xi) < tol) return single_particle_stationary(model, z_max, xi);
    const StateDistribution sol = single_particle_stationary(model, z_max, xi);
    std::vector<double> next(xi.size());
    for (std::size_t z = 0; z < next.size(); ++z)
      next[z] = (1.0 - kOmega) * xi.probs()[z] + kOmega * sol.probs()[z];
    xi = StateDistribution::from_weights(std::move(next));
  }
  throw Error(Reason::equilibrium_not_found, model.name() + " after " + std::to_string(kMaxIters) +
                                                 " damped iterations");
}

StateDistribution find_equilibrium(const RateModel& model, int z_max, double tol) {
  return find_equilibrium(model, z_max, tol, StateDistribution::point_mass(0, z_max));
}

B2Report check_B2_from(const RateModel& model, const std::vector<StateDistribution>& initials,
                       double horizon, double threshold, unsigned threads) {
  if (initials.empty()) throw Error(Reason::invalid_argument, "no initial conditions");
  if (!(horizon > 0.0)) throw Error(Reason::invalid_argument, "horizon must be > 0");
  const int z_max = initials.front().z_max();
  const StateDistribution xi_star = find_equilibrium(model, z_max, 1e-12);
  const double target = theta_moment(xi_star).value();
  B2Report rep;
  rep.threshold = threshold;
  rep.initials = initials;
  constexpr int kGrid = 200;
  for (int k = 0; k <= kGrid; ++k) rep.grid.push_back(horizon * k / kGrid);
  std::vector<std::vector<double>> gaps(initials.size());
  parallel_for(initials.size(), threads, [&](std::size_t i) {
    const MvePath p = integrate_on_grid(model, initials[i], rep.grid, 1e-10);
    gaps[i].resize(p.states.size());
    for (std::size_t k = 0; k < p.states.size(); ++k)
      gaps[i][k] = std::fabs(theta_moment(p.states[k]).value() - target);
  });
  rep.sup_gap.assign(rep.grid.size(), 0.0);
  for (const auto& g : gaps)
    for (std::size_t k = 0; k < g.size(); ++k) rep.sup_gap[k] = std::max(rep.sup_gap[k], g[k]);
  rep.terminal_gap = rep.sup_gap.back();
  rep.pass = rep.terminal_gap < threshold;
  rep.statement = rep.pass ? "consistent with B2 over the sampled initial conditions"
                           : "not consistent with B2 at this horizon and threshold";
  return rep;
}

B2Report check_B2(const RateModel& model, double M, double horizon, int n_samples, std::uint64_t seed,
                  int z_max, double threshold, unsigned threads) {
  if (!(M > 0.0)) throw Error(Reason::invalid_argument, "M must be > 0");
  if (n_samples < 1) throw Error(Reason::invalid_argument, "n_samples must be >= 1");
  std::vector<StateDistribution> initials;
  const int z_hi = std::min(z_max, 12);
  for (int i = 0; i < n_samples; ++i) {
    Philox4x32 rng(seed, static_cast<std::uint64_t>(i));
    std::vector<double> w(static_cast<std::size_t>(z_max) + 1, 0.0);
    const int atoms = 1 + static_cast<int>(rng.below(3));
    for (int a = 0; a < atoms; ++a) w[rng.below(static_cast<std::uint64_t>(z_hi) + 1)] += rng.exponential();
    StateDistribution nu = StateDistribution::from_weights(std::move(w));
    const double th = theta_moment(nu).value();
    if (th > M) nu = mixture(nu, StateDistribution::point_mass(0, z_max), M / th);
    initials.push_back(std::move(nu));
  }
  return check_B2_from(model, initials, horizon, threshold, threads);
}

ExtReal time_to_KDelta(const RateModel& model, const StateDistribution& nu, double delta,
                       double horizon, double grid_dt) {
  if (!(delta > 0.0)) throw Error(Reason::invalid_argument, "delta must be > 0");
  if (horizon <= 0.0) horizon = 10.0 / model.lambda_lower();
  const StateDistribution xi_star = find_equilibrium(model, nu.z_max(), 1e-12);
  StateDistribution cur = nu;
  if (in_class_KDelta(cur, xi_star, delta)) return ExtReal(0.0);
  const int steps = static_cast<int>(std::ceil(horizon / grid_dt - 1e-9));
  for (int k = 1; k <= steps; ++k) {
    const double t = std::min(horizon, k * grid_dt);
    cur = integrate(model, cur, t - std::min(horizon, (k - 1) * grid_dt), 1e-11).states.back();
    if (in_class_KDelta(cur, xi_star, delta)) return ExtReal(t);
  }
  return ExtReal::infinity();
}

void write_mve_csv(std::ostream& os, const MvePath& path) {
  os << "t,z,prob\n";
  for (std::size_t k = 0; k < path.times.size(); ++k)
    for (int z = 0; z <= path.states[k].z_max(); ++z)
      os << format_real(path.times[k]) << ',' << z << ',' << format_real(path.states[k][z]) << '\n';
}

}  // namespace mfqp
