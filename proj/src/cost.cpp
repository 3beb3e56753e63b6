#include "mfqp/cost.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include "mfqp/kernels.hpp"

namespace mfqp {

namespace {

constexpr double kE = std::numbers::e;

// Integral of log(phi_t) over [0, D] for phi affine from a to p1; a, p1 >= 0 and not both 0.
double integral_log(double a, double p1, double D) {
  if (a <= 0.0) return D * (std::log(p1) - 1.0);
  const double x = (p1 - a) / a;
  double g_over_x;
  if (std::fabs(x) < 1e-3) {
    // sum_{k>=2} (-1)^k x^(k-1) / (k (k-1))
    g_over_x = x / 2.0 - x * x / 6.0 + x * x * x / 12.0 - x * x * x * x / 20.0 +
               x * x * x * x * x / 30.0;
  } else {
    const double y = p1 / a;
    g_over_x = (xlogx(y) - (y - 1.0)) / x;
  }
  return D * (std::log(a) + g_over_x);
}

// Integral over [0, D] of f log(f / (lam phi)) - f + lam phi with phi affine from a to p1.
ExtReal edge_integral(double a, double p1, double D, double f, double lam) {
  a = std::max(a, 0.0);
  p1 = std::max(p1, 0.0);
  const double idle = lam * D * 0.5 * (a + p1);
  if (f <= 0.0) return ExtReal(idle);
  if (a == 0.0 && p1 == 0.0) return ExtReal::infinity();
  const double val = f * D * (std::log(f / lam) - 1.0) - f * integral_log(a, p1, D) + idle;
  return ExtReal(std::max(val, 0.0));
}

void net_flow(EdgeKind kind, const std::vector<double>& fwd, const std::vector<double>& bwd,
              std::vector<double>& net) {
  const std::size_t n = net.size();
  std::fill(net.begin(), net.end(), 0.0);
  for (std::size_t z = 0; z + 1 < n; ++z) {
    net[z] -= fwd[z];
    net[z + 1] += fwd[z];
  }
  for (std::size_t z = 1; z < n; ++z) {
    net[z] -= bwd[z];
    net[kind == EdgeKind::birth_death ? z - 1 : 0] += bwd[z];
  }
}

// Cost of one affine piece with rates frozen at the field phi_mid(0).
ExtReal piece_cost(const RateModel& model, const Segment& seg, const std::vector<double>& a,
                   const std::vector<double>& slope, double t0, double h) {
  const int z_max = static_cast<int>(a.size()) - 1;
  const double field = a[0] + slope[0] * (t0 + 0.5 * h);
  ExtReal total(0.0);
  for (int z = 0; z <= z_max; ++z) {
    const double s = a[static_cast<std::size_t>(z)] + slope[static_cast<std::size_t>(z)] * t0;
    const double e = a[static_cast<std::size_t>(z)] + slope[static_cast<std::size_t>(z)] * (t0 + h);
    if (z < z_max) total += edge_integral(s, e, h, seg.fwd[static_cast<std::size_t>(z)],
                                          model.forward_rate(z, field));
    if (z > 0) total += edge_integral(s, e, h, seg.bwd[static_cast<std::size_t>(z)],
                                      model.backward_rate(z, field));
    if (total.is_infinite()) return total;
  }
  return total;
}

ExtReal refined_piece_cost(const RateModel& model, const Segment& seg, const std::vector<double>& a,
                           const std::vector<double>& slope, double t0, double h, double tol,
                           int depth) {
  const ExtReal whole = piece_cost(model, seg, a, slope, t0, h);
  if (!model.interacting() || whole.is_infinite()) return whole;
  const ExtReal halves = piece_cost(model, seg, a, slope, t0, 0.5 * h) +
                         piece_cost(model, seg, a, slope, t0 + 0.5 * h, 0.5 * h);
  if (halves.is_infinite()) return halves;
  if (std::fabs(whole.value() - halves.value()) < tol || depth >= 30) return halves;
  return refined_piece_cost(model, seg, a, slope, t0, 0.5 * h, 0.5 * tol, depth + 1) +
         refined_piece_cost(model, seg, a, slope, t0 + 0.5 * h, 0.5 * h, 0.5 * tol, depth + 1);
}

void require_kind(const RateModel& model, EdgeKind kind) {
  if (model.edge_kind() != kind)
    throw Error(Reason::invalid_argument, "trajectory edge kind does not match model " + model.name());
}

const char* kind_name(EdgeKind k) {
  return k == EdgeKind::birth_death ? "birth_death" : "chain_with_resets";
}

}  // namespace

double tau(double u) { return std::expm1(u) - u; }

ExtReal tau_star(double u) {
  if (u < -1.0) return ExtReal::infinity();
  if (u == -1.0) return ExtReal(1.0);
  return ExtReal((u + 1.0) * std::log1p(u) - u);
}

FluxTrajectory::FluxTrajectory(StateDistribution initial, EdgeKind kind)
    : initial_(std::move(initial)), kind_(kind) {}

double FluxTrajectory::duration() const {
  double t = 0.0;
  for (const auto& s : segments_) t += s.duration;
  return t;
}

Segment FluxTrajectory::blank_segment(double duration) const {
  Segment s;
  s.duration = duration;
  s.fwd.assign(initial_.size(), 0.0);
  s.bwd.assign(initial_.size(), 0.0);
  return s;
}

void FluxTrajectory::append(Segment s) {
  if (!(s.duration > 0.0) || !std::isfinite(s.duration))
    throw Error(Reason::invalid_argument, "segment duration must be positive");
  if (s.fwd.size() != initial_.size() || s.bwd.size() != initial_.size())
    throw Error(Reason::truncation_mismatch, "segment flux vectors have the wrong size");
  for (std::size_t z = 0; z < s.fwd.size(); ++z)
    if (!(s.fwd[z] >= 0.0) || !(s.bwd[z] >= 0.0) || !std::isfinite(s.fwd[z]) || !std::isfinite(s.bwd[z]))
      throw Error(Reason::invalid_argument, "fluxes must be finite and >= 0");
  s.fwd.back() = 0.0;
  s.bwd.front() = 0.0;
  segments_.push_back(std::move(s));
}

void FluxTrajectory::append_unit_move(int z, int z_prime, double mass) {
  if (!(mass > 0.0)) return;
  Segment s = blank_segment(mass);
  if (z_prime == z + 1 && z < z_max()) {
    s.fwd[static_cast<std::size_t>(z)] = 1.0;
  } else if (z >= 1 && z <= z_max() && z_prime == (kind_ == EdgeKind::birth_death ? z - 1 : 0)) {
    s.bwd[static_cast<std::size_t>(z)] = 1.0;
  } else {
    throw Error(Reason::edge_not_present, "(" + std::to_string(z) + "," + std::to_string(z_prime) + ")");
  }
  append(std::move(s));
}

void FluxTrajectory::append_idle(double duration) { append(blank_segment(duration)); }

SampledPath evolve(const FluxTrajectory& traj) {
  SampledPath path;
  const std::size_t n = traj.initial().size();
  std::vector<double> phi = traj.initial().probs();
  std::vector<double> net(n);
  double t = 0.0;
  path.times.push_back(t);
  path.states.push_back(phi);
  for (std::size_t k = 0; k < traj.segments().size(); ++k) {
    const Segment& s = traj.segments()[k];
    net_flow(traj.edge_kind(), s.fwd, s.bwd, net);
    for (std::size_t z = 0; z < n; ++z) {
      phi[z] += s.duration * net[z];
      if (phi[z] < -1e-12)
        throw Error(Reason::infeasible_trajectory, "mass at state " + std::to_string(z) + " becomes " +
                                                       format_real(phi[z]) + " after segment " +
                                                       std::to_string(k));
      if (phi[z] < 0.0) phi[z] = 0.0;
    }
    t += s.duration;
    path.times.push_back(t);
    path.states.push_back(phi);
  }
  return path;
}

StateDistribution terminal_state(const FluxTrajectory& traj) {
  SampledPath p = evolve(traj);
  std::vector<double> last = p.states.back();
  double s = traj.initial().tail_mass();
  for (double x : last) s += x;
  const double scale = (1.0 - traj.initial().tail_mass()) / (s - traj.initial().tail_mass());
  for (auto& x : last) x *= scale;
  return StateDistribution(std::move(last), traj.initial().tail_mass(), traj.initial().tail_profile());
}

ExtReal cost_nonvariational(const RateModel& model, const FluxTrajectory& traj) {
  require_kind(model, traj.edge_kind());
  const SampledPath path = evolve(traj);
  const std::size_t n = traj.initial().size();
  std::vector<double> net(n);
  std::vector<double> slope(n);
  ExtReal total(0.0);
  for (std::size_t k = 0; k < traj.segments().size(); ++k) {
    const Segment& s = traj.segments()[k];
    const std::vector<double>& a = path.states[k];
    const std::vector<double>& e = path.states[k + 1];
    for (std::size_t z = 0; z < n; ++z) slope[z] = (e[z] - a[z]) / s.duration;
    total += refined_piece_cost(model, s, a, slope, 0.0, s.duration, 1e-7, 0);
    if (total.is_infinite()) return total;
  }
  return total;
}

ExtReal segment_cost(const RateModel& model, EdgeKind kind, const std::vector<double>& start,
                     const Segment& seg) {
  require_kind(model, kind);
  const std::size_t n = start.size();
  std::vector<double> net(n), slope(n);
  net_flow(kind, seg.fwd, seg.bwd, net);
  for (std::size_t z = 0; z < n; ++z) slope[z] = net[z];
  return refined_piece_cost(model, seg, start, slope, 0.0, seg.duration, 1e-7, 0);
}

DualSolution solve_dual(EdgeKind kind, const std::vector<double>& w_fwd,
                        const std::vector<double>& w_bwd, const std::vector<double>& velocity) {
  const int n = static_cast<int>(velocity.size());
  DualSolution sol;
  sol.alpha.assign(static_cast<std::size_t>(n), 0.0);
  sol.flux_fwd.assign(static_cast<std::size_t>(n), 0.0);
  sol.flux_bwd.assign(static_cast<std::size_t>(n), 0.0);
  auto target = [&](int z) { return kind == EdgeKind::birth_death ? z - 1 : 0; };
  auto expo = [](double x) { return std::exp(std::min(x, 700.0)); };

  auto objective = [&](const std::vector<double>& al) {
    double g = 0.0;
    for (int z = 0; z < n; ++z) g += al[static_cast<std::size_t>(z)] * velocity[static_cast<std::size_t>(z)];
    for (int z = 0; z + 1 < n; ++z)
      if (w_fwd[static_cast<std::size_t>(z)] > 0.0)
        g -= w_fwd[static_cast<std::size_t>(z)] * std::expm1(std::min(al[z + 1] - al[z], 700.0));
    for (int z = 1; z < n; ++z)
      if (w_bwd[static_cast<std::size_t>(z)] > 0.0)
        g -= w_bwd[static_cast<std::size_t>(z)] *
             std::expm1(std::min(al[static_cast<std::size_t>(target(z))] - al[z], 700.0));
    return g;
  };

  auto grad_inf_at = [&](const std::vector<double>& al) {
    std::vector<double> gr(velocity);
    for (int z = 0; z + 1 < n; ++z)
      if (w_fwd[static_cast<std::size_t>(z)] > 0.0) {
        const double f = w_fwd[static_cast<std::size_t>(z)] * expo(al[z + 1] - al[z]);
        gr[z + 1] -= f;
        gr[z] += f;
      }
    for (int z = 1; z < n; ++z)
      if (w_bwd[static_cast<std::size_t>(z)] > 0.0) {
        const auto zp = static_cast<std::size_t>(target(z));
        const double f = w_bwd[static_cast<std::size_t>(z)] * expo(al[zp] - al[z]);
        gr[zp] -= f;
        gr[z] += f;
      }
    double m = 0.0;
    for (double x : gr) m = std::max(m, std::fabs(x));
    return m;
  };

  std::vector<double> grad(static_cast<std::size_t>(n));
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd g(n);
  double value = 0.0;
  double tol_abs = 1e-10;
  for (int it = 0; it < 400; ++it) {
    // Fluxes at the current alpha and the gradient v - (inflow - outflow).
    for (int z = 0; z < n; ++z) grad[static_cast<std::size_t>(z)] = velocity[static_cast<std::size_t>(z)];
    hess.setZero();
    auto add_edge = [&](int z, int zp, double w, double& f_out) {
      if (w <= 0.0) {
        f_out = 0.0;
        return;
      }
      const double f = w * expo(sol.alpha[zp] - sol.alpha[z]);
      f_out = f;
      grad[static_cast<std::size_t>(zp)] -= f;
      grad[static_cast<std::size_t>(z)] += f;
      hess(z, z) += f;
      hess(zp, zp) += f;
      hess(z, zp) -= f;
      hess(zp, z) -= f;
    };
    for (int z = 0; z + 1 < n; ++z) add_edge(z, z + 1, w_fwd[static_cast<std::size_t>(z)], sol.flux_fwd[z]);
    for (int z = 1; z < n; ++z) add_edge(z, target(z), w_bwd[static_cast<std::size_t>(z)], sol.flux_bwd[z]);
    double gmax = 0.0;
    for (double x : grad) gmax = std::max(gmax, std::fabs(x));
    sol.grad_inf = gmax;
    // Gradient entries are differences of fluxes, so round-off scales with the largest one.
    double scale = 1.0;
    for (double x : velocity) scale = std::max(scale, std::fabs(x));
    for (int z = 0; z < n; ++z) scale = std::max({scale, sol.flux_fwd[z], sol.flux_bwd[z]});
    tol_abs = 1e-10 * scale;
    if (gmax < tol_abs) break;
    double dmax = 0.0;
    for (int z = 0; z < n; ++z) dmax = std::max(dmax, hess(z, z));
    const double ridge = 1e-13 * std::max(dmax, 1e-30);
    // The Laplacian is singular along constants: add a rank-one term there and solve
    // with the gradient projected off that direction.
    double gmean = 0.0;
    for (double x : grad) gmean += x / n;
    hess.array() += dmax / n;
    for (int z = 0; z < n; ++z) {
      if (hess(z, z) == dmax / n)
        hess(z, z) += 1.0;
      else
        hess(z, z) += ridge;
      g(z) = grad[static_cast<std::size_t>(z)] - gmean;
    }
    const Eigen::VectorXd step = hess.ldlt().solve(g);
    const double slope = g.dot(step);
    std::vector<double> trial(static_cast<std::size_t>(n));
    bool moved = false;
    if (gmax < 1e-6 * scale) {
      // Near the optimum the objective is flat to round-off, so the full Newton step is
      // judged by the gradient instead of by Armijo.
      for (int z = 0; z < n; ++z) trial[static_cast<std::size_t>(z)] = sol.alpha[z] + step(z);
      if (grad_inf_at(trial) < gmax) {
        sol.alpha = trial;
        value = objective(trial);
        moved = true;
      }
    } else {
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls) {
        for (int z = 0; z < n; ++z) trial[static_cast<std::size_t>(z)] = sol.alpha[z] + t * step(z);
        const double v = objective(trial);
        if (v >= value + 1e-4 * t * slope) {
          sol.alpha = trial;
          value = v;
          moved = true;
          break;
        }
        t *= 0.5;
      }
    }
    if (!moved) break;
  }
  sol.value = std::max(value, 0.0);
  sol.converged = sol.grad_inf < tol_abs;
  return sol;
}

namespace {

struct Integrand {
  double value = 0.0;
  double grad = 0.0;
  bool converged = true;
};

Integrand variational_integrand(const RateModel& model, EdgeKind kind, const std::vector<double>& phi,
                                const std::vector<double>& v) {
  const int z_max = static_cast<int>(phi.size()) - 1;
  std::vector<double> fwd(phi.size()), bwd(phi.size()), wf(phi.size()), wb(phi.size());
  model.fill_rates(phi[0], z_max, fwd.data(), bwd.data());
  for (std::size_t z = 0; z < phi.size(); ++z) {
    const double m = std::max(phi[z], 0.0);
    wf[z] = fwd[z] * m;
    wb[z] = bwd[z] * m;
  }
  const DualSolution d = solve_dual(kind, wf, wb, v);
  return {d.value, d.grad_inf, d.converged};
}

}  // namespace

VariationalResult cost_variational(const RateModel& model, const SampledPath& path, int z_max,
                                   EdgeKind kind) {
  require_kind(model, kind);
  VariationalResult res;
  const std::size_t n = static_cast<std::size_t>(z_max) + 1;
  const std::size_t intervals = path.times.size() - 1;
  if (path.times.size() < 2) return res;
  std::vector<std::vector<double>> vel(intervals, std::vector<double>(n));
  for (std::size_t i = 0; i < intervals; ++i) {
    const double h = path.times[i + 1] - path.times[i];
    if (!(h > 0.0)) throw Error(Reason::invalid_argument, "path times must increase");
    for (std::size_t z = 0; z < n; ++z) vel[i][z] = (path.states[i + 1][z] - path.states[i][z]) / h;
  }
  auto eval = [&](std::size_t i, double frac) {
    std::vector<double> phi(n);
    for (std::size_t z = 0; z < n; ++z)
      phi[z] = path.states[i][z] + frac * (path.states[i + 1][z] - path.states[i][z]);
    const Integrand r = variational_integrand(model, kind, phi, vel[i]);
    res.max_gradient = std::max(res.max_gradient, r.grad);
    if (!r.converged) res.converged = false;
    return r.value;
  };
  // Per-interval trapezoid sums; each level halves the spacing.
  std::vector<double> sums(intervals);
  for (std::size_t i = 0; i < intervals; ++i)
    sums[i] = 0.5 * (eval(i, 0.0) + eval(i, 1.0));  // scaled by h later
  auto total_at = [&](int m) {
    double s = 0.0;
    for (std::size_t i = 0; i < intervals; ++i) s += sums[i] * (path.times[i + 1] - path.times[i]) / m;
    return s;
  };
  int m = 1;
  double prev = total_at(m);
  for (int level = 0; level < 10; ++level) {
    for (std::size_t i = 0; i < intervals; ++i)
      for (int j = 0; j < m; ++j) sums[i] += eval(i, (j + 0.5) / m);
    m *= 2;
    const double cur = total_at(m);
    res.refinements = level + 1;
    const double change = std::fabs(cur - prev);
    prev = cur;
    if (change < 1e-6) {
      res.value = ExtReal(std::max(cur, 0.0));
      return res;
    }
  }
  res.converged = false;
  res.value = ExtReal(std::max(prev, 0.0));
  return res;
}

namespace {

// Geometric mean over the piece of the edge weight lambda(field) * phi(source).
double mean_log_rate(const RateModel& model, bool forward, int z, double f0, double f1) {
  if (!model.interacting()) {
    const double r = forward ? model.forward_rate(z, f0) : model.backward_rate(z, f0);
    return std::log(r);
  }
  static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                  0.9061798459386640};
  static const double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
  double s = 0.0;
  for (int k = 0; k < 5; ++k) {
    const double field = f0 + 0.5 * (1.0 + nodes[k]) * (f1 - f0);
    const double r = forward ? model.forward_rate(z, field) : model.backward_rate(z, field);
    s += 0.5 * weights[k] * std::log(r);
  }
  return s;
}

// Dual-optimal constant fluxes for one piece of an affine interval.
Segment recover_piece(const RateModel& model, EdgeKind kind, const std::vector<double>& a,
                      const std::vector<double>& e, const std::vector<double>& v, double h) {
  const std::size_t n = a.size();
  const int z_max = static_cast<int>(n) - 1;
  std::vector<double> wf(n, 0.0), wb(n, 0.0);
  for (int z = 0; z <= z_max; ++z) {
    const double s = std::max(a[static_cast<std::size_t>(z)], 0.0);
    const double t = std::max(e[static_cast<std::size_t>(z)], 0.0);
    if (s == 0.0 && t == 0.0) continue;
    const double mean_log_phi = integral_log(s, t, h) / h;
    if (z < z_max) wf[z] = std::exp(mean_log_phi + mean_log_rate(model, true, z, a[0], e[0]));
    if (z > 0) wb[z] = std::exp(mean_log_phi + mean_log_rate(model, false, z, a[0], e[0]));
  }
  const DualSolution d = solve_dual(kind, wf, wb, v);
  if (!d.converged && d.grad_inf > 1e-8)
    throw Error(Reason::infeasible_trajectory,
                "flux recovery did not converge (gradient " + format_real(d.grad_inf) + ")");
  Segment seg;
  seg.duration = h;
  seg.fwd = d.flux_fwd;
  seg.bwd = d.flux_bwd;
  seg.fwd.back() = 0.0;
  seg.bwd.front() = 0.0;
  return seg;
}

}  // namespace

FluxTrajectory flux_from_path(const RateModel& model, const SampledPath& path,
                              const StateDistribution& initial, EdgeKind kind) {
  require_kind(model, kind);
  const std::size_t n = initial.size();
  FluxTrajectory out(initial, kind);
  for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
    const double D = path.times[i + 1] - path.times[i];
    std::vector<double> v(n);
    for (std::size_t z = 0; z < n; ++z) v[z] = (path.states[i + 1][z] - path.states[i][z]) / D;
    std::vector<Segment> best;
    double prev_cost = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= 256; m *= 2) {
      std::vector<Segment> pieces;
      FluxTrajectory probe(StateDistribution::from_weights(path.states[i]), kind);
      for (int j = 0; j < m; ++j) {
        std::vector<double> a(n), e(n);
        for (std::size_t z = 0; z < n; ++z) {
          a[z] = path.states[i][z] + v[z] * (D * j / m);
          e[z] = path.states[i][z] + v[z] * (D * (j + 1) / m);
        }
        pieces.push_back(recover_piece(model, kind, a, e, v, D / m));
      }
      for (const auto& p : pieces) probe.append(p);
      const ExtReal c = cost_nonvariational(model, probe);
      const double cv = c.as_double();
      best = std::move(pieces);
      if (std::fabs(cv - prev_cost) < 1e-8) break;
      prev_cost = cv;
    }
    for (auto& p : best) out.append(std::move(p));
  }
  return out;
}

FluxTrajectory concatenate(const FluxTrajectory& a, const FluxTrajectory& b) {
  if (a.edge_kind() != b.edge_kind() || a.z_max() != b.z_max())
    throw Error(Reason::endpoint_mismatch, "trajectories live on different edge sets");
  const StateDistribution end = terminal_state(a);
  const double gap = tv_distance(end, b.initial());
  if (gap > 1e-9) throw Error(Reason::endpoint_mismatch, "terminal/initial gap " + format_real(gap));
  FluxTrajectory out = a;
  for (const auto& s : b.segments()) out.append(s);
  return out;
}

double tent_linear(int z, int n) {
  if (z <= n) return z;
  if (z <= 2 * n) return 2 * n - z;
  return 0.0;
}

double tent_theta(int z, int n) {
  if (z <= n) return theta_fn(z);
  if (z <= 2 * n) return theta_fn(2 * n - z);
  return 0.0;
}

double testfunction_lower_bound(const RateModel& model, const StateDistribution& start,
                                const StateDistribution& target, double T, int n, TestFunction kind) {
  if (n < 1) throw Error(Reason::invalid_argument, "n must be >= 1");
  if (!(T > 0.0)) throw Error(Reason::invalid_argument, "T must be > 0");
  const double lam = model.lambda_upper();
  auto pair = [&](const StateDistribution& d, auto fn) {
    double s = 0.0;
    for (int z = 0; z <= d.z_max(); ++z) s += d[z] * fn(z, n);
    return s;
  };
  if (kind == TestFunction::linear_fn)
    return pair(target, tent_linear) - pair(start, tent_linear) - 2.0 * (kE - 1.0) * lam * T;
  // Path first-moment cap from the linear bound, then solve the resulting affine inequality in S.
  const ExtReal m_start = first_moment(start);
  if (m_start.is_infinite()) return -std::numeric_limits<double>::infinity();
  const double m0 = m_start.value() + 2.0 * (kE - 1.0) * lam * T;
  const double gain = pair(target, tent_theta) - pair(start, tent_theta);
  return (gain - 2.0 * lam * T * (kE * (m0 + 1.0) - 1.0)) / (1.0 + 2.0 * kE * lam * T);
}

MomentCheck moment_inequality(const RateModel& model, const FluxTrajectory& traj) {
  MomentCheck mc;
  const SampledPath path = evolve(traj);
  const std::vector<double> w = theta_weights(traj.initial().size());
  double sup = 0.0;
  for (const auto& s : path.states) sup = std::max(sup, kernels::dot(s.data(), w.data(), s.size()));
  const double start = kernels::dot(path.states.front().data(), w.data(), w.size());
  const ExtReal S = cost_nonvariational(model, traj);
  mc.lhs = sup;
  if (S.is_infinite()) {
    mc.rhs = std::numeric_limits<double>::infinity();
    return mc;
  }
  mc.rhs = start + S.value() + 1e-9 + model.lambda_upper() * (kE - 1.0) * traj.duration();
  mc.holds = mc.lhs <= mc.rhs;
  return mc;
}

bool moment_inequality_check(const RateModel& model, const FluxTrajectory& traj) {
  if (!model.bounds_declared() || model.edge_kind() != EdgeKind::chain_with_resets)
    throw Error(Reason::missing_bounds, "moment inequality needs an A1-A2 model");
  return moment_inequality(model, traj).holds;
}

FluxTrajectory mve_flux_trajectory(const RateModel& model, const StateDistribution& nu, double T,
                                   double dt_max) {
  if (!(T > 0.0) || !(dt_max > 0.0)) throw Error(Reason::invalid_argument, "T and dt_max must be > 0");
  const EdgeKind kind = model.edge_kind();
  FluxTrajectory traj(nu, kind);
  const std::size_t n = nu.size();
  const int z_max = nu.z_max();
  std::vector<double> y = nu.probs();
  std::vector<double> fwd(n), bwd(n), ef(n), eb(n), sf(n), sb(n), net(n), stage(n);
  auto flows = [&](const std::vector<double>& s, double weight) {
    model.fill_rates(std::max(s[0], 0.0), z_max, fwd.data(), bwd.data());
    for (std::size_t z = 0; z < n; ++z) {
      const double m = std::max(s[z], 0.0);
      ef[z] = fwd[z] * m;
      eb[z] = bwd[z] * m;
      sf[z] += weight * ef[z];
      sb[z] += weight * eb[z];
    }
    net_flow(kind, ef, eb, net);
  };
  double t = 0.0;
  while (T - t > 1e-14 * T) {
    const double h = std::min({dt_max, T - t, dt_max / 64.0 + 0.25 * t});
    std::fill(sf.begin(), sf.end(), 0.0);
    std::fill(sb.begin(), sb.end(), 0.0);
    flows(y, 1.0);
    for (std::size_t z = 0; z < n; ++z) stage[z] = y[z] + 0.5 * h * net[z];
    flows(stage, 2.0);
    for (std::size_t z = 0; z < n; ++z) stage[z] = y[z] + 0.5 * h * net[z];
    flows(stage, 2.0);
    for (std::size_t z = 0; z < n; ++z) stage[z] = y[z] + h * net[z];
    flows(stage, 1.0);
    Segment seg = traj.blank_segment(h);
    for (std::size_t z = 0; z < n; ++z) {
      seg.fwd[z] = sf[z] / 6.0;
      seg.bwd[z] = sb[z] / 6.0;
    }
    seg.fwd.back() = 0.0;
    seg.bwd.front() = 0.0;
    net_flow(kind, seg.fwd, seg.bwd, net);
    for (std::size_t z = 0; z < n; ++z) y[z] = std::max(0.0, y[z] + h * net[z]);
    traj.append(std::move(seg));
    t += h;
  }
  return traj;
}

void write_flux_trajectory(std::ostream& os, const FluxTrajectory& traj) {
  os << "z_max,n_segments,edge_kind\n";
  os << traj.z_max() << ',' << traj.segments().size() << ',' << kind_name(traj.edge_kind()) << '\n';
  os << "initial";
  for (double p : traj.initial().probs()) os << ',' << format_real(p);
  os << '\n';
  if (traj.initial().tail_mass() > 0.0) os << "initial_tail," << format_real(traj.initial().tail_mass()) << '\n';
  for (const auto& s : traj.segments()) {
    os << "duration," << format_real(s.duration) << '\n';
    for (int z = 0; z < traj.z_max(); ++z)
      if (s.fwd[static_cast<std::size_t>(z)] != 0.0)
        os << z << ',' << z + 1 << ',' << format_real(s.fwd[static_cast<std::size_t>(z)]) << '\n';
    for (int z = 1; z <= traj.z_max(); ++z)
      if (s.bwd[static_cast<std::size_t>(z)] != 0.0)
        os << z << ',' << (traj.edge_kind() == EdgeKind::birth_death ? z - 1 : 0) << ','
           << format_real(s.bwd[static_cast<std::size_t>(z)]) << '\n';
  }
}

FluxTrajectory read_flux_trajectory(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
  };
  auto num = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw Error(Reason::io, "bad number '" + s + "'");
    }
    if (used != s.size()) throw Error(Reason::io, "bad number '" + s + "'");
    return v;
  };
  std::string line;
  if (!std::getline(is, line) || line != "z_max,n_segments,edge_kind")
    throw Error(Reason::io, "missing flux trajectory header");
  if (!std::getline(is, line)) throw Error(Reason::io, "missing header values");
  const auto head = split(line);
  if (head.size() != 3) throw Error(Reason::io, "bad header values");
  const int z_max = static_cast<int>(num(head[0]));
  const long n_seg = static_cast<long>(num(head[1]));
  EdgeKind kind;
  if (head[2] == "birth_death")
    kind = EdgeKind::birth_death;
  else if (head[2] == "chain_with_resets")
    kind = EdgeKind::chain_with_resets;
  else
    throw Error(Reason::io, "unknown edge kind " + head[2]);
  if (!std::getline(is, line)) throw Error(Reason::io, "missing initial row");
  const auto init = split(line);
  if (init.empty() || init[0] != "initial" || static_cast<int>(init.size()) != z_max + 2)
    throw Error(Reason::io, "bad initial row");
  std::vector<double> p;
  for (std::size_t i = 1; i < init.size(); ++i) p.push_back(num(init[i]));
  double tail = 0.0;
  std::vector<std::string> pending;
  bool have_pending = false;
  if (std::getline(is, line)) {
    auto f = split(line);
    if (!f.empty() && f[0] == "initial_tail") {
      tail = num(f.at(1));
    } else {
      pending = f;
      have_pending = true;
    }
  }
  FluxTrajectory traj(StateDistribution(std::move(p), tail), kind);
  Segment cur;
  bool open = false;
  auto flush = [&]() {
    if (open) traj.append(std::move(cur));
    open = false;
  };
  auto handle = [&](const std::vector<std::string>& f) {
    if (f.size() == 2 && f[0] == "duration") {
      flush();
      cur = traj.blank_segment(num(f[1]));
      open = true;
      return;
    }
    if (f.size() != 3 || !open) throw Error(Reason::io, "bad segment row");
    const int z = static_cast<int>(num(f[0]));
    const int zp = static_cast<int>(num(f[1]));
    const double flux = num(f[2]);
    if (z < 0 || z > z_max) throw Error(Reason::io, "edge outside truncation");
    if (zp == z + 1 && z < z_max)
      cur.fwd[static_cast<std::size_t>(z)] = flux;
    else if (z >= 1 && zp == (kind == EdgeKind::birth_death ? z - 1 : 0))
      cur.bwd[static_cast<std::size_t>(z)] = flux;
    else
      throw Error(Reason::io, "edge not in edge set");
  };
  if (have_pending) handle(pending);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    handle(split(line));
  }
  flush();
  if (static_cast<long>(traj.segments().size()) != n_seg) throw Error(Reason::io, "segment count mismatch");
  return traj;
}

}  // namespace mfqp
