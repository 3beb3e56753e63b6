#include "mfqp/models.hpp"

#include <algorithm>
#include <cmath>

#include "mfqp/kernels.hpp"
#include "mfqp/rng.hpp"

namespace mfqp {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(Reason::invalid_argument, std::string(what) + " must be positive");
}

}  // namespace

std::vector<Edge> enumerate_edges(EdgeKind kind, int z_max) {
  std::vector<Edge> edges;
  for (int z = 0; z < z_max; ++z) edges.push_back({z, z + 1});
  for (int z = 1; z <= z_max; ++z) edges.push_back({z, kind == EdgeKind::birth_death ? z - 1 : 0});
  return edges;
}

double RateModel::forward_rate(int z, double xi0) const {
  switch (family_) {
    case Family::mm1:
    case Family::wlan_const:
      return lf_;
    case Family::wlan_decay:
      return lf_ / (z + 1);
    case Family::interacting_wlan:
      return (1.0 + kappa_ * xi0) / (z + 1);
  }
  return 0.0;
}

double RateModel::backward_rate(int /*z*/, double xi0) const {
  if (family_ == Family::interacting_wlan) return 1.0 + kappa_ * (1.0 - xi0);
  return lb_;
}

double RateModel::rate(int z, int z_prime, const StateDistribution& xi) const {
  const double xi0 = xi[0];
  if (z >= 0 && z_prime == z + 1) return forward_rate(z, xi0);
  if (z >= 1 && z_prime == backward_target(z)) return backward_rate(z, xi0);
  throw Error(Reason::edge_not_present,
              "(" + std::to_string(z) + "," + std::to_string(z_prime) + ") in " + name_);
}

void RateModel::fill_rates(double xi0, int z_max, double* fwd, double* bwd) const {
  for (int z = 0; z <= z_max; ++z) {
    fwd[z] = z < z_max ? forward_rate(z, xi0) : 0.0;
    bwd[z] = z > 0 ? backward_rate(z, xi0) : 0.0;
  }
}

RateModel mm1_model(double lambda_f, double lambda_b) {
  require_positive(lambda_f, "lambda_f");
  require_positive(lambda_b, "lambda_b");
  RateModel m;
  m.kind_ = EdgeKind::birth_death;
  m.family_ = RateModel::Family::mm1;
  m.name_ = "mm1";
  m.lf_ = lambda_f;
  m.lb_ = lambda_b;
  m.upper_ = std::max(lambda_f, lambda_b);
  m.lower_ = std::min(lambda_f, lambda_b);
  return m;
}

RateModel wlan_const_model(double lambda_f, double lambda_b) {
  require_positive(lambda_f, "lambda_f");
  require_positive(lambda_b, "lambda_b");
  RateModel m;
  m.kind_ = EdgeKind::chain_with_resets;
  m.family_ = RateModel::Family::wlan_const;
  m.name_ = "wlan_const";
  m.lf_ = lambda_f;
  m.lb_ = lambda_b;
  m.upper_ = std::max(lambda_f, lambda_b);
  m.lower_ = std::min(lambda_f, lambda_b);
  return m;
}

RateModel wlan_decay_model(double lambda_f, double lambda_b) {
  RateModel m = wlan_const_model(lambda_f, lambda_b);
  m.family_ = RateModel::Family::wlan_decay;
  m.name_ = "wlan_decay";
  m.bounds_declared_ = true;
  return m;
}

RateModel interacting_wlan_model(double kappa) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw Error(Reason::invalid_argument, "kappa must be in [0,1)");
  RateModel m;
  m.kind_ = EdgeKind::chain_with_resets;
  m.family_ = RateModel::Family::interacting_wlan;
  m.name_ = "interacting_wlan";
  m.kappa_ = kappa;
  m.upper_ = 1.0 + kappa;
  m.lower_ = 1.0;
  m.bounds_declared_ = true;
  return m;
}

RateModel dominating_chain(const RateModel& model) {
  if (model.edge_kind() != EdgeKind::chain_with_resets)
    throw Error(Reason::invalid_argument, model.name() + " does not have the chain-with-resets edge set");
  if (!model.bounds_declared())
    throw Error(Reason::missing_bounds, model.name() + " has no declared A2 bounds");
  RateModel d = wlan_decay_model(model.lambda_upper(), model.lambda_lower());
  d.name_ = "dominating(" + model.name() + ")";
  return d;
}

double stationarity_residual(const RateModel& model, const StateDistribution& pi,
                             const StateDistribution& field) {
  const int n = pi.z_max() + 1;
  std::vector<double> fwd(n), bwd(n), out(n);
  model.fill_rates(field[0], pi.z_max(), fwd.data(), bwd.data());
  if (model.edge_kind() == EdgeKind::birth_death)
    kernels::drift_birth_death(pi.data(), fwd.data(), bwd.data(), out.data(), n);
  else
    kernels::drift_resets(pi.data(), fwd.data(), bwd.data(), out.data(), n);
  double s = 0.0;
  for (double x : out) s += std::fabs(x);
  return s;
}

StateDistribution single_particle_stationary(const RateModel& model, int z_max,
                                             const StateDistribution& frozen_field) {
  if (z_max < 1) throw Error(Reason::invalid_argument, "z_max must be >= 1");
  if (model.family() == RateModel::Family::mm1 && model.lambda_f() >= model.lambda_b())
    throw Error(Reason::instability, "mm1 with lambda_f >= lambda_b has no stationary law");
  const int n = z_max + 1;
  std::vector<double> fwd(n), bwd(n);
  model.fill_rates(frozen_field[0], z_max, fwd.data(), bwd.data());
  // Balance solved state by state so tiny entries keep full relative accuracy.
  // Birth-death: detailed balance across each edge. Resets: the only inflow to z >= 1
  // comes from z - 1, so pi(z) (fwd + bwd) = pi(z - 1) fwd(z - 1).
  std::vector<double> p(static_cast<std::size_t>(n));
  p[0] = 1.0;
  for (int z = 1; z < n; ++z) {
    const double out = model.edge_kind() == EdgeKind::birth_death ? bwd[z] : fwd[z] + bwd[z];
    if (!(out > 0.0)) throw Error(Reason::absorbing_state, "state " + std::to_string(z) + " has no way out");
    p[z] = p[z - 1] * fwd[z - 1] / out;
  }
  double s = 0.0;
  for (double v : p) s += v;
  for (auto& v : p) v /= s;
  return StateDistribution(std::move(p));
}

StateDistribution single_particle_stationary(const RateModel& model, int z_max) {
  if (model.interacting())
    throw Error(Reason::interacting_model, "interacting model needs a frozen field");
  return single_particle_stationary(model, z_max, StateDistribution::point_mass(0, z_max));
}

A2Report verify_A2(const RateModel& model, const std::vector<StateDistribution>& samples) {
  A2Report rep;
  if (samples.empty()) throw Error(Reason::invalid_argument, "verify_A2 needs samples");
  if (model.edge_kind() != EdgeKind::chain_with_resets) {
    rep.pass = false;
    rep.first_violation = "edge set is not chain-with-resets";
    return rep;
  }
  const double lo = model.lambda_lower();
  const double hi = model.lambda_upper();
  const double slack = 1e-12;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& xi = samples[s];
    for (int z = 0; z <= xi.z_max(); ++z) {
      const double f = model.rate(z, z + 1, xi) * (z + 1);
      if (f < lo * (1 - slack) || f > hi * (1 + slack)) {
        rep.pass = false;
        rep.first_violation = "sample " + std::to_string(s) + " forward edge (" + std::to_string(z) +
                              "," + std::to_string(z + 1) + ") scaled rate " + format_real(f);
        return rep;
      }
      if (z >= 1) {
        const double r = model.rate(z, 0, xi);
        if (r < lo * (1 - slack) || r > hi * (1 + slack)) {
          rep.pass = false;
          rep.first_violation = "sample " + std::to_string(s) + " reset edge (" + std::to_string(z) +
                                ",0) rate " + format_real(r);
          return rep;
        }
      }
    }
  }
  return rep;
}

StateDistribution random_distribution(int z_max, Philox4x32& rng) {
  std::vector<double> w(static_cast<std::size_t>(z_max) + 1, 0.0);
  const int support = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(z_max) + 1));
  for (int k = 0; k < support; ++k) w[rng.below(w.size())] += rng.exponential();
  return StateDistribution::from_weights(std::move(w));
}

double lipschitz_estimate(const RateModel& model, int trials, std::uint64_t rng_seed) {
  if (trials < 1) throw Error(Reason::invalid_argument, "trials must be >= 1");
  constexpr int kZmax = 20;
  Philox4x32 rng(rng_seed, 0);
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    StateDistribution xi = random_distribution(kZmax, rng);
    StateDistribution zeta = random_distribution(kZmax, rng);
    if (t % 2 == 1) zeta = mixture(xi, zeta, 1.0 - rng.uniform() * 1e-3);
    const double d = tv_distance(xi, zeta);
    if (d <= 0.0) continue;
    for (int z = 0; z <= kZmax; ++z) {
      const double df = std::fabs((z + 1) * (model.rate(z, z + 1, xi) - model.rate(z, z + 1, zeta)));
      best = std::max(best, df / d);
      if (z >= 1) {
        const int zp = model.backward_target(z);
        const double db = std::fabs(model.rate(z, zp, xi) - model.rate(z, zp, zeta));
        best = std::max(best, db / d);
      }
    }
  }
  return best;
}

double mm1_stationary_closed_form(double lambda_f, double lambda_b, int z) {
  const double r = lambda_f / lambda_b;
  return (1.0 - r) * std::pow(r, z);
}

double wlan_const_stationary_closed_form(double lambda_f, double lambda_b, int z) {
  const double s = lambda_f + lambda_b;
  return (lambda_b / s) * std::pow(lambda_f / s, z);
}

}  // namespace mfqp
