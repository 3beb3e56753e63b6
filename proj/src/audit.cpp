#include "mfqp/audit.hpp"

#include <algorithm>

namespace mfqp {

FluxTrajectory random_flux_trajectory(EdgeKind kind, int z_max, Philox4x32& rng, double max_duration) {
  std::vector<double> w(static_cast<std::size_t>(z_max) + 1);
  for (auto& x : w) x = 0.2 + rng.uniform();
  const auto init = StateDistribution::from_weights(w);
  FluxTrajectory tr(init, kind);
  std::vector<double> cur = init.probs();
  const int segments = 1 + static_cast<int>(rng.below(4));
  for (int k = 0; k < segments; ++k) {
    const double d = (max_duration / segments) * (0.1 + 0.9 * rng.uniform());
    auto s = tr.blank_segment(d);
    for (int z = 0; z <= z_max; ++z) {
      const auto i = static_cast<std::size_t>(z);
      if (z < z_max) s.fwd[i] = rng.uniform() * 0.25 * cur[i] / d;
      if (z > 0) s.bwd[i] = rng.uniform() * 0.25 * cur[i] / d;
    }
    tr.append(s);
    cur = evolve(tr).states.back();
  }
  return tr;
}

StateDistribution random_in_KM(int z_max, double M, Philox4x32& rng) {
  std::vector<double> w(static_cast<std::size_t>(z_max) + 1, 0.0);
  const int hi = std::min(z_max, 12);
  const int atoms = 1 + static_cast<int>(rng.below(4));
  for (int a = 0; a < atoms; ++a) w[rng.below(static_cast<std::uint64_t>(hi) + 1)] += rng.exponential();
  auto nu = StateDistribution::from_weights(w);
  const double th = theta_moment(nu).value();
  if (th > M) nu = mixture(nu, StateDistribution::point_mass(0, z_max), M / th);
  // Drop the last-bit drift so the target carries no tail.
  return StateDistribution::from_weights(nu.probs());
}

}  // namespace mfqp
