#include <cmath>

#include "doctest.h"
#include "mfqp/models.hpp"
#include "mfqp/rng.hpp"
#include "oracle_values.hpp"

using namespace mfqp;

namespace {

Reason reason_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.reason();
  }
  FAIL("expected an Error");
  return Reason::io;
}

std::vector<StateDistribution> random_fields(int n, std::uint64_t seed) {
  Philox4x32 rng(seed, 0);
  std::vector<StateDistribution> out;
  for (int i = 0; i < n; ++i) out.push_back(random_distribution(30, rng));
  return out;
}

}  // namespace

TEST_CASE("edge enumeration") {
  const auto r = enumerate_edges(EdgeKind::chain_with_resets, 3);
  CHECK(r == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {1, 0}, {2, 0}, {3, 0}});
  const auto b = enumerate_edges(EdgeKind::birth_death, 3);
  CHECK(b == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {1, 0}, {2, 1}, {3, 2}});
}

TEST_CASE("builtin rates") {
  const auto d0 = StateDistribution::point_mass(0, 10);
  const auto d5 = StateDistribution::point_mass(5, 10);
  const auto q = mm1_model(1, 2);
  CHECK(q.rate(0, 1, d0) == 1.0);
  CHECK(q.rate(3, 2, d0) == 2.0);
  CHECK(reason_of([&] { q.rate(0, -1, d0); }) == Reason::edge_not_present);
  const auto w = wlan_const_model(1, 1);
  CHECK(w.rate(5, 6, d0) == 1.0);
  CHECK(w.rate(5, 0, d0) == 1.0);
  CHECK(reason_of([&] { w.rate(0, 0, d0); }) == Reason::edge_not_present);
  CHECK(wlan_decay_model(1, 1).rate(0, 1, d0) == 1.0);
  CHECK(wlan_decay_model(2, 1).rate(3, 4, d0) == 0.5);
  const auto k = interacting_wlan_model(0.5);
  CHECK(k.rate(0, 1, d0) == 1.5);
  CHECK(k.rate(2, 0, d5) == 1.5);
  CHECK(reason_of([] { mm1_model(0, 1); }) == Reason::invalid_argument);
  CHECK(reason_of([] { interacting_wlan_model(1.0); }) == Reason::invalid_argument);
}

TEST_CASE("zero interaction reduces to the decaying model") {
  const auto k = interacting_wlan_model(0.0);
  const auto w = wlan_decay_model(1, 1);
  CHECK_FALSE(k.interacting());
  for (const auto& xi : random_fields(20, 9))
    for (int z = 0; z < 30; ++z) {
      CHECK(k.rate(z, z + 1, xi) == w.rate(z, z + 1, xi));
      if (z > 0) CHECK(k.rate(z, 0, xi) == w.rate(z, 0, xi));
    }
}

TEST_CASE("dominating chain") {
  const auto k = interacting_wlan_model(0.5);
  const auto d = dominating_chain(k);
  const auto d0 = StateDistribution::point_mass(0, 10);
  CHECK_FALSE(d.interacting());
  CHECK(d.rate(3, 4, d0) == doctest::Approx(1.5 / 4));
  CHECK(d.rate(3, 0, d0) == 1.0);
  const auto w = wlan_decay_model(1, 1);
  const auto dw = dominating_chain(w);
  CHECK(dw.rate(4, 5, d0) == w.rate(4, 5, d0));
  CHECK(dw.rate(4, 0, d0) == w.rate(4, 0, d0));
  CHECK(reason_of([] { dominating_chain(mm1_model(1, 2)); }) == Reason::invalid_argument);
  CHECK(reason_of([] { dominating_chain(wlan_const_model(1, 1)); }) == Reason::missing_bounds);
  for (const auto& xi : random_fields(50, 10))
    for (int z = 0; z < 30; ++z) {
      CHECK(d.rate(z, z + 1, xi) >= k.rate(z, z + 1, xi));
      if (z > 0) CHECK(d.rate(z, 0, xi) <= k.rate(z, 0, xi));
    }
}

TEST_CASE("closed-form stationary laws") {
  const auto q = single_particle_stationary(mm1_model(1, 2), 60);
  const auto w = single_particle_stationary(wlan_const_model(1, 1), 60);
  // On the truncation both laws are the geometric closed form renormalized by 1 - 2^-61.
  const double norm = 1.0 - std::pow(0.5, 61);
  for (int z = 0; z <= 60; ++z) {
    CHECK(std::fabs(q[z] - mm1_stationary_closed_form(1, 2, z) / norm) < 1e-12);
    CHECK(std::fabs(w[z] - wlan_const_stationary_closed_form(1, 1, z) / norm) < 1e-12);
    CHECK(std::fabs(q[z] - std::pow(0.5, z + 1)) < 1e-12);
  }
  const auto q2 = single_particle_stationary(mm1_model(1, 3), 60);
  for (int z = 0; z <= 60; ++z) CHECK(std::fabs(q2[z] - mm1_stationary_closed_form(1, 3, z)) < 1e-12);
  CHECK(reason_of([] { single_particle_stationary(mm1_model(2, 2), 20); }) == Reason::instability);
  CHECK(reason_of([] { single_particle_stationary(interacting_wlan_model(0.5), 20); }) ==
        Reason::interacting_model);
}

TEST_CASE("decaying model stationary law") {
  const auto pi = single_particle_stationary(wlan_decay_model(1, 1), 40);
  for (int z = 0; z <= 40; ++z) {
    CHECK(pi[z] == doctest::Approx(oracle::kWlanDecayStationary[z]).epsilon(1e-10).scale(0));
    CHECK(pi[z] <= pi[0] / std::tgamma(z + 1.0) * (1 + 1e-12));
  }
  const auto pi21 = single_particle_stationary(wlan_decay_model(2, 1), 30);
  for (int z = 0; z <= 30; ++z) {
    CHECK(pi21[z] == doctest::Approx(oracle::kWlanDecay21Stationary[z]).epsilon(1e-10).scale(0));
    CHECK(pi21[z] <= pi21[0] * std::pow(2.0, z) / std::tgamma(z + 1.0) * (1 + 1e-12));
  }
}

TEST_CASE("stationarity residual of the balance solver") {
  for (const auto& m : {mm1_model(1, 2), wlan_const_model(1, 1), wlan_decay_model(1, 1), wlan_decay_model(3, 0.5)}) {
    const auto pi = single_particle_stationary(m, 40);
    CHECK(stationarity_residual(m, pi, pi) < 1e-10);
  }
}

TEST_CASE("A2 verification") {
  const auto fields = random_fields(100, 11);
  CHECK(verify_A2(interacting_wlan_model(0.5), fields).pass);
  CHECK(verify_A2(wlan_decay_model(1, 1), fields).pass);
  const auto r = verify_A2(wlan_const_model(1, 1), fields);
  CHECK_FALSE(r.pass);
  CHECK_FALSE(r.first_violation.empty());
  CHECK_FALSE(verify_A2(mm1_model(1, 2), fields).pass);
}

TEST_CASE("lipschitz estimates") {
  CHECK(lipschitz_estimate(wlan_const_model(1, 1), 200, 1) == 0.0);
  CHECK(lipschitz_estimate(interacting_wlan_model(0.0), 200, 1) == 0.0);
  const double L = lipschitz_estimate(interacting_wlan_model(0.5), 500, 1);
  CHECK(L > 0.0);
  CHECK(L <= 1.0 + 1e-9);
}
