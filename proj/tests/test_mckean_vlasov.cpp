#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mfqp/mckean_vlasov.hpp"
#include "oracle_values.hpp"

using namespace mfqp;

namespace {

double total_mass(const StateDistribution& d) {
  double s = d.tail_mass();
  for (double x : d.probs()) s += x;
  return s;
}

}  // namespace

TEST_CASE("equilibrium is a fixed point of the flow") {
  for (const auto& m : {wlan_decay_model(1, 1), interacting_wlan_model(0.5), mm1_model(1, 2)}) {
    const auto xs = find_equilibrium(m, 40, 1e-12);
    const auto p = integrate(m, xs, 5.0, 1e-11);
    for (const auto& s : p.states) CHECK(tv_distance(s, xs) < 1e-8);
    // One short step moves the state by at most tol * dt * 10.
    const double dt = 1e-3;
    CHECK(tv_distance(integrate(m, xs, dt, 1e-13).states.back(), xs) < 1e-12 * dt * 10);
  }
}

TEST_CASE("constant-rate chain relaxes to the geometric law") {
  const auto m = wlan_const_model(1, 1);
  const auto p = integrate(m, StateDistribution::point_mass(0, 60), 40.0, 1e-11);
  CHECK(p.times.back() == 40.0);
  const auto& last = p.states.back();
  for (int z = 0; z <= 60; ++z) CHECK(std::fabs(last[z] - std::pow(0.5, z + 1)) < 1e-6);
  for (std::size_t k = 1; k < p.times.size(); ++k) CHECK(p.times[k] > p.times[k - 1]);
  for (const auto& s : p.states) CHECK(std::fabs(total_mass(s) - 1.0) < 1e-10);
}

TEST_CASE("interacting equilibrium matches the independent fixed point") {
  const auto m = interacting_wlan_model(0.5);
  const auto xs = find_equilibrium(m, 40, 1e-12);
  CHECK(stationarity_residual(m, xs, xs) < 1e-10);
  for (int z = 0; z <= 40; ++z)
    CHECK(xs[z] == doctest::Approx(oracle::kInteracting05Stationary[z]).epsilon(1e-9).scale(0));
  CHECK(theta_moment(xs).value() == doctest::Approx(oracle::kInteractingThetaMoment).epsilon(1e-10));
  // Cross-check against the long-run flow from delta_0.
  const auto flow = integrate(m, StateDistribution::point_mass(0, 40), 60.0, 1e-11).states.back();
  CHECK(tv_distance(flow, xs) < 1e-8);
  // A different relaxation start lands on the same point.
  const auto other = find_equilibrium(m, 40, 1e-12, StateDistribution::point_mass(7, 40));
  CHECK(tv_distance(other, xs) < 1e-8);
  const auto m3 = interacting_wlan_model(0.3);
  const auto x3 = find_equilibrium(m3, 25, 1e-12);
  for (int z = 0; z <= 25; ++z)
    CHECK(x3[z] == doctest::Approx(oracle::kInteracting03Stationary[z]).epsilon(1e-9).scale(0));
}

TEST_CASE("non-interacting equilibrium is the stationary law") {
  const auto m = wlan_decay_model(2, 1);
  const auto a = find_equilibrium(m, 30, 1e-12);
  const auto b = single_particle_stationary(m, 30);
  CHECK(a.probs() == b.probs());
}

TEST_CASE("B2 audit") {
  const auto k = interacting_wlan_model(0.5);
  const auto rep = check_B2(k, 5.0, 40.0, 6, 3);
  CHECK(rep.pass);
  CHECK(rep.terminal_gap < 1e-3);
  CHECK(rep.grid.size() == rep.sup_gap.size());
  const auto rep2 = check_B2(wlan_decay_model(1, 1), 5.0, 40.0, 6, 4);
  CHECK(rep2.terminal_gap < 1e-3);
  for (const auto& nu : rep.initials) CHECK(in_class_KM(nu, 5.0 + 1e-12));
  // Starting at the equilibrium gives a zero gap throughout.
  const auto xs = find_equilibrium(k, 40, 1e-12);
  const auto rep3 = check_B2_from(k, {xs}, 10.0);
  for (double g : rep3.sup_gap) CHECK(g < 1e-9);
}

TEST_CASE("B2 audit is independent of the thread count") {
  const auto k = interacting_wlan_model(0.5);
  const auto a = check_B2(k, 5.0, 10.0, 4, 8, 30, 1e-3, 1);
  const auto b = check_B2(k, 5.0, 10.0, 4, 8, 30, 1e-3, 4);
  CHECK(a.sup_gap == b.sup_gap);
}

TEST_CASE("time to K(delta)") {
  const auto m = wlan_const_model(1, 1);
  const auto d0 = StateDistribution::point_mass(0, 40);
  const auto xs = find_equilibrium(m, 40, 1e-12);
  CHECK(time_to_KDelta(m, xs, 0.05).value() == 0.0);
  const auto t1 = time_to_KDelta(m, d0, 0.05);
  CHECK(t1.is_finite());
  const auto t2 = time_to_KDelta(m, d0, 0.01);
  CHECK(t2.is_finite());
  CHECK(t2.value() >= t1.value());
  CHECK(time_to_KDelta(m, d0, 1e-3, 0.5).is_infinite());
}

TEST_CASE("integrator arguments") {
  const auto m = wlan_decay_model(1, 1);
  CHECK_THROWS_AS(integrate(m, StateDistribution::point_mass(0, 5), 0.0, 1e-8), Error);
  CHECK_THROWS_AS(integrate(m, StateDistribution::point_mass(0, 5), 1.0, 0.0), Error);
  std::ostringstream os;
  write_mve_csv(os, integrate(m, StateDistribution::point_mass(0, 3), 0.1, 1e-8));
  CHECK(os.str().rfind("t,z,prob\n", 0) == 0);
}
