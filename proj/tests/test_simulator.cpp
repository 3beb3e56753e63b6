#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "mfqp/simulator.hpp"

using namespace mfqp;

namespace {

// Upper 99.9% chi-square point, Wilson-Hilferty.
double chi2_crit(int df) {
  const double k = df, z = 3.09;
  const double c = 1 - 2 / (9 * k) + z * std::sqrt(2 / (9 * k));
  return k * c * c * c;
}

}  // namespace

TEST_CASE("single enabled transitions") {
  Philox4x32 rng(1, 0);
  auto s = ParticleSystemState::all_at_zero(1, 5);
  const auto r = gillespie_step(mm1_model(1, 2), s, rng);
  CHECK(r.from == 0);
  CHECK(r.to == 1);
  CHECK(s.counts[1] == 1);
  auto two = ParticleSystemState::all_at_zero(2, 5);
  gillespie_step(wlan_const_model(1, 1), two, rng);
  CHECK(two.counts[0] == 1);
  CHECK(two.counts[1] == 1);
}

TEST_CASE("edge selection frequencies") {
  const auto m = wlan_decay_model(1, 1);
  ParticleSystemState base;
  base.counts = {3, 2, 1, 1, 0};
  base.N = 7;
  std::map<std::pair<int, int>, double> expect;
  double total = 0;
  for (int z = 0; z <= 4; ++z) {
    const double c = static_cast<double>(base.counts[static_cast<std::size_t>(z)]);
    if (c == 0) continue;
    if (z < 4) total += expect[{z, z + 1}] = c * m.forward_rate(z, 3.0 / 7);
    if (z > 0) total += expect[{z, 0}] = c * m.backward_rate(z, 3.0 / 7);
  }
  const int n = 100000;
  std::map<std::pair<int, int>, int> seen;
  Philox4x32 rng(2, 0);
  double dt_sum = 0;
  for (int i = 0; i < n; ++i) {
    auto s = base;
    const auto r = gillespie_step(m, s, rng);
    s.validate();
    dt_sum += r.dt;
    ++seen[{r.from, r.to}];
  }
  double chi = 0;
  for (const auto& [e, w] : expect) {
    const double ex = n * w / total;
    chi += (seen[e] - ex) * (seen[e] - ex) / ex;
  }
  CHECK(seen.size() == expect.size());
  CHECK(chi < chi2_crit(static_cast<int>(expect.size()) - 1));
  // Mean holding time 1 / total within 5 standard errors.
  CHECK(std::fabs(dt_sum / n - 1 / total) < 5 / (total * std::sqrt(double(n))));
}

TEST_CASE("paths are reproducible and conserve mass") {
  SimConfig c;
  c.N = 30;
  c.seed = 17;
  c.horizon = 50;
  c.thinning = 0.5;
  const auto m = wlan_decay_model(1, 1);
  const auto a = simulate_path(m, c);
  const auto b = simulate_path(m, c);
  REQUIRE(a.times.size() == b.times.size());
  CHECK(a.times.size() == 101);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k].probs() == b.states[k].probs());
    double s = 0;
    for (double x : a.states[k].probs()) s += x * 30;
    CHECK(std::fabs(s - 30) < 1e-9);
  }
  c.replica = 1;
  CHECK(simulate_path(m, c).jumps != a.jumps);
  std::ostringstream os;
  write_sim_path_csv(os, a, 0);
  CHECK(os.str().rfind("t,z,prob,replica\n", 0) == 0);
}

TEST_CASE("mm1 occupancy of state 0") {
  SimConfig c;
  c.N = 50;
  c.seed = 4;
  c.horizon = 3000;
  c.thinning = 1;
  const auto p = simulate_path(mm1_model(1, 2), c);
  double s = 0;
  int k = 0;
  for (std::size_t i = 0; i < p.times.size(); ++i)
    if (p.times[i] >= 20) {
      s += p.states[i][0];
      ++k;
    }
  CHECK(std::fabs(s / k - 0.5) < 0.02);
}

TEST_CASE("invariant estimates") {
  SimConfig c;
  c.N = 20;
  c.seed = 8;
  c.horizon = 500;
  const auto m = wlan_decay_model(1, 1);
  const auto all = estimate_invariant(m, c, whole_space());
  CHECK(all.p_hat == 1.0);
  CHECK(all.rate == 0.0);
  CHECK(!all.lower_bound_only);
  const auto none = estimate_invariant(m, c, outside_KM(1000.0));
  CHECK(none.p_hat == 0.0);
  CHECK(none.lower_bound_only);
  CHECK(none.ci_high > 0.0);
  CHECK(none.rate > 0.0);
}

TEST_CASE("interacting runs abort on truncation overflow") {
  Philox4x32 rng(5, 0);
  auto s = ParticleSystemState::all_at_zero(1, 1);
  auto run = [&] {
    for (int i = 0; i < 1000; ++i) gillespie_step(interacting_wlan_model(0.5), s, rng);
  };
  CHECK_THROWS_AS(run(), Error);
  auto t = ParticleSystemState::all_at_zero(1, 1);
  for (int i = 0; i < 1000; ++i) gillespie_step(wlan_decay_model(1, 1), t, rng);
  CHECK(t.counts[0] + t.counts[1] == 1);
}

TEST_CASE("iid stationary sampling") {
  const auto m = wlan_decay_model(1, 1);
  const auto pi = single_particle_stationary(m, 10);
  Philox4x32 rng(6, 0);
  const int n = 100000;
  std::vector<double> hist(11, 0);
  for (int i = 0; i < n; ++i) {
    const auto s = sample_iid_stationary(m, 1, 10, rng);
    for (int z = 0; z <= 10; ++z) hist[static_cast<std::size_t>(z)] += static_cast<double>(s.counts[static_cast<std::size_t>(z)]);
  }
  // Merge the sparse top cells.
  double chi = 0, ex_tail = 0, ob_tail = 0;
  int cells = 0;
  for (int z = 0; z <= 10; ++z) {
    const double ex = n * pi[z];
    if (ex >= 20) {
      chi += (hist[static_cast<std::size_t>(z)] - ex) * (hist[static_cast<std::size_t>(z)] - ex) / ex;
      ++cells;
    } else {
      ex_tail += ex;
      ob_tail += hist[static_cast<std::size_t>(z)];
    }
  }
  chi += (ob_tail - ex_tail) * (ob_tail - ex_tail) / ex_tail;
  CHECK(chi < chi2_crit(cells));
  const auto big = sample_iid_stationary(m, 500, 10, rng);
  big.validate();
  CHECK_THROWS_AS(sample_iid_stationary(interacting_wlan_model(0.5), 5, 10, rng), Error);
}

TEST_CASE("Wilson interval") {
  const auto [lo, hi] = wilson_interval(0, 100);
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(0.0370).epsilon(1e-3));
  const auto [l2, h2] = wilson_interval(50, 100);
  CHECK(l2 == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(h2 == doctest::Approx(0.5962).epsilon(1e-3));
  CHECK_THROWS_AS(wilson_interval(0, 0), Error);
}

TEST_CASE("rate curves") {
  const auto m = mm1_model(1, 2);
  const auto ball = tv_ball(StateDistribution::point_mass(0, 40), 0.4, "ball");
  RateCurveConfig c;
  c.N_list = {25, 50, 100};
  c.samples_per_N = 20000;
  c.seed = 3;
  const auto a = estimate_rate_curve(m, ball, c);
  c.threads = 3;
  const auto b = estimate_rate_curve(m, ball, c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].hits == b[i].hits);
    CHECK(a[i].ci_low <= a[i].p_hat);
    CHECK(a[i].p_hat <= a[i].ci_high);
  }
  const auto ones = estimate_rate_curve(m, whole_space(), c);
  for (const auto& r : ones) CHECK(r.rate == 0.0);

  // Successive rate differences shrink, in the median over seeds.
  std::vector<int> shrink;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    c.seed = seed;
    const auto r = estimate_rate_curve(m, ball, c);
    shrink.push_back(std::fabs(r[2].rate - r[1].rate) < std::fabs(r[1].rate - r[0].rate));
  }
  std::sort(shrink.begin(), shrink.end());
  CHECK(shrink[1] == 1);

  std::ostringstream os;
  write_rate_csv(os, a);
  CHECK(os.str().rfind("N,event,p_hat,ci_low,ci_high,rate,seed,algorithm\n", 0) == 0);
}

TEST_CASE("Gillespie occupation agrees with iid sampling") {
  const auto m = mm1_model(1, 2);
  const auto ev = tv_ball(StateDistribution::point_mass(0, 40), 0.4, "ball");
  SimConfig sc;
  sc.N = 10;
  sc.seed = 21;
  sc.horizon = 4000;
  const auto g = estimate_invariant(m, sc, ev);
  RateCurveConfig rc;
  rc.N_list = {10};
  rc.samples_per_N = 40000;
  rc.seed = 22;
  const auto i = estimate_rate_curve(m, ev, rc)[0];
  CHECK(g.diagnostic_ok);
  // Merged intervals overlap.
  CHECK(g.ci_low <= i.ci_high);
  CHECK(i.ci_low <= g.ci_high);
}

TEST_CASE("dominating chain stochastically dominates the theta moment") {
  const auto m = interacting_wlan_model(0.5);
  const auto d = dominating_chain(m);
  SimConfig c;
  c.N = 20;
  c.seed = 30;
  c.horizon = 4000;
  c.thinning = 4;
  auto moments = [&](const RateModel& r) {
    const auto p = simulate_path(r, c);
    std::vector<double> v;
    for (std::size_t k = 0; k < p.times.size(); ++k)
      if (p.times[k] >= 40) v.push_back(theta_moment(p.states[k]).value());
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto a = moments(m);
  const auto b = moments(d);
  // One-sided two-sample KS: sup_x F_dom(x) - F_model(x), 99% critical value.
  auto cdf = [](const std::vector<double>& v, double x) {
    return static_cast<double>(std::upper_bound(v.begin(), v.end(), x) - v.begin()) / static_cast<double>(v.size());
  };
  double sup = 0;
  for (double x : a) sup = std::max(sup, cdf(b, x) - cdf(a, x));
  for (double x : b) sup = std::max(sup, cdf(b, x) - cdf(a, x));
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  CHECK(sup < 1.517 * std::sqrt((na + nb) / (na * nb)));
}
