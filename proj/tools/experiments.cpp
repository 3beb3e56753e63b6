#include "experiments.hpp"

#include <fstream>

#include "mfqp/audit.hpp"
#include "mfqp/cost.hpp"
#include "mfqp/mckean_vlasov.hpp"
#include "mfqp/quasipotential.hpp"
#include "mfqp/simulator.hpp"

namespace mfqp::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw Error(Reason::io, "cannot write " + p.string());
  return os;
}

// Reals go out as 17-digit strings so the JSON manifest round-trips exactly too.
json real(double v) { return format_real(v); }
json real(ExtReal v) { return ext_to_string(v); }

json counterexample(const Config& c, const fs::path& dir) {
  const RateModel m = build_model(c);
  std::vector<int> K;
  for (auto k : c.integers("K_list")) K.push_back(static_cast<int>(k));
  const auto rep = counterexample_report(m, K, c.reals("T_list"));
  auto os = open_out(dir / "counterexample.csv");
  os << "K,entropy,theta_moment,first_moment,best_linear,best_theta,best,best_T,best_n,best_kind\n";
  for (const auto& r : rep.rows)
    os << r.K << ',' << format_real(r.entropy) << ',' << format_real(r.theta_moment) << ','
       << format_real(r.first_moment) << ',' << format_real(r.best_linear) << ',' << format_real(r.best_theta)
       << ',' << format_real(r.best) << ',' << format_real(r.best_params.T) << ',' << r.best_params.n << ','
       << test_function_name(r.best_params.kind) << '\n';
  return {{"entropy_change", real(rep.entropy_change)},
          {"bound_change", real(rep.bound_change)},
          {"divergence_ratio", real(rep.divergence_ratio)},
          {"files", {"counterexample.csv"}}};
}

json rate_curve(const Config& c, const fs::path& dir, unsigned threads) {
  const RateModel m = build_model(c);
  const int z_max = model_z_max(c);
  const bool at_eq = c.text("center") == "equilibrium";
  const auto xs = find_equilibrium(m, z_max, 1e-12);
  const auto center = at_eq ? xs : StateDistribution::point_mass(0, z_max);
  const double delta = c.real("delta");
  RateCurveConfig rc;
  rc.N_list = c.integers("N_list");
  rc.samples_per_N = c.integer("samples_per_N");
  rc.seed = static_cast<std::uint64_t>(c.integer("seed"));
  rc.z_max = z_max;
  rc.threads = threads;
  rc.horizon = c.real("horizon");
  rc.burn_in = c.real("burn_in");
  const auto rows = estimate_rate_curve(m, tv_ball(center, delta, "tv_ball"), rc);
  auto os = open_out(dir / "rates.csv");
  write_rate_csv(os, rows);
  json out = {{"files", {"rates.csv"}}, {"rng", Philox4x32::kName}};
  if (!m.interacting()) out["sanov_reference"] = real(sanov_inf_over_ball(xs, center, delta, z_max));
  return out;
}

json mve_audit(const Config& c, const fs::path& dir, unsigned threads) {
  const RateModel m = build_model(c);
  const int z_max = model_z_max(c);
  const double T = c.real("T");
  const auto nu = StateDistribution::point_mass(0, z_max);
  const auto path = integrate(m, nu, T, c.real("tol"));
  {
    auto os = open_out(dir / "mve.csv");
    write_mve_csv(os, path);
  }
  const auto flow = mve_flux_trajectory(m, nu, T, c.real("dt_max"));
  const auto nonvar = cost_nonvariational(m, flow);
  const auto var = cost_variational(m, evolve(flow), z_max, m.edge_kind());
  const auto b2 = check_B2(m, c.real("M"), T, static_cast<int>(c.integer("n_samples")),
                           static_cast<std::uint64_t>(c.integer("seed")), z_max, 1e-3, threads);
  {
    auto os = open_out(dir / "b2.csv");
    os << "t,sup_gap\n";
    for (std::size_t k = 0; k < b2.grid.size(); ++k)
      os << format_real(b2.grid[k]) << ',' << format_real(b2.sup_gap[k]) << '\n';
  }
  return {{"cost_nonvariational", real(nonvar)},
          {"cost_variational", real(var.value)},
          {"variational_converged", var.converged},
          {"b2_pass", b2.pass},
          {"b2_terminal_gap", real(b2.terminal_gap)},
          {"b2_statement", b2.statement},
          {"files", {"mve.csv", "b2.csv"}}};
}

json quasipotential_bounds(const Config& c, const fs::path& dir) {
  const RateModel m = build_model(c);
  const int z_max = model_z_max(c);
  const double M = c.real("M");
  const bool refine = c.flag("refine");
  Philox4x32 rng(static_cast<std::uint64_t>(c.integer("seed")), 0);
  std::vector<StateDistribution> targets = {find_equilibrium(m, z_max, 1e-12)};
  for (std::int64_t i = 0; i < c.integer("n_targets"); ++i) targets.push_back(random_in_KM(z_max, M, rng));
  auto table = open_out(dir / "bounds.csv");
  table << "index,upper,lower,cm_bound,witness_kind,witness_duration\n";
  json files = json::array({"bounds.csv"});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto b = v_upper_bound(m, targets[i], refine);
    const std::string tf = "target_" + std::to_string(i) + ".csv";
    const std::string wf = "witness_" + std::to_string(i) + ".csv";
    const std::string jf = "vbound_" + std::to_string(i) + ".json";
    {
      auto os = open_out(dir / tf);
      write_distribution_csv(os, targets[i]);
    }
    {
      auto os = open_out(dir / wf);
      write_flux_trajectory(os, b.witness);
    }
    {
      auto os = open_out(dir / jf);
      write_vbound_json(os, b, tf, wf);
    }
    files.push_back(tf);
    files.push_back(wf);
    files.push_back(jf);
    table << i << ',' << ext_to_string(b.upper) << ',' << format_real(b.lower) << ','
          << format_real(cm_bound(m, targets[i])) << ',' << b.witness_kind << ','
          << format_real(b.witness.duration()) << '\n';
  }
  return {{"targets", targets.size()}, {"files", files}};
}

json duality_check(const Config& c, const fs::path& dir) {
  const RateModel m = build_model(c);
  const int z_max = model_z_max(c);
  Philox4x32 rng(static_cast<std::uint64_t>(c.integer("seed")), 0);
  auto os = open_out(dir / "duality.csv");
  os << "index,variational,nonvariational_recovered,nonvariational_original,gap,converged\n";
  double worst = 0.0;
  for (std::int64_t i = 0; i < c.integer("n_trajectories"); ++i) {
    const auto tr = random_flux_trajectory(m.edge_kind(), z_max, rng, c.real("T_max"));
    const auto path = evolve(tr);
    const auto var = cost_variational(m, path, z_max, m.edge_kind());
    const auto rec = cost_nonvariational(m, flux_from_path(m, path, tr.initial(), m.edge_kind()));
    const auto orig = cost_nonvariational(m, tr);
    const double gap = std::fabs(var.value.as_double() - rec.as_double());
    worst = std::max(worst, gap);
    os << i << ',' << ext_to_string(var.value) << ',' << ext_to_string(rec) << ',' << ext_to_string(orig) << ','
       << format_real(gap) << ',' << (var.converged ? "true" : "false") << '\n';
  }
  return {{"max_gap", real(worst)}, {"files", {"duality.csv"}}};
}

json tightness_audit(const Config& c, const fs::path& dir) {
  const RateModel m = build_model(c);
  const int z_max = model_z_max(c);
  SimConfig sc;
  sc.N = c.integer("N");
  sc.seed = static_cast<std::uint64_t>(c.integer("seed"));
  sc.horizon = c.real("horizon");
  sc.burn_in = c.real("burn_in");
  sc.z_max = z_max;
  const auto xs = find_equilibrium(m, z_max, 1e-12);
  std::vector<RateEstimate> rows;
  sc.replica = 0;
  rows.push_back(estimate_invariant(m, sc, tv_ball(xs, c.real("delta"), "tv_ball_equilibrium")));
  // Each M reuses the same replica so the rates come from one realization and compare cleanly.
  bool monotone = true;
  double prev = -1.0;
  for (double M : c.reals("M_list")) {
    rows.push_back(estimate_invariant(m, sc, outside_KM(M)));
    if (rows.back().rate < prev) monotone = false;
    prev = rows.back().rate;
  }
  auto os = open_out(dir / "tightness.csv");
  write_rate_csv(os, rows);
  return {{"concentration_p_hat", real(rows[0].p_hat)},
          {"rates_nondecreasing_in_M", monotone},
          {"files", {"tightness.csv"}}};
}

}  // namespace

json run_experiment(const Config& c, const fs::path& dir, unsigned threads) {
  const std::string e = c.name();
  if (e == "counterexample") return counterexample(c, dir);
  if (e == "rate_curve") return rate_curve(c, dir, threads);
  if (e == "mve_audit") return mve_audit(c, dir, threads);
  if (e == "quasipotential_bounds") return quasipotential_bounds(c, dir);
  if (e == "duality_check") return duality_check(c, dir);
  if (e == "tightness_audit") return tightness_audit(c, dir);
  throw Error(Reason::config, "unknown experiment " + e);
}

}  // namespace mfqp::cli
