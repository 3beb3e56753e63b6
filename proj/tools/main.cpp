#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unistd.h>

#include "CLI11.hpp"
#include "config.hpp"
#include "experiments.hpp"
#include "json.hpp"
#include "mfqp/kernels.hpp"
#include "mfqp/parallel.hpp"
#include "mfqp/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfqp;

namespace {

constexpr const char* kVersion = "0.1.0";

int fail(Reason r, const std::string& message) {
  std::cerr << json{{"reason", reason_name(r)}, {"message", message}}.dump() << '\n';
  return is_validation_reason(r) ? 2 : 3;
}

json echo(const std::map<std::string, std::string>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

int run(const std::string& cfg_path, const std::string& output_flag, unsigned threads) {
  cli::Config cfg;
  try {
    cfg = cli::load_config(cfg_path);
  } catch (const Error& e) {
    return fail(e.reason(), e.what());
  }
  const auto problems = cli::validate(cfg);
  if (!problems.empty()) return fail(Reason::config, problems.front());
  std::string out = output_flag;
  if (out.empty() && cfg.experiment.count("output_dir")) out = cfg.experiment.at("output_dir");
  if (out.empty()) return fail(Reason::config, "no output directory (set output_dir or --output)");
  const fs::path final_dir(out);
  if (fs::exists(final_dir)) return fail(Reason::io, "output directory already exists: " + out);

  // Everything is written to a sibling scratch directory and renamed at the end.
  const fs::path tmp = final_dir.parent_path() / (final_dir.filename().string() + ".tmp" + std::to_string(::getpid()));
  std::error_code ec;
  fs::create_directories(tmp, ec);
  if (ec) return fail(Reason::io, "cannot create " + tmp.string());
  const auto t0 = std::chrono::steady_clock::now();
  try {
    json summary = cli::run_experiment(cfg, tmp, threads);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest = {
        {"experiment", cfg.name()},
        {"config", {{"model", echo(cfg.model)}, {"experiment", echo(cfg.experiment)}}},
        {"config_path", cfg_path},
        {"version", kVersion},
        {"rng", Philox4x32::kName},
        {"isa", kernels::isa_name(kernels::active_isa())},
        {"threads", threads},
        {"wall_time_s", wall},
        {"summary", summary},
    };
    if (cfg.has("seed")) manifest["seed"] = cfg.text("seed");
    std::ofstream os(tmp / "manifest.json");
    os << manifest.dump(2) << '\n';
    if (!os) throw Error(Reason::io, "cannot write manifest");
    os.close();
    fs::rename(tmp, final_dir);
  } catch (const Error& e) {
    fs::remove_all(tmp, ec);
    return fail(e.reason(), e.what());
  } catch (const std::exception& e) {
    fs::remove_all(tmp, ec);
    return fail(Reason::io, e.what());
  }
  std::cout << final_dir.string() << '\n';
  return 0;
}

int validate(const std::string& cfg_path) {
  std::vector<std::string> problems;
  try {
    problems = cli::validate(cli::load_config(cfg_path));
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  std::cout << json{{"config", cfg_path}, {"problems", problems}}.dump(2) << '\n';
  return problems.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field particle system large-deviation experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = default_threads();
  std::string output;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", output, "output directory (overrides the config)");

  std::string cfg_path;
  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  run_cmd->add_option("config", cfg_path, "config file")->required();
  auto* val_cmd = app.add_subcommand("validate", "check a config without running it");
  val_cmd->add_option("config", cfg_path, "config file")->required();
  auto* ver_cmd = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*ver_cmd) {
    std::cout << "mfqp " << kVersion << " (" << Philox4x32::kName << ", " << kernels::isa_name(kernels::active_isa()) << ")\n";
    return 0;
  }
  if (*val_cmd) return validate(cfg_path);
  return run(cfg_path, output, threads);
}
