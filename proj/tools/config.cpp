#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace mfqp::cli {

namespace {

struct Key {
  const char* name;
  bool required;
  const char* fallback;  // nullptr when required
};

struct Schema {
  const char* experiment;
  std::vector<Key> keys;
};

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> s = {
      {"counterexample", {{"K_list", true, nullptr}, {"T_list", false, "0.25,0.5,1,2,4"}}},
      {"rate_curve",
       {{"N_list", true, nullptr},
        {"samples_per_N", true, nullptr},
        {"delta", true, nullptr},
        {"center", false, "delta0"},
        {"seed", false, "0"},
        {"horizon", false, "2000"},
        {"burn_in", false, "-1"}}},
      {"mve_audit",
       {{"T", true, nullptr},
        {"tol", false, "1e-10"},
        {"dt_max", false, "0.001"},
        {"M", false, "5"},
        {"n_samples", false, "5"},
        {"seed", false, "0"}}},
      {"quasipotential_bounds",
       {{"n_targets", true, nullptr}, {"M", true, nullptr}, {"seed", false, "0"}, {"refine", false, "true"}}},
      {"duality_check", {{"n_trajectories", true, nullptr}, {"seed", false, "0"}, {"T_max", false, "2"}}},
      {"tightness_audit",
       {{"N", true, nullptr},
        {"horizon", true, nullptr},
        {"M_list", true, nullptr},
        {"delta", false, "0.1"},
        {"burn_in", false, "-1"},
        {"seed", false, "0"}}},
  };
  return s;
}

const Schema* find_schema(const std::string& name) {
  for (const auto& s : schemas())
    if (name == s.experiment) return &s;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw Error(Reason::config, key + ": '" + v + "' is not a number");
  return x;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw Error(Reason::config, key + ": '" + v + "' is not an integer");
  return x;
}

std::vector<std::string> split(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

const std::string& lookup(const std::map<std::string, std::string>& m, const std::string& key,
                          const std::string& fallback_storage) {
  const auto it = m.find(key);
  return it == m.end() ? fallback_storage : it->second;
}

}  // namespace

std::string Config::name() const {
  const auto it = experiment.find("experiment");
  return it == experiment.end() ? "" : it->second;
}

std::string Config::text(const std::string& key) const {
  if (auto it = experiment.find(key); it != experiment.end()) return it->second;
  if (const Schema* s = find_schema(name()))
    for (const auto& k : s->keys)
      if (key == k.name && k.fallback) return k.fallback;
  throw Error(Reason::config, "missing key " + key);
}

double Config::real(const std::string& key) const { return to_real(key, text(key)); }
std::int64_t Config::integer(const std::string& key) const { return to_int(key, text(key)); }

std::vector<std::int64_t> Config::integers(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& s : split(text(key))) out.push_back(to_int(key, s));
  return out;
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : split(text(key))) out.push_back(to_real(key, s));
  return out;
}

bool Config::flag(const std::string& key) const {
  const std::string v = text(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(Reason::config, key + ": expected true or false");
}

Config parse_config(const std::string& text) {
  Config c;
  std::map<std::string, std::string>* section = nullptr;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line == "[model]") section = &c.model;
      else if (line == "[experiment]") section = &c.experiment;
      else throw Error(Reason::config, where + "unknown section " + line);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Reason::config, where + "expected key = value");
    if (!section) throw Error(Reason::config, where + "key outside a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw Error(Reason::config, where + "empty key or value");
    if (!section->emplace(key, value).second) throw Error(Reason::config, where + "duplicate key " + key);
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Reason::io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int model_z_max(const Config& c) {
  static const std::string fallback = "40";
  return static_cast<int>(to_int("z_max", lookup(c.model, "z_max", fallback)));
}

RateModel build_model(const Config& c) {
  static const std::string one = "1";
  const auto it = c.model.find("model");
  if (it == c.model.end()) throw Error(Reason::config, "missing model");
  const std::string& name = it->second;
  if (name == "interacting_wlan") {
    const auto k = c.model.find("kappa");
    if (k == c.model.end()) throw Error(Reason::config, "interacting_wlan needs kappa");
    return interacting_wlan_model(to_real("kappa", k->second));
  }
  const double lf = to_real("lambda_f", lookup(c.model, "lambda_f", one));
  const double lb = to_real("lambda_b", lookup(c.model, "lambda_b", one));
  if (name == "mm1") return mm1_model(lf, lb);
  if (name == "wlan_const") return wlan_const_model(lf, lb);
  if (name == "wlan_decay") return wlan_decay_model(lf, lb);
  throw Error(Reason::config, "unknown model " + name);
}

std::vector<std::string> validate(const Config& c) {
  std::vector<std::string> problems;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  };

  // Model block.
  const std::set<std::string> model_keys = {"model", "lambda_f", "lambda_b", "kappa", "z_max"};
  for (const auto& [k, v] : c.model)
    if (!model_keys.count(k)) problems.push_back("config: unknown model key " + k);
  const auto mname = c.model.count("model") ? c.model.at("model") : "";
  const bool interacting = mname == "interacting_wlan";
  if (interacting && (c.model.count("lambda_f") || c.model.count("lambda_b")))
    problems.push_back("config: interacting_wlan takes kappa, not lambda_f/lambda_b");
  if (!interacting && c.model.count("kappa")) problems.push_back("config: kappa is only used by interacting_wlan");
  bool model_ok = false;
  check([&] {
    build_model(c);
    if (model_z_max(c) < 1) throw Error(Reason::config, "z_max must be >= 1");
    model_ok = true;
  });

  // Experiment block.
  const Schema* s = find_schema(c.name());
  if (!s) {
    problems.push_back("config: unknown or missing experiment '" + c.name() + "'");
    return problems;
  }
  for (const auto& [k, v] : c.experiment) {
    if (k == "experiment" || k == "output_dir") continue;
    const bool known = std::any_of(s->keys.begin(), s->keys.end(), [&](const Key& key) { return k == key.name; });
    if (!known) problems.push_back("config: unknown key " + k + " for " + c.name());
  }
  for (const auto& k : s->keys)
    if (k.required && !c.has(k.name)) problems.push_back("config: missing key " + std::string(k.name));
  if (!problems.empty()) return problems;

  auto positive_increasing = [&](const std::string& key) {
    check([&] {
      const auto v = c.integers(key);
      if (v.empty()) throw Error(Reason::config, key + " is empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 1) throw Error(Reason::config, key + " entries must be >= 1");
        if (i > 0 && v[i] <= v[i - 1]) throw Error(Reason::config, key + " must increase");
      }
    });
  };
  auto positive = [&](const std::string& key) {
    check([&] {
      if (!(c.real(key) > 0.0)) throw Error(Reason::config, key + " must be > 0");
    });
  };
  auto parses = [&](const std::string& key) { check([&] { c.integer(key); }); };

  const std::string e = c.name();
  const RateModel* model = nullptr;
  std::optional<RateModel> holder;
  if (model_ok) {
    holder.emplace(build_model(c));
    model = &*holder;
  }
  if (e == "counterexample") {
    positive_increasing("K_list");
    check([&] {
      for (double t : c.reals("T_list"))
        if (!(t > 0.0)) throw Error(Reason::config, "T_list entries must be > 0");
    });
    if (model && model->family() != RateModel::Family::mm1 && model->family() != RateModel::Family::wlan_const)
      problems.push_back("config: counterexample needs a non-interacting mm1 or wlan_const model");
  } else if (e == "rate_curve") {
    positive_increasing("N_list");
    positive("samples_per_N");
    positive("delta");
    parses("seed");
    check([&] {
      const auto ctr = c.text("center");
      if (ctr != "delta0" && ctr != "equilibrium") throw Error(Reason::config, "center must be delta0 or equilibrium");
    });
  } else if (e == "mve_audit") {
    positive("T");
    positive("tol");
    positive("dt_max");
    positive("M");
    positive("n_samples");
    parses("seed");
  } else if (e == "quasipotential_bounds") {
    positive("n_targets");
    positive("M");
    parses("seed");
    check([&] { c.flag("refine"); });
    if (model && (model->edge_kind() != EdgeKind::chain_with_resets || !model->bounds_declared()))
      problems.push_back("missing_bounds: quasipotential bounds need wlan_decay or interacting_wlan");
  } else if (e == "duality_check") {
    positive("n_trajectories");
    positive("T_max");
    parses("seed");
  } else if (e == "tightness_audit") {
    positive("N");
    positive("horizon");
    positive("delta");
    parses("seed");
    check([&] {
      for (double m : c.reals("M_list"))
        if (!(m > 0.0)) throw Error(Reason::config, "M_list entries must be > 0");
    });
    check([&] {
      const double b = c.real("burn_in");
      if (b >= c.real("horizon")) throw Error(Reason::config, "burn_in must be below the horizon");
    });
  }
  return problems;
}

}  // namespace mfqp::cli
