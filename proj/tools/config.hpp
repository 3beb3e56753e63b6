#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mfqp/models.hpp"

namespace mfqp::cli {

// Flat `key = value` file with [model] and [experiment] sections.
struct Config {
  std::map<std::string, std::string> model;
  std::map<std::string, std::string> experiment;

  std::string name() const;  // experiment name
  bool has(const std::string& key) const { return experiment.count(key) != 0; }
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::vector<std::int64_t> integers(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::string text(const std::string& key) const;
  bool flag(const std::string& key) const;
};

// Throws Error(config) on syntax errors; semantic checks are in validate().
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

// Schema and cross-field problems; empty when the config is runnable.
std::vector<std::string> validate(const Config& c);

RateModel build_model(const Config& c);
int model_z_max(const Config& c);

}  // namespace mfqp::cli
