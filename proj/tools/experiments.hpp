#pragma once

#include <filesystem>

#include "config.hpp"
#include "json.hpp"

namespace mfqp::cli {

// Runs the configured experiment, writing files into dir. Returns a summary for the manifest.
nlohmann::json run_experiment(const Config& c, const std::filesystem::path& dir, unsigned threads);

}  // namespace mfqp::cli
