#include "mfqp/common.hpp"

#include <charconv>
#include <thread>

#include "mfqp/parallel.hpp"


namespace mfqp {

const char* reason_name(Reason r) {
  switch (r) {
    case Reason::truncation_mismatch: return "truncation_mismatch";
    case Reason::invalid_distribution: return "invalid_distribution";
    case Reason::invalid_argument: return "invalid_argument";
    case Reason::edge_not_present: return "edge_not_present";
    case Reason::missing_bounds: return "missing_bounds";
    case Reason::instability: return "instability";
    case Reason::stiffness: return "stiffness";
    case Reason::equilibrium_not_found: return "equilibrium_not_found";
    case Reason::infeasible_trajectory: return "infeasible_trajectory";
    case Reason::endpoint_mismatch: return "endpoint_mismatch";
    case Reason::undecidable_profile: return "undecidable_profile";
    case Reason::absorbing_state: return "absorbing_state";
    case Reason::truncation_overflow: return "truncation_overflow";
    case Reason::interacting_model: return "interacting_model";
    case Reason::config: return "config";
    case Reason::io: return "io";
  }
  return "unknown";
}

bool is_validation_reason(Reason r) {
  switch (r) {
    case Reason::truncation_mismatch:
    case Reason::invalid_distribution:
    case Reason::invalid_argument:
    case Reason::edge_not_present:
    case Reason::missing_bounds:
    case Reason::undecidable_profile:
    case Reason::interacting_model:
    case Reason::config:
    case Reason::io:
      return true;
    default:
      return false;
  }
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string ext_to_string(ExtReal v) { return v.is_infinite() ? "inf" : format_real(v.value()); }

unsigned default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

}  // namespace mfqp
