#include "mfqp/kernels.hpp"

#include <atomic>

#include "mfqp/common.hpp"

namespace mfqp::kernels {

namespace {

Isa detect() { return avx2_available() ? Isa::avx2 : Isa::scalar; }

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_available())
    throw Error(Reason::invalid_argument, "avx2 not supported on this cpu");
  current().store(isa, std::memory_order_relaxed);
}

void reset_isa() { current().store(detect(), std::memory_order_relaxed); }

double dot(const double* a, const double* b, std::size_t n) {
  return active_isa() == Isa::avx2 ? avx2::dot(a, b, n) : scalar::dot(a, b, n);
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  return active_isa() == Isa::avx2 ? avx2::abs_diff_sum(a, b, n) : scalar::abs_diff_sum(a, b, n);
}

void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n) {
  if (active_isa() == Isa::avx2)
    avx2::drift_resets(mu, fwd, rst, out, n);
  else
    scalar::drift_resets(mu, fwd, rst, out, n);
}

void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n) {
  if (active_isa() == Isa::avx2)
    avx2::drift_birth_death(mu, fwd, bwd, out, n);
  else
    scalar::drift_birth_death(mu, fwd, bwd, out, n);
}

}  // namespace mfqp::kernels
