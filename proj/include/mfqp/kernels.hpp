#pragma once

#include <cstddef>

// Hot loops shared by the MVE integrator, the metrics and the cost evaluators.
// Each kernel has a scalar reference and an AVX2 variant; the variant is picked
// once at startup from CPUID.
namespace mfqp::kernels {

enum class Isa { scalar, avx2 };

bool avx2_available();
Isa active_isa();
const char* isa_name(Isa isa);

// Test hook. Throws if the requested ISA is not supported by this CPU.
void force_isa(Isa isa);
void reset_isa();

double dot(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);

// out = Lambda^* mu for a chain with resets. fwd[n-1] must be 0 (reflecting closure).
void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n);
// out = Lambda^* mu for a birth-death chain. bwd[0] and fwd[n-1] must be 0.
void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);
void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n);
void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double abs_diff_sum(const double* a, const double* b, std::size_t n);
void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n);
void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n);
}  // namespace avx2

}  // namespace mfqp::kernels
