#include "mfqp/kernels.hpp"

#include <cmath>

namespace mfqp::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double abs_diff_sum(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

void drift_resets(const double* mu, const double* fwd, const double* rst, double* out, std::size_t n) {
  if (n == 0) return;
  double inflow0 = 0.0;
  for (std::size_t z = 1; z < n; ++z) {
    out[z] = fwd[z - 1] * mu[z - 1] - (fwd[z] + rst[z]) * mu[z];
    inflow0 += rst[z] * mu[z];
  }
  out[0] = inflow0 - fwd[0] * mu[0];
}

void drift_birth_death(const double* mu, const double* fwd, const double* bwd, double* out,
                       std::size_t n) {
  if (n == 0) return;
  for (std::size_t z = 0; z < n; ++z) {
    double in = 0.0;
    if (z > 0) in += fwd[z - 1] * mu[z - 1];
    if (z + 1 < n) in += bwd[z + 1] * mu[z + 1];
    out[z] = in - (fwd[z] + bwd[z]) * mu[z];
  }
}

}  // namespace mfqp::kernels::scalar
