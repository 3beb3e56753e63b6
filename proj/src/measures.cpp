#include "mfqp/measures.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "mfqp/kernels.hpp"

namespace mfqp {

namespace {

double sum_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Expected value of z^c (log z)^d under p(z) proportional to z^-a (log z)^-b on z > z_max.
// Returns +inf when the weighted series diverges.
double power_log_conditional(int z_max, double a, double b, double c, double d) {
  auto converges = [](double s, double t) { return s > 1.0 || (s == 1.0 && t > 1.0); };
  if (!converges(a, b)) return std::numeric_limits<double>::infinity();
  if (!converges(a - c, b - d)) return std::numeric_limits<double>::infinity();
  const long first = std::max<long>(z_max + 1, 2);
  const long last = first + 200000;
  double num = 0.0;
  double den = 0.0;
  for (long z = last; z >= first; --z) {
    const double lz = std::log(static_cast<double>(z));
    const double p = std::exp(-a * lz - b * std::log(lz));
    den += p;
    num += p * std::exp(c * lz + d * std::log(lz));
  }
  // Remainder by the midpoint integral from last + 1/2 to infinity.
  boost::math::quadrature::exp_sinh<double> integrator;
  const double x0 = static_cast<double>(last) + 0.5;
  auto tail = [&](double s, double t) {
    return integrator.integrate([&](double u) {
      const double x = x0 + u;
      const double lx = std::log(x);
      return std::exp(-s * lx - t * std::log(lx));
    });
  };
  den += tail(a, b);
  num += tail(a - c, b - d);
  return num / den;
}

// E[f(Z)] for the tail label(s) under the declared profile; f is theta (kind 0) or identity (1).
double tail_expectation(const StateDistribution& a, int which) {
  const TailProfile& t = a.tail_profile();
  const int zt = a.z_max() + 1;
  switch (t.kind) {
    case TailProfile::Kind::point:
      return which == 0 ? theta_fn(zt) : static_cast<double>(zt);
    case TailProfile::Kind::geometric: {
      if (which == 1) return zt + t.rho / (1.0 - t.rho);
      double s = 0.0;
      double w = 1.0 - t.rho;
      for (int k = 0; k < 100000; ++k) {
        const double term = w * theta_fn(zt + k);
        s += term;
        if (term < 1e-18 * s && k > 10) break;
        w *= t.rho;
      }
      return s;
    }
    case TailProfile::Kind::power_log:
      return which == 0 ? power_log_conditional(a.z_max(), t.a, t.b, 1.0, 1.0)
                        : power_log_conditional(a.z_max(), t.a, t.b, 1.0, 0.0);
  }
  return 0.0;
}

ExtReal moment(const StateDistribution& a, const std::vector<double>& w, int which) {
  double s = kernels::dot(a.data(), w.data(), a.size());
  if (a.tail_mass() > 0.0) {
    const double e = tail_expectation(a, which);
    if (std::isinf(e)) return ExtReal::infinity();
    s += a.tail_mass() * e;
  }
  return ExtReal(s);
}

void require_same_truncation(const StateDistribution& a, const StateDistribution& b) {
  if (a.z_max() != b.z_max())
    throw Error(Reason::truncation_mismatch,
                "z_max " + std::to_string(a.z_max()) + " vs " + std::to_string(b.z_max()));
}

}  // namespace

StateDistribution::StateDistribution(std::vector<double> probs, double tail_mass, TailProfile tail)
    : probs_(std::move(probs)), tail_mass_(tail_mass), tail_(tail) {
  if (probs_.empty()) throw Error(Reason::invalid_distribution, "empty probability vector");
  for (double p : probs_)
    if (!(p >= 0.0) || !std::isfinite(p))
      throw Error(Reason::invalid_distribution, "negative or non-finite probability");
  if (!(tail_mass_ >= 0.0) || !std::isfinite(tail_mass_))
    throw Error(Reason::invalid_distribution, "negative tail mass");
  const double total = sum_of(probs_) + tail_mass_;
  if (std::fabs(total - 1.0) > kSumTolerance)
    throw Error(Reason::invalid_distribution, "mass " + format_real(total) + " is not 1");
  if (tail_.kind == TailProfile::Kind::geometric && !(tail_.rho > 0.0 && tail_.rho < 1.0))
    throw Error(Reason::invalid_distribution, "geometric tail needs rho in (0,1)");
}

StateDistribution StateDistribution::point_mass(int z, int z_max) {
  if (z < 0 || z > z_max) throw Error(Reason::invalid_argument, "point mass outside truncation");
  std::vector<double> p(static_cast<std::size_t>(z_max) + 1, 0.0);
  p[static_cast<std::size_t>(z)] = 1.0;
  return StateDistribution(std::move(p));
}

StateDistribution StateDistribution::geometric(double rho, int z_max) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error(Reason::invalid_argument, "geometric needs rho in (0,1)");
  std::vector<double> p(static_cast<std::size_t>(z_max) + 1);
  double w = 1.0 - rho;
  for (auto& x : p) {
    x = w;
    w *= rho;
  }
  const double tail = std::pow(rho, z_max + 1);
  // Absorb rounding so the invariant holds exactly.
  const double drift = 1.0 - (sum_of(p) + tail);
  p[0] += drift;
  return StateDistribution(std::move(p), tail, TailProfile::geometric(rho));
}

StateDistribution StateDistribution::from_weights(std::vector<double> weights) {
  const double s = sum_of(weights);
  if (!(s > 0.0)) throw Error(Reason::invalid_distribution, "weights sum to zero");
  for (auto& w : weights) w /= s;
  return StateDistribution(std::move(weights));
}

StateDistribution StateDistribution::retruncated(int new_z_max) const {
  if (new_z_max < 0) throw Error(Reason::invalid_argument, "negative z_max");
  const auto n = static_cast<std::size_t>(new_z_max) + 1;
  if (n >= probs_.size()) {
    std::vector<double> p = probs_;
    p.resize(n, 0.0);
    return StateDistribution(std::move(p), tail_mass_, tail_);
  }
  std::vector<double> p(probs_.begin(), probs_.begin() + static_cast<long>(n));
  double moved = tail_mass_;
  for (std::size_t z = n; z < probs_.size(); ++z) moved += probs_[z];
  return StateDistribution(std::move(p), moved, TailProfile::point());
}

void ClassParams::validate() const {
  if (!(M > 0.0)) throw Error(Reason::invalid_argument, "M must be > 0");
  if (!(delta > 0.0)) throw Error(Reason::invalid_argument, "delta must be > 0");
}

double tv_distance(const StateDistribution& a, const StateDistribution& b) {
  require_same_truncation(a, b);
  return 0.5 * kernels::abs_diff_sum(a.data(), b.data(), a.size()) +
         0.5 * std::fabs(a.tail_mass() - b.tail_mass());
}

std::vector<double> theta_weights(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t z = 0; z < n; ++z) w[z] = theta_fn(static_cast<int>(z));
  return w;
}

ExtReal theta_moment(const StateDistribution& a) { return moment(a, theta_weights(a.size()), 0); }

ExtReal first_moment(const StateDistribution& a) {
  std::vector<double> w(a.size());
  std::iota(w.begin(), w.end(), 0.0);
  return moment(a, w, 1);
}

ExtReal relative_entropy(const StateDistribution& zeta, const StateDistribution& nu) {
  require_same_truncation(zeta, nu);
  double s = 0.0;
  for (int z = 0; z <= zeta.z_max(); ++z) {
    const double p = zeta[z];
    if (p == 0.0) continue;
    if (nu[z] == 0.0) return ExtReal::infinity();
    s += p * std::log(p / nu[z]);
  }
  if (zeta.tail_mass() > 0.0) {
    if (nu.tail_mass() == 0.0) return ExtReal::infinity();
    s += zeta.tail_mass() * std::log(zeta.tail_mass() / nu.tail_mass());
  }
  return ExtReal(std::max(s, 0.0));
}

bool in_class_KM(const StateDistribution& a, double M) {
  if (!(M > 0.0)) throw Error(Reason::invalid_argument, "M must be > 0");
  return theta_moment(a) <= ExtReal(M);
}

bool in_class_KDelta(const StateDistribution& a, const StateDistribution& xi_star, double delta) {
  if (!(delta > 0.0)) throw Error(Reason::invalid_argument, "delta must be > 0");
  if (tv_distance(a, xi_star) > delta) return false;
  const ExtReal ta = theta_moment(a);
  const ExtReal ts = theta_moment(xi_star);
  if (ta.is_infinite() || ts.is_infinite()) return false;
  return std::fabs(ta.value() - ts.value()) <= delta;
}

StateDistribution mixture(const StateDistribution& a, const StateDistribution& b, double alpha) {
  require_same_truncation(a, b);
  std::vector<double> p(a.size());
  for (std::size_t z = 0; z < p.size(); ++z) p[z] = alpha * a.probs()[z] + (1.0 - alpha) * b.probs()[z];
  const double tail = alpha * a.tail_mass() + (1.0 - alpha) * b.tail_mass();
  TailProfile prof = a.tail_mass() > 0.0 ? a.tail_profile() : b.tail_profile();
  return StateDistribution(std::move(p), tail, prof);
}

// The minimizer has the clamp form zeta = clamp(c, L nu, U nu): mass above U nu is removed
// from the center and mass is added where the center sits below L nu. Both thresholds
// solve monotone piecewise-linear equations, so they are found exactly by sorting.
SanovSolution sanov_solve(const StateDistribution& nu, const StateDistribution& center, double delta,
                          int z_max) {
  if (delta < 0.0) throw Error(Reason::invalid_argument, "delta must be >= 0");
  if (z_max < 0) throw Error(Reason::invalid_argument, "negative z_max");
  const auto n = static_cast<std::size_t>(z_max) + 1;
  std::vector<double> v(n, 0.0);
  std::vector<double> c(n, 0.0);
  for (std::size_t z = 0; z < n; ++z) {
    if (z < nu.size()) v[z] = nu.probs()[z];
    if (z < center.size()) c[z] = center.probs()[z];
  }
  double c_out = center.tail_mass();
  for (std::size_t z = n; z < center.size(); ++z) c_out += center.probs()[z];
  const double budget = 2.0 * delta - c_out;  // L1 budget available on {0..z_max}
  SanovSolution sol;
  sol.zeta.assign(n, 0.0);
  const double s_nu = sum_of(v);
  if (budget < 0.0 || s_nu <= 0.0) {
    sol.value = ExtReal::infinity();
    return sol;
  }

  auto entropy_of = [&](const std::vector<double>& zeta) {
    double s = 0.0;
    for (std::size_t z = 0; z < n; ++z)
      if (zeta[z] > 0.0) s += zeta[z] * std::log(zeta[z] / v[z]);
    return s;
  };

  std::vector<double> hat(n);
  for (std::size_t z = 0; z < n; ++z) hat[z] = v[z] / s_nu;
  double l1 = 0.0;
  for (std::size_t z = 0; z < n; ++z) l1 += std::fabs(hat[z] - c[z]);
  if (l1 <= budget) {
    sol.zeta = hat;
    sol.value = ExtReal(std::max(0.0, -std::log(s_nu)));
    return sol;
  }

  const double removed = 0.5 * (budget - c_out);
  const double added = 0.5 * (budget + c_out);
  double forced = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t z = 0; z < n; ++z) {
    if (v[z] > 0.0)
      idx.push_back(z);
    else
      forced += c[z];
  }
  if (forced > removed * (1.0 + 1e-15) + 1e-300) {
    sol.value = ExtReal::infinity();
    return sol;
  }
  auto ratio = [&](std::size_t z) { return c[z] / v[z]; };

  // Upper threshold: sum over nu>0 of (c - U nu)^+ = removed - forced.
  double upper;
  {
    std::vector<std::size_t> ord = idx;
    std::sort(ord.begin(), ord.end(), [&](auto i, auto j) { return ratio(i) > ratio(j); });
    const double target = std::max(0.0, removed - forced);
    double sc = 0.0;
    double sv = 0.0;
    upper = ord.empty() ? 0.0 : ratio(ord.front());
    for (std::size_t k = 0; k < ord.size(); ++k) {
      sc += c[ord[k]];
      sv += v[ord[k]];
      const double next = k + 1 < ord.size() ? ratio(ord[k + 1]) : 0.0;
      if (sc - next * sv >= target) {
        upper = (sc - target) / sv;
        break;
      }
    }
  }
  // Lower threshold: sum over nu>0 of (L nu - c)^+ = added.
  double lower;
  {
    std::vector<std::size_t> ord = idx;
    std::sort(ord.begin(), ord.end(), [&](auto i, auto j) { return ratio(i) < ratio(j); });
    double sc = 0.0;
    double sv = 0.0;
    lower = 0.0;
    for (std::size_t k = 0; k < ord.size(); ++k) {
      sc += c[ord[k]];
      sv += v[ord[k]];
      const bool last = k + 1 == ord.size();
      const double next = last ? 0.0 : ratio(ord[k + 1]);
      if (last || next * sv - sc >= added) {
        lower = (added + sc) / sv;
        break;
      }
    }
  }

  for (std::size_t z : idx) sol.zeta[z] = std::clamp(c[z], lower * v[z], std::max(lower, upper) * v[z]);
  const double total = sum_of(sol.zeta);
  for (auto& x : sol.zeta) x /= total;
  sol.value = ExtReal(std::max(0.0, entropy_of(sol.zeta)));

  // KKT residual: mass, ball constraint, and the clamp stationarity conditions.
  double moved = c_out;
  for (std::size_t z = 0; z < n; ++z) moved += std::fabs(sol.zeta[z] - c[z]);
  double res = std::fabs(sum_of(sol.zeta) - 1.0);
  res = std::max(res, std::max(0.0, moved - 2.0 * delta));
  for (std::size_t z : idx) {
    const double r = sol.zeta[z] / v[z];
    if (sol.zeta[z] > c[z] * (1.0 + 1e-12)) res = std::max(res, std::fabs(r - lower) / lower * total);
    if (sol.zeta[z] < c[z] * (1.0 - 1e-12)) res = std::max(res, std::fabs(r - upper) / upper * total);
  }
  sol.kkt_residual = std::fabs(total - 1.0) < 1e-9 ? res : std::max(res, std::fabs(total - 1.0));
  return sol;
}

ExtReal sanov_inf_over_ball(const StateDistribution& nu, const StateDistribution& center,
                            double delta, int z_max) {
  return sanov_solve(nu, center, delta, z_max).value;
}

bool AnalyticDistribution::theta_moment_finite() const {
  switch (kind) {
    case Kind::point_mass:
    case Kind::geometric:
    case Kind::finite:
      return true;
    case Kind::power_log:
      // sum z^(1-a) (log z)^(1-b) converges iff a > 2, or a = 2 and b > 2.
      return a > 2.0 || (a == 2.0 && b > 2.0);
    case Kind::undeclared:
      break;
  }
  throw Error(Reason::undecidable_profile, "tail profile not declared");
}

StateDistribution AnalyticDistribution::truncate(int z_max) const {
  switch (kind) {
    case Kind::point_mass:
      return StateDistribution::point_mass(z, z_max);
    case Kind::geometric:
      return StateDistribution::geometric(rho, z_max);
    case Kind::finite: {
      std::vector<double> p = probs;
      double tail = 0.0;
      if (p.size() > static_cast<std::size_t>(z_max) + 1) {
        for (std::size_t i = static_cast<std::size_t>(z_max) + 1; i < p.size(); ++i) tail += p[i];
        p.resize(static_cast<std::size_t>(z_max) + 1);
      } else {
        p.resize(static_cast<std::size_t>(z_max) + 1, 0.0);
      }
      return StateDistribution(std::move(p), tail);
    }
    case Kind::power_log: {
      if (z_max < 2) throw Error(Reason::invalid_argument, "power_log truncation needs z_max >= 2");
      if (!(a > 1.0 || (a == 1.0 && b > 1.0)))
        throw Error(Reason::invalid_argument, "power_log profile is not normalizable");
      // Normalizer: explicit head plus the tail expectation of z^0.
      std::vector<double> p(static_cast<std::size_t>(z_max) + 1, 0.0);
      double head = 0.0;
      for (int zz = 2; zz <= z_max; ++zz) {
        const double lz = std::log(static_cast<double>(zz));
        p[static_cast<std::size_t>(zz)] = std::exp(-a * lz - b * std::log(lz));
        head += p[static_cast<std::size_t>(zz)];
      }
      // Tail mass relative to the head, from a long explicit sum plus integral remainder.
      double tail = 0.0;
      const long last = z_max + 200000L;
      for (long zz = last; zz > z_max; --zz) {
        const double lz = std::log(static_cast<double>(zz));
        tail += std::exp(-a * lz - b * std::log(lz));
      }
      boost::math::quadrature::exp_sinh<double> integrator;
      const double x0 = static_cast<double>(last) + 0.5;
      tail += integrator.integrate([&](double u) {
        const double x = x0 + u;
        const double lx = std::log(x);
        return std::exp(-a * lx - b * std::log(lx));
      });
      const double total = head + tail;
      for (auto& x : p) x /= total;
      const double tail_mass = 1.0 - sum_of(p);
      return StateDistribution(std::move(p), std::max(0.0, tail_mass), TailProfile::power_log(a, b));
    }
    case Kind::undeclared:
      break;
  }
  throw Error(Reason::undecidable_profile, "tail profile not declared");
}

void write_distribution_csv(std::ostream& os, const StateDistribution& d) {
  os << "z,prob\n";
  for (int z = 0; z <= d.z_max(); ++z) os << z << ',' << format_real(d[z]) << '\n';
  if (d.tail_mass() > 0.0) os << "tail," << format_real(d.tail_mass()) << '\n';
}

StateDistribution read_distribution_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(Reason::io, "empty distribution file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "z,prob") throw Error(Reason::io, "expected header z,prob");
  std::vector<double> p;
  double tail = 0.0;
  bool saw_tail = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (saw_tail) throw Error(Reason::io, "rows after tail row");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(Reason::io, "malformed row: " + line);
    const std::string key = line.substr(0, comma);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(Reason::io, "bad number in row: " + line);
    }
    if (key == "tail") {
      tail = value;
      saw_tail = true;
      continue;
    }
    if (key != std::to_string(p.size())) throw Error(Reason::io, "states must be listed 0,1,2,...");
    p.push_back(value);
  }
  if (p.empty()) throw Error(Reason::io, "no states");
  const double total = sum_of(p) + tail;
  if (std::fabs(total - 1.0) > 1e-9)
    throw Error(Reason::invalid_distribution, "distribution sums to " + format_real(total));
  // Files written by this library sum to 1 within rounding and are read back unchanged.
  if (std::fabs(total - 1.0) <= StateDistribution::kSumTolerance) return StateDistribution(std::move(p), tail);
  for (auto& x : p) x /= total;
  return StateDistribution(std::move(p), tail / total);
}

}  // namespace mfqp
