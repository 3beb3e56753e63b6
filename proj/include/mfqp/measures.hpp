#pragma once

#include <iosfwd>
#include <vector>

#include "mfqp/common.hpp"

namespace mfqp {

// Shape of the mass beyond z_max, used to weight tail_mass in moments.
struct TailProfile {
  enum class Kind {
    point,      // all tail mass at the virtual label z_max + 1
    geometric,  // p(z) proportional to rho^z for z > z_max
    power_log,  // p(z) proportional to z^-a (log z)^-b for z > z_max
  };
  Kind kind = Kind::point;
  double rho = 0.0;
  double a = 0.0;
  double b = 0.0;

  static TailProfile point() { return {}; }
  static TailProfile geometric(double rho) { return {Kind::geometric, rho, 0.0, 0.0}; }
  static TailProfile power_log(double a, double b) { return {Kind::power_log, 0.0, a, b}; }
};

class StateDistribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  StateDistribution() : StateDistribution(std::vector<double>{1.0}) {}
  // Throws invalid_distribution unless entries are >= 0 and sum with tail_mass to 1 +- 1e-12.
  explicit StateDistribution(std::vector<double> probs, double tail_mass = 0.0,
                             TailProfile tail = TailProfile::point());

  static StateDistribution point_mass(int z, int z_max);
  // (1 - rho) rho^z on {0..z_max}; the remainder rho^(z_max+1) is kept as geometric tail.
  static StateDistribution geometric(double rho, int z_max);
  // Normalizes nonnegative weights with no tail.
  static StateDistribution from_weights(std::vector<double> weights);

  int z_max() const { return static_cast<int>(probs_.size()) - 1; }
  std::size_t size() const { return probs_.size(); }
  double operator[](int z) const { return probs_[static_cast<std::size_t>(z)]; }
  const std::vector<double>& probs() const { return probs_; }
  const double* data() const { return probs_.data(); }
  double tail_mass() const { return tail_mass_; }
  const TailProfile& tail_profile() const { return tail_; }

  // Moves mass above new_z_max into the tail, or pads with zeros.
  StateDistribution retruncated(int new_z_max) const;

 private:
  std::vector<double> probs_;
  double tail_mass_ = 0.0;
  TailProfile tail_;
};

struct ClassParams {
  double M = 1.0;
  double delta = 0.1;
  void validate() const;
};

// Half-L1 distance, tail treated as one extra label.
double tv_distance(const StateDistribution& a, const StateDistribution& b);
ExtReal theta_moment(const StateDistribution& a);
ExtReal first_moment(const StateDistribution& a);
ExtReal relative_entropy(const StateDistribution& zeta, const StateDistribution& nu);
bool in_class_KM(const StateDistribution& a, double M);
bool in_class_KDelta(const StateDistribution& a, const StateDistribution& xi_star, double delta);

// alpha a + (1 - alpha) b; both must share z_max.
StateDistribution mixture(const StateDistribution& a, const StateDistribution& b, double alpha);

// theta(z) = z log z for z = 0..n-1.
std::vector<double> theta_weights(std::size_t n);

struct SanovSolution {
  ExtReal value;
  std::vector<double> zeta;  // on {0..z_max}
  double kkt_residual = 0.0;
};

// inf { I(zeta || nu) : d(zeta, center) <= delta, zeta supported on {0..z_max} }.
SanovSolution sanov_solve(const StateDistribution& nu, const StateDistribution& center, double delta,
                          int z_max);
ExtReal sanov_inf_over_ball(const StateDistribution& nu, const StateDistribution& center,
                            double delta, int z_max);

// Analytic descriptors for distributions whose tails are known in closed form.
struct AnalyticDistribution {
  enum class Kind { point_mass, geometric, power_log, finite, undeclared };
  Kind kind = Kind::undeclared;
  int z = 0;                 // point_mass
  double rho = 0.0;          // geometric: (1 - rho) rho^z
  double a = 0.0, b = 0.0;   // power_log: proportional to z^-a (log z)^-b on z >= 2
  std::vector<double> probs; // finite

  // True iff sum theta(z) p(z) converges (comparison test against the family).
  bool theta_moment_finite() const;
  StateDistribution truncate(int z_max) const;
};

// CSV with header `z,prob` and optional final `tail,<mass>` row.
void write_distribution_csv(std::ostream& os, const StateDistribution& d);
StateDistribution read_distribution_csv(std::istream& is);

}  // namespace mfqp
