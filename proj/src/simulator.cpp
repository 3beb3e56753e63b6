#include "mfqp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "mfqp/parallel.hpp"

namespace mfqp {

namespace {

constexpr int kBatches = 20;
constexpr double kT19 = 2.093;  // 0.975 quantile of Student t with 19 dof
constexpr std::uint64_t kChunks = 64;

double rate_of(double p, std::int64_t N) {
  return p > 0.0 ? -std::log(p) / static_cast<double>(N) : std::numeric_limits<double>::infinity();
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments batch_moments(const std::vector<double>& b, std::size_t lo, std::size_t hi) {
  Moments m;
  const double n = static_cast<double>(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) m.mean += b[i];
  m.mean /= n;
  double ss = 0.0;
  for (std::size_t i = lo; i < hi; ++i) ss += (b[i] - m.mean) * (b[i] - m.mean);
  m.se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return m;
}

// Inverse-CDF sampler for the single-particle stationary law.
class IidSampler {
 public:
  IidSampler(const RateModel& model, int z_max) {
    if (model.interacting())
      throw Error(Reason::interacting_model, "exact i.i.d. sampling needs a non-interacting model");
    const StateDistribution pi = single_particle_stationary(model, z_max);
    cdf_.resize(pi.size());
    double acc = 0.0;
    for (std::size_t z = 0; z < cdf_.size(); ++z) cdf_[z] = (acc += pi.probs()[z]);
    cdf_.back() = 1.0;
  }

  ParticleSystemState draw(std::int64_t N, Philox4x32& rng) const {
    if (N < 1) throw Error(Reason::invalid_argument, "N must be >= 1");
    ParticleSystemState s;
    s.counts.assign(cdf_.size(), 0);
    s.N = N;
    for (std::int64_t i = 0; i < N; ++i) {
      const double u = rng.uniform();
      std::size_t z = 0;
      while (cdf_[z] < u) ++z;
      s.counts[z] += 1;
    }
    return s;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

ParticleSystemState ParticleSystemState::all_at_zero(std::int64_t N, int z_max) {
  if (N < 1 || z_max < 1) throw Error(Reason::invalid_argument, "N and z_max must be >= 1");
  ParticleSystemState s;
  s.counts.assign(static_cast<std::size_t>(z_max) + 1, 0);
  s.counts[0] = N;
  s.N = N;
  return s;
}

void ParticleSystemState::validate() const {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw Error(Reason::invalid_argument, "negative particle count");
    total += c;
  }
  if (total != N) throw Error(Reason::invalid_argument, "counts do not sum to N");
}

StateDistribution ParticleSystemState::empirical() const {
  std::vector<double> p(counts.size());
  for (std::size_t z = 0; z < counts.size(); ++z)
    p[z] = static_cast<double>(counts[z]) / static_cast<double>(N);
  return StateDistribution::from_weights(std::move(p));
}

double SimConfig::effective_burn_in(const RateModel& model) const {
  return burn_in < 0.0 ? 20.0 / model.lambda_lower() : burn_in;
}

void SimConfig::validate(const RateModel& model) const {
  if (N < 1) throw Error(Reason::invalid_argument, "N must be >= 1");
  if (z_max < 1) throw Error(Reason::invalid_argument, "z_max must be >= 1");
  if (!(horizon > 0.0)) throw Error(Reason::invalid_argument, "horizon must be > 0");
  if (!(thinning > 0.0)) throw Error(Reason::invalid_argument, "thinning must be > 0");
  if (!(effective_burn_in(model) < horizon))
    throw Error(Reason::invalid_argument, "burn_in must be below the horizon");
}

Event whole_space() {
  return {"whole_space", [](const StateDistribution&) { return true; }};
}

Event tv_ball(const StateDistribution& center, double radius, const std::string& name) {
  return {name, [center, radius](const StateDistribution& d) {
            return tv_distance(d.z_max() == center.z_max() ? d : d.retruncated(center.z_max()), center) <=
                   radius;
          }};
}

Event outside_KM(double M) {
  return {"outside_K_" + format_real(M), [M](const StateDistribution& d) { return !in_class_KM(d, M); }};
}

StepResult gillespie_step(const RateModel& model, ParticleSystemState& state, Philox4x32& rng) {
  const int z_max = state.z_max();
  const double xi0 = static_cast<double>(state.counts[0]) / static_cast<double>(state.N);
  // Non-interacting models use the reflecting closure. In interacting mode fwd[z_max] is the
  // rate out of the truncation and choosing it aborts the run.
  const bool leaky = model.interacting();
  double total = 0.0;
  thread_local std::vector<double> fwd, bwd;
  fwd.resize(state.counts.size());
  bwd.resize(state.counts.size());
  for (int z = 0; z <= z_max; ++z) {
    const double c = static_cast<double>(state.counts[static_cast<std::size_t>(z)]);
    fwd[static_cast<std::size_t>(z)] = c > 0.0 && (z < z_max || leaky) ? c * model.forward_rate(z, xi0) : 0.0;
    bwd[static_cast<std::size_t>(z)] = c > 0.0 && z > 0 ? c * model.backward_rate(z, xi0) : 0.0;
    total += fwd[static_cast<std::size_t>(z)] + bwd[static_cast<std::size_t>(z)];
  }
  if (!(total > 0.0)) throw Error(Reason::absorbing_state, "total jump rate is zero");
  StepResult r;
  r.dt = rng.exponential() / total;
  double u = rng.uniform() * total;
  int z = 0;
  bool forward = true;
  for (z = 0; z <= z_max; ++z) {
    if (u < fwd[static_cast<std::size_t>(z)]) break;
    u -= fwd[static_cast<std::size_t>(z)];
    if (u < bwd[static_cast<std::size_t>(z)]) {
      forward = false;
      break;
    }
    u -= bwd[static_cast<std::size_t>(z)];
  }
  if (z > z_max) {
    // Rounding left u just above the sum: take the last enabled edge.
    for (z = z_max; z >= 0; --z) {
      if (bwd[static_cast<std::size_t>(z)] > 0.0) {
        forward = false;
        break;
      }
      if (fwd[static_cast<std::size_t>(z)] > 0.0) break;
    }
  }
  if (forward && z == z_max)
    throw Error(Reason::truncation_overflow,
                "a particle left the truncation at z_max=" + std::to_string(z_max) + "; raise z_max");
  r.from = z;
  r.to = forward ? z + 1 : model.backward_target(z);
  state.counts[static_cast<std::size_t>(r.from)] -= 1;
  state.counts[static_cast<std::size_t>(r.to)] += 1;
  return r;
}

SimPath simulate_path(const RateModel& model, const SimConfig& config) {
  config.validate(model);
  Philox4x32 rng(config.seed, config.replica);
  ParticleSystemState state = ParticleSystemState::all_at_zero(config.N, config.z_max);
  SimPath path;
  double t = 0.0;
  std::int64_t k = 0;
  auto record_until = [&](double t_next) {
    // Samples at k * thinning strictly before the next jump time.
    while (k * config.thinning <= config.horizon && k * config.thinning < t_next) {
      path.times.push_back(k * config.thinning);
      path.states.push_back(state.empirical());
      ++k;
    }
  };
  while (t < config.horizon) {
    ParticleSystemState next = state;
    const StepResult r = gillespie_step(model, next, rng);
    record_until(t + r.dt);
    state = std::move(next);
    t += r.dt;
    ++path.jumps;
  }
  return path;
}

RateEstimate estimate_invariant(const RateModel& model, const SimConfig& config, const Event& event) {
  config.validate(model);
  const double burn = config.effective_burn_in(model);
  const double span = config.horizon - burn;
  const double width = span / kBatches;
  Philox4x32 rng(config.seed, config.replica);
  ParticleSystemState state = ParticleSystemState::all_at_zero(config.N, config.z_max);
  std::vector<double> occupied(kBatches, 0.0);
  double t = 0.0;
  bool inside = event.holds(state.empirical());
  while (t < config.horizon) {
    const StepResult r = gillespie_step(model, state, rng);
    // Holding interval [t, t + dt) in the pre-jump state.
    if (inside) {
      double a = std::max(t, burn);
      const double b = std::min(t + r.dt, config.horizon);
      while (a < b) {
        const int idx = std::min(kBatches - 1, static_cast<int>((a - burn) / width));
        const double end = std::min(b, burn + (idx + 1) * width);
        occupied[static_cast<std::size_t>(idx)] += std::max(0.0, end - a);
        if (idx == kBatches - 1) break;
        a = end;
      }
    }
    t += r.dt;
    inside = event.holds(state.empirical());
  }
  std::vector<double> frac(kBatches);
  for (int i = 0; i < kBatches; ++i) frac[static_cast<std::size_t>(i)] = occupied[static_cast<std::size_t>(i)] / width;
  const Moments all = batch_moments(frac, 0, kBatches);
  const Moments first = batch_moments(frac, 0, kBatches / 2);
  const Moments second = batch_moments(frac, kBatches / 2, kBatches);

  RateEstimate est;
  est.event = event.name;
  est.N = config.N;
  est.seed = config.seed;
  est.algorithm = std::string("gillespie-occupation/") + Philox4x32::kName;
  est.samples = kBatches;
  est.p_hat = std::clamp(all.mean, 0.0, 1.0);
  est.diagnostic_ok =
      std::fabs(first.mean - second.mean) <= 3.0 * std::hypot(first.se, second.se) + 1e-12;
  if (est.p_hat <= 0.0) {
    // One relaxation time per 1/lambda_lower counts as one independent look.
    est.ci_low = 0.0;
    est.ci_high = std::min(1.0, 3.0 / (span * model.lambda_lower()));
    est.rate = rate_of(est.ci_high, config.N);
    est.lower_bound_only = true;
    return est;
  }
  est.hits = static_cast<std::int64_t>(std::count_if(frac.begin(), frac.end(), [](double f) { return f > 0.0; }));
  est.ci_low = std::clamp(all.mean - kT19 * all.se, 0.0, est.p_hat);
  est.ci_high = std::clamp(all.mean + kT19 * all.se, est.p_hat, 1.0);
  est.rate = rate_of(est.p_hat, config.N);
  return est;
}

ParticleSystemState sample_iid_stationary(const RateModel& model, std::int64_t N, int z_max,
                                          Philox4x32& rng) {
  return IidSampler(model, z_max).draw(N, rng);
}

std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t n) {
  if (n <= 0) throw Error(Reason::invalid_argument, "wilson interval needs n >= 1");
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::clamp(centre - half, 0.0, p), std::clamp(centre + half, p, 1.0)};
}

std::vector<RateEstimate> estimate_rate_curve(const RateModel& model, const Event& event,
                                              const RateCurveConfig& config) {
  if (config.N_list.empty()) throw Error(Reason::invalid_argument, "empty N list");
  if (config.samples_per_N < 1) throw Error(Reason::invalid_argument, "samples_per_N must be >= 1");
  std::vector<RateEstimate> out;
  for (std::size_t i = 0; i < config.N_list.size(); ++i) {
    const std::int64_t N = config.N_list[i];
    if (N < 1) throw Error(Reason::invalid_argument, "N must be >= 1");
    if (model.interacting()) {
      SimConfig sc;
      sc.N = N;
      sc.seed = config.seed;
      sc.replica = i;
      sc.horizon = config.horizon;
      sc.burn_in = config.burn_in;
      sc.z_max = config.z_max;
      out.push_back(estimate_invariant(model, sc, event));
      continue;
    }
    // Fixed chunking keyed by (seed, N index, chunk) so results ignore the thread count.
    std::vector<std::int64_t> hits(kChunks, 0);
    const std::int64_t total = config.samples_per_N;
    const IidSampler sampler(model, config.z_max);
    parallel_for(kChunks, config.threads, [&](std::size_t c) {
      Philox4x32 rng(config.seed, (static_cast<std::uint64_t>(i) << 32) | c);
      const std::int64_t lo = total * static_cast<std::int64_t>(c) / static_cast<std::int64_t>(kChunks);
      const std::int64_t hi = total * static_cast<std::int64_t>(c + 1) / static_cast<std::int64_t>(kChunks);
      for (std::int64_t s = lo; s < hi; ++s)
        if (event.holds(sampler.draw(N, rng).empirical())) ++hits[c];
    });
    RateEstimate est;
    est.event = event.name;
    est.N = N;
    est.seed = config.seed;
    est.algorithm = std::string("iid-stationary/") + Philox4x32::kName;
    est.samples = total;
    for (auto h : hits) est.hits += h;
    est.p_hat = static_cast<double>(est.hits) / static_cast<double>(total);
    std::tie(est.ci_low, est.ci_high) = wilson_interval(est.hits, total);
    if (est.hits == 0) {
      est.lower_bound_only = true;
      est.rate = rate_of(est.ci_high, N);
    } else {
      est.rate = rate_of(est.p_hat, N);
    }
    out.push_back(est);
  }
  return out;
}

void write_rate_csv(std::ostream& os, const std::vector<RateEstimate>& rows) {
  os << "N,event,p_hat,ci_low,ci_high,rate,seed,algorithm\n";
  for (const auto& r : rows)
    os << r.N << ',' << r.event << ',' << format_real(r.p_hat) << ',' << format_real(r.ci_low) << ','
       << format_real(r.ci_high) << ',' << (r.lower_bound_only ? ">=" : "") << format_real(r.rate) << ','
       << r.seed << ',' << r.algorithm << '\n';
}

void write_sim_path_csv(std::ostream& os, const SimPath& path, std::uint64_t replica) {
  os << "t,z,prob,replica\n";
  for (std::size_t k = 0; k < path.times.size(); ++k)
    for (int z = 0; z <= path.states[k].z_max(); ++z)
      os << format_real(path.times[k]) << ',' << z << ',' << format_real(path.states[k][z]) << ','
         << replica << '\n';
}

}  // namespace mfqp
