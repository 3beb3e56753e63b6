#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace mfqp {

// Philox4x32-10 counter-based generator. A stream is keyed by (seed, replica);
// the block counter advances inside the stream, so streams never overlap.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr const char* kName = "philox4x32-10";

  Philox4x32(std::uint64_t seed, std::uint64_t replica = 0);

  static Block bijection(Block counter, Key key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  // Exponential with unit rate.
  double exponential();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  Key key_{};
  Block counter_{};
  Block buffer_{};
  int used_ = 4;
};

}  // namespace mfqp
