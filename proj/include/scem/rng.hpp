#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

namespace scem {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11 constants).
/// The bijection is exposed so that streams can be reproduced outside C++.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Sequential view of one Philox stream. The key is the 64-bit seed; the
/// counter is (block index, stream id), so (seed, stream) pairs give
/// independent sequences without any shared state.
class PhiloxStream {
public:
  using result_type = std::uint32_t;

  PhiloxStream(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xFFFFFFFFu; }
  result_type operator()();

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal();
  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace scem
