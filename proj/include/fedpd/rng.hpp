#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace fedpd {

/// Philox4x32-10 block function: maps (counter, key) to four 32-bit words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// A stream is identified by (seed, stream id). Draw n of a stream depends
/// only on those two values and n, so results never depend on which thread
/// consumes the stream or in what order streams are advanced.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream() : Stream(0, 0) {}
  Stream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, both outputs used).
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t position_ = 0;
  std::array<std::uint32_t, 4> block_{};
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stream-id namespaces, so generator, agent and server draws never overlap.
namespace streams {
inline constexpr std::uint64_t kServer = 0;
inline std::uint64_t agent(std::size_t i) { return (std::uint64_t{1} << 32) | i; }
inline std::uint64_t data(std::size_t i) { return (std::uint64_t{2} << 32) | i; }
inline constexpr std::uint64_t kProbes = std::uint64_t{3} << 32;
inline std::uint64_t theory(std::size_t i) { return (std::uint64_t{4} << 32) | i; }
}  // namespace streams

}  // namespace fedpd
