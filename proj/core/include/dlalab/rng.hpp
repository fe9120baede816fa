#pragma once

#include <cstdint>
#include <random>

namespace dlalab {

/// Derives a child seed from (seed, stream_id); used to build per-replica and
/// per-walker seeds without any shared state.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id);

/// Deterministic random stream identified by (seed, stream_id).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions below are hand-rolled because the standard
/// library's are implementation-defined and would break byte-reproducibility
/// across toolchains.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, n); n > 0.
  std::uint64_t uniform_below(std::uint64_t n);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform on (0, 1].
  double uniform_open0();
  double exponential(double rate);
  /// Two fresh random bits, drawn from a buffered 64-bit word.
  unsigned two_bits() {
    if (bits_left_ == 0) {
      buffer_ = engine_();
      bits_left_ = 32;
    }
    const auto v = static_cast<unsigned>(buffer_ & 3u);
    buffer_ >>= 2;
    --bits_left_;
    return v;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::uint64_t buffer_ = 0;
  int bits_left_ = 0;
};

}  // namespace dlalab
