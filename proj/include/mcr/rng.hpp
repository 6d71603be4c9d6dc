#pragma once

#include <cstdint>
#include <initializer_list>

namespace mcr {

/// Counter-based random stream. The n-th draw is a pure function of
/// (seed, stream, n), so streams can be created out of order, split across
/// workers, and still reproduce a serial run bit for bit.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Standard normal (Box-Muller, one value per two draws).
  double normal();
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// Hash a tuple of tags into a stream id, e.g. {purpose, epoch, step}.
std::uint64_t derive_stream(std::initializer_list<std::uint64_t> parts);

}  // namespace mcr
