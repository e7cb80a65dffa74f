#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace rbcv {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key);

/// Identifies one independent random stream under a given seed.
///
/// The query index selects the "seed context" (one online evaluation, one
/// offline bundle, ...) and the replicate index selects the Monte-Carlo copy.
struct StreamId {
  std::uint32_t query = 0;
  std::uint32_t replicate = 0;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// A stateless Gaussian stream: draw k is a pure function of (seed, id, k).
///
/// Two streams with equal seed and id return bit-identical sequences, and
/// distinct ids never share a Philox counter.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamId id);

  std::uint64_t seed() const { return seed_; }
  StreamId id() const { return id_; }

  /// Uniform draw in (0, 1), never exactly 0 or 1.
  double uniform(std::uint64_t index) const;

  /// Standard normal draw number `index` of this stream (Box-Muller).
  double gaussian(std::uint64_t index) const;

  /// Fills `out` with draws 0, 1, ..., out.size()-1.
  void fill_gaussians(std::span<double> out) const;

 private:
  PhiloxCounter block(std::uint64_t block_index) const;

  std::uint64_t seed_;
  StreamId id_;
  PhiloxKey key_;
};

}  // namespace rbcv
