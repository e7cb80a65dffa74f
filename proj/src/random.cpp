#include "rbcv/random.hpp"

#include <cmath>
#include <numbers>

namespace rbcv {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, StreamId id)
    : seed_(seed),
      id_(id),
      key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

PhiloxCounter RngStream::block(std::uint64_t block_index) const {
  return philox4x32_10({static_cast<std::uint32_t>(block_index),
                        static_cast<std::uint32_t>(block_index >> 32), id_.replicate, id_.query},
                       key_);
}

double RngStream::uniform(std::uint64_t index) const {
  const auto bits = block(index / 2);
  return index % 2 == 0 ? to_open_unit(bits[0], bits[1]) : to_open_unit(bits[2], bits[3]);
}

double RngStream::gaussian(std::uint64_t index) const {
  const auto bits = block(index / 2);
  const double u1 = to_open_unit(bits[0], bits[1]);
  const double u2 = to_open_unit(bits[2], bits[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return index % 2 == 0 ? radius * std::cos(angle) : radius * std::sin(angle);
}

void RngStream::fill_gaussians(std::span<double> out) const {
  const std::size_t n = out.size();
  for (std::size_t k = 0; k < n; k += 2) {
    const auto bits = block(k / 2);
    const double u1 = to_open_unit(bits[0], bits[1]);
    const double u2 = to_open_unit(bits[2], bits[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[k] = radius * std::cos(angle);
    if (k + 1 < n) out[k + 1] = radius * std::sin(angle);
  }
}

}  // namespace rbcv
