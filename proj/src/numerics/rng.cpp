#include "layoutdm/numerics/rng.hpp"

#include <cmath>
#include <numbers>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit_open_closed(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::array<std::uint32_t, 4> RngStream::next_block() {
  const std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(counter),
                                            static_cast<std::uint32_t>(counter >> 32), 0u, 0u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(seed),
                                            static_cast<std::uint32_t>(seed >> 32)};
  ++counter;
  return philox4x32_10(ctr, key);
}

double RngStream::uniform() {
  const auto b = next_block();
  return to_unit_open_closed(b[0], b[1]);
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw DataError(DataErrorCode::invalid_argument, "uniform_index bound must be positive");
  // Largest multiple of `bound` representable; values at or above it are rejected.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  for (;;) {
    const auto b = next_block();
    const std::uint64_t x = (static_cast<std::uint64_t>(b[0]) << 32) | b[1];
    if (x < limit) return x % bound;
  }
}

std::array<double, 2> RngStream::normal_pair() {
  const auto b = next_block();
  const double u1 = to_unit_open_closed(b[0], b[1]);
  const double u2 = to_unit_open_closed(b[2], b[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

Tensor seeded_gaussian(const Shape& shape, RngStream& stream) {
  Tensor out(shape);
  auto data = out.data();
  std::size_t i = 0;
  while (i < data.size()) {
    const auto pair = stream.normal_pair();
    data[i++] = pair[0];
    if (i < data.size()) data[i++] = pair[1];
  }
  return out;
}

}  // namespace layoutdm
