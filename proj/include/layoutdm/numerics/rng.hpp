#pragma once

#include <array>
#include <cstdint>

#include "layoutdm/numerics/tensor.hpp"

namespace layoutdm {

// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

// Counter-based random stream. The 64-bit seed is the Philox key and each
// draw consumes one or more 128-bit counter blocks, so identical
// (seed, counter) pairs reproduce identical sequences.
//
// Normal variates use Box-Muller on two 53-bit uniforms taken from a single
// block; each block yields two normals (cos branch first, then sin branch).
struct RngStream {
  static constexpr const char* algorithm = "philox4x32-10/box-muller";

  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  std::array<std::uint32_t, 4> next_block();
  // Uniform on (0, 1], 53 bits.
  double uniform();
  // Uniform integer in [0, bound), unbiased by rejection. One block per attempt.
  std::uint64_t uniform_index(std::uint64_t bound);
  std::array<double, 2> normal_pair();

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

// i.i.d. N(0,1) tensor; advances `stream` by ceil(size/2) blocks.
Tensor seeded_gaussian(const Shape& shape, RngStream& stream);

}  // namespace layoutdm
