#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "layoutdm/numerics/adam.hpp"
#include "layoutdm/numerics/parameters.hpp"
#include "layoutdm/numerics/rng.hpp"

namespace layoutdm {

// On-disk layout: one line of compact JSON (the header) terminated by '\n',
// followed by little-endian IEEE-754 binary64 arrays in manifest order.
// Header keys: format, version, precision, step, config, rng, adam, tensors.
// Each tensors[] entry carries name, shape, offset (bytes from payload start)
// and count. Tensor names are "param/<name>", "adam.m/<name>", "adam.v/<name>".
struct Checkpoint {
  static constexpr int format_version = 1;

  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, RngStream> rng;
  std::uint64_t step = 0;
  ParameterStore params;
  std::optional<AdamState> adam;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace layoutdm
