#include "layoutdm/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "layoutdm/error.hpp"

namespace layoutdm {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

using nlohmann::json;

constexpr const char* kFormat = "layoutdm-checkpoint";

void append_tensor(json& manifest, std::string& payload, const std::string& name, const Tensor& t) {
  manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}, {"count", t.size()}});
  const auto* bytes = reinterpret_cast<const char*>(t.data().data());
  payload.append(bytes, t.size() * sizeof(double));
}

Tensor read_tensor(const json& entry, const std::string& payload) {
  const Shape shape = entry.at("shape").get<Shape>();
  const std::size_t offset = entry.at("offset").get<std::size_t>();
  const std::size_t count = entry.at("count").get<std::size_t>();
  if (count != shape_size(shape) || offset + count * sizeof(double) > payload.size()) {
    throw DataError(DataErrorCode::malformed_json, "checkpoint tensor extends past payload",
                    entry.at("name").get<std::string>());
  }
  std::vector<double> data(count);
  std::memcpy(data.data(), payload.data() + offset, count * sizeof(double));
  return Tensor(shape, std::move(data));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  json manifest = json::array();
  std::string payload;
  for (const auto& [name, t] : ckpt.params) append_tensor(manifest, payload, "param/" + name, t);

  json header;
  header["format"] = kFormat;
  header["version"] = Checkpoint::format_version;
  header["precision"] = "f64";
  header["step"] = ckpt.step;
  header["config"] = ckpt.config;
  header["rng"] = json::object();
  for (const auto& [name, s] : ckpt.rng) {
    header["rng"][name] = {{"algorithm", RngStream::algorithm}, {"seed", s.seed}, {"counter", s.counter}};
  }
  if (ckpt.adam) {
    const auto& a = *ckpt.adam;
    header["adam"] = {{"lr", a.hyper.lr},
                      {"beta1", a.hyper.beta1},
                      {"beta2", a.hyper.beta2},
                      {"eps", a.hyper.eps},
                      {"step", a.step}};
    for (const auto& [name, t] : a.first_moment) append_tensor(manifest, payload, "adam.m/" + name, t);
    for (const auto& [name, t] : a.second_moment) append_tensor(manifest, payload, "adam.v/" + name, t);
  } else {
    header["adam"] = nullptr;
  }
  header["tensors"] = std::move(manifest);
  return header.dump() + "\n" + payload;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw DataError(DataErrorCode::malformed_json, "checkpoint header not terminated");
  json header;
  try {
    header = json::parse(bytes.substr(0, newline));
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, std::string("checkpoint header: ") + e.what());
  }
  const std::string payload = bytes.substr(newline + 1);

  try {
    if (header.at("format") != kFormat) throw DataError(DataErrorCode::malformed_json, "not a layoutdm checkpoint");
    if (header.at("version").get<int>() != Checkpoint::format_version) {
      throw DataError(DataErrorCode::malformed_json, "unsupported checkpoint version");
    }
    if (header.at("precision") != "f64") throw DataError(DataErrorCode::malformed_json, "unsupported precision");

    Checkpoint ckpt;
    ckpt.step = header.at("step").get<std::uint64_t>();
    ckpt.config = header.at("config");
    for (const auto& [name, s] : header.at("rng").items()) {
      if (s.at("algorithm") != RngStream::algorithm) {
        throw DataError(DataErrorCode::malformed_json, "unknown rng algorithm", name);
      }
      ckpt.rng[name] = RngStream{s.at("seed").get<std::uint64_t>(), s.at("counter").get<std::uint64_t>()};
    }
    if (!header.at("adam").is_null()) {
      const auto& a = header["adam"];
      AdamState state;
      state.hyper = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
                     a.at("eps").get<double>()};
      state.step = a.at("step").get<std::uint64_t>();
      ckpt.adam = std::move(state);
    }
    std::size_t expected_end = 0;
    for (const auto& entry : header.at("tensors")) {
      const std::string full = entry.at("name").get<std::string>();
      const auto slash = full.find('/');
      const std::string group = full.substr(0, slash);
      const std::string name = full.substr(slash + 1);
      Tensor t = read_tensor(entry, payload);
      if (entry.at("offset").get<std::size_t>() != expected_end) {
        throw DataError(DataErrorCode::malformed_json, "checkpoint tensors out of manifest order", full);
      }
      expected_end += t.size() * sizeof(double);
      if (group == "param") {
        ckpt.params.add(name, std::move(t));
      } else if (group == "adam.m" && ckpt.adam) {
        ckpt.adam->first_moment.add(name, std::move(t));
      } else if (group == "adam.v" && ckpt.adam) {
        ckpt.adam->second_moment.add(name, std::move(t));
      } else {
        throw DataError(DataErrorCode::unknown_field, "unexpected checkpoint tensor", full);
      }
    }
    if (expected_end != payload.size()) throw DataError(DataErrorCode::malformed_json, "trailing checkpoint bytes");
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(DataErrorCode::malformed_json, std::string("checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataErrorCode::io, "cannot write " + path.string(), path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataErrorCode::io, "write failed for " + path.string(), path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorCode::io, "cannot open " + path.string(), path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace layoutdm
