#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "lensid/nn/init.hpp"

namespace lensid::train {

// Checkpoint layout: 8-byte magic, then a length-prefixed JSON config
// string, then length-prefixed named float blobs (trainable parameters
// first, buffers after, in the order the model enumerates them).
inline constexpr char kCheckpointMagic[8] = {'L', 'E', 'N', 'S', 'I', 'D', '0', '1'};

struct CheckpointData {
  std::string config_json;
  std::map<std::string, Tensor<float>> blobs;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  check(bool(is), ErrorKind::decode, "checkpoint truncated: " + path);
  return v;
}
inline std::int64_t read_i64(std::istream& is, const std::string& path) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  check(bool(is), ErrorKind::decode, "checkpoint truncated: " + path);
  return v;
}

inline void write_blob(std::ostream& os, const std::string& name, const Tensor<float>& t) {
  write_u32(os, std::uint32_t(name.size()));
  os.write(name.data(), std::streamsize(name.size()));
  write_u32(os, std::uint32_t(t.rank()));
  for (std::int64_t d = 0; d < t.rank(); ++d) write_i64(os, t.dim(d));
  os.write(reinterpret_cast<const char*>(t.data()),
           std::streamsize(std::size_t(t.numel()) * sizeof(float)));
}

} // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const std::string& config_json,
                            const nn::NamedParams<float>& params,
                            const nn::NamedTensors<float>& buffers = {}) {
  std::ofstream os(path, std::ios::binary);
  check(bool(os), ErrorKind::io, "cannot write checkpoint: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(os, std::uint32_t(config_json.size()));
  os.write(config_json.data(), std::streamsize(config_json.size()));
  detail::write_u32(os, std::uint32_t(params.size() + buffers.size()));
  for (const auto& [name, v] : params) detail::write_blob(os, name, v->value);
  for (const auto& [name, t] : buffers) detail::write_blob(os, name, *t);
  check(bool(os), ErrorKind::io, "failed writing checkpoint: " + path.string());
}

inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  check(bool(is), ErrorKind::io, "cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic)] = {};
  is.read(magic, sizeof(magic));
  check(bool(is) && std::memcmp(magic, kCheckpointMagic, sizeof(magic)) == 0,
        ErrorKind::decode, "not a checkpoint file: " + path.string());
  CheckpointData data;
  const std::uint32_t cfg_len = detail::read_u32(is, path.string());
  data.config_json.resize(cfg_len);
  is.read(data.config_json.data(), std::streamsize(cfg_len));
  check(bool(is), ErrorKind::decode, "checkpoint truncated: " + path.string());
  const std::uint32_t count = detail::read_u32(is, path.string());
  for (std::uint32_t b = 0; b < count; ++b) {
    const std::uint32_t name_len = detail::read_u32(is, path.string());
    std::string name(name_len, '\0');
    is.read(name.data(), std::streamsize(name_len));
    const std::uint32_t rank = detail::read_u32(is, path.string());
    check(rank <= 8, ErrorKind::decode, "checkpoint blob has absurd rank: " + path.string());
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(detail::read_i64(is, path.string()));
    Tensor<float> t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            std::streamsize(std::size_t(t.numel()) * sizeof(float)));
    check(bool(is), ErrorKind::decode, "checkpoint truncated: " + path.string());
    check(data.blobs.emplace(std::move(name), std::move(t)).second, ErrorKind::decode,
          "duplicate blob name in checkpoint: " + path.string());
  }
  return data;
}

/// Copy checkpoint blobs into live model tensors by name. Every tensor the
/// model enumerates must be present with a matching shape.
inline void load_weights(const CheckpointData& data, const nn::NamedParams<float>& params,
                         const nn::NamedTensors<float>& buffers = {}) {
  auto assign = [&data](const std::string& name, Tensor<float>& dst) {
    auto it = data.blobs.find(name);
    check(it != data.blobs.end(), ErrorKind::model, "checkpoint is missing blob: " + name);
    check(it->second.shape() == dst.shape(), ErrorKind::model,
          "checkpoint blob shape mismatch: " + name);
    dst = it->second;
  };
  for (const auto& [name, v] : params) assign(name, v->value);
  for (const auto& [name, t] : buffers) assign(name, *t);
}

/// Documented hook for initializing a backbone from externally converted
/// weights: the file is a checkpoint whose blob names match the backbone's
/// parameter names under the given prefix. Blobs not present are left at
/// their random initialization; present blobs must match shapes.
inline std::size_t load_backbone_weights(const std::filesystem::path& path,
                                         const std::string& prefix,
                                         const nn::NamedParams<float>& params) {
  CheckpointData data = read_checkpoint(path);
  std::size_t loaded = 0;
  for (const auto& [name, v] : params) {
    const std::string key = nn::join_name(prefix, name);
    auto it = data.blobs.find(key);
    if (it == data.blobs.end()) continue;
    check(it->second.shape() == v->value.shape(), ErrorKind::model,
          "backbone blob shape mismatch: " + key);
    v->value = it->second;
    ++loaded;
  }
  return loaded;
}

} // namespace lensid::train
