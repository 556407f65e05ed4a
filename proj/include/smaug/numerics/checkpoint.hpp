// Versioned flat binary checkpoints.
//
//   "SMAUGCKPT"             9 bytes
//   version                 u32
//   repeated until EOF:
//     name length           u32
//     name bytes
//     rank                  u32
//     dims                  u64 x rank
//     payload               f32 x prod(dims)
//
// All integers and floats are little-endian.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace smaug {

inline constexpr char kCheckpointMagic[] = "SMAUGCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

namespace detail {

template <typename U>
void put_le(std::string& out, U v) {
  static_assert(std::is_integral_v<U> || std::is_same_v<U, float>);
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  out.append(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw CheckpointError("checkpoint truncated");
  unsigned char buf[sizeof(U)];
  std::memcpy(buf, in.data() + pos, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  pos += sizeof(U);
  U v;
  std::memcpy(&v, buf, sizeof(U));
  return v;
}

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<NamedTensor>& tensors) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& t : tensors) {
    if (shape_size(t.shape) != t.values.size())
      throw CheckpointError("tensor " + t.name + " has " + std::to_string(t.values.size()) +
                            " values for shape " + shape_string(t.shape));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.append(t.name);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_le<std::uint64_t>(out, d);
    for (float v : t.values) detail::put_le<float>(out, v);
  }
  return out;
}

inline std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  const std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
  if (bytes.size() < magic_len || bytes.compare(0, magic_len, kCheckpointMagic) != 0)
    throw CheckpointError("not a checkpoint (bad magic)");
  std::size_t pos = magic_len;
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::vector<NamedTensor> out;
  while (pos < bytes.size()) {
    NamedTensor t;
    const auto name_len = detail::get_le<std::uint32_t>(bytes, pos);
    if (pos + name_len > bytes.size()) throw CheckpointError("checkpoint truncated in name");
    t.name = bytes.substr(pos, name_len);
    pos += name_len;
    const auto rank = detail::get_le<std::uint32_t>(bytes, pos);
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(detail::get_le<std::uint64_t>(bytes, pos));
    const auto n = shape_size(t.shape);
    if (n > (bytes.size() - pos) / 4) throw CheckpointError("checkpoint truncated in " + t.name);
    t.values.resize(n);
    for (auto& v : t.values) v = detail::get_le<float>(bytes, pos);
    out.push_back(std::move(t));
  }
  return out;
}

/// Snapshot of every parameter of `net` (names prefixed).
template <typename Net>
void collect_tensors(Net& net, const std::string& prefix, std::vector<NamedTensor>& out) {
  using T = typename Net::scalar_type;
  net.visit_parameters([&](const std::string& name, Tensor<T>& t) {
    NamedTensor nt;
    nt.name = prefix + name;
    nt.shape = t.shape;
    nt.values.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) nt.values[i] = static_cast<float>(t.data()[i]);
    out.push_back(std::move(nt));
  });
}

/// Loads values into `net`; every parameter must be present with a matching shape.
template <typename Net>
void restore_tensors(Net& net, const std::string& prefix, const std::vector<NamedTensor>& in) {
  using T = typename Net::scalar_type;
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : in) by_name[t.name] = &t;
  net.visit_parameters([&](const std::string& name, Tensor<T>& t) {
    const auto it = by_name.find(prefix + name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter " + prefix + name);
    if (it->second->shape != t.shape)
      throw CheckpointError("parameter " + prefix + name + " has shape " +
                            shape_string(it->second->shape) + ", network expects " +
                            shape_string(t.shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(it->second->values[i]);
  });
}

/// Writes via a temporary file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace smaug
