#ifndef SCRNET_CHECKPOINT_HPP
#define SCRNET_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scrnet/error.hpp"
#include "scrnet/model.hpp"

// Checkpoint layout (all integers u32 little-endian):
//
//   "SCRN" | version
//   config: num_layers base_channels max_channels input_channels
//           output_channels kernel_size image_size flags hfc_radius
//           negative_slope(f32 bits) hfc_sigma(f32 bits) seed_lo seed_hi
//   parameter_count
//   per parameter, canonical order: rank | dims... | f32 values
//
// flags: bit 0 = use_dh, bit 1 = use_hfc.

namespace scrnet {

inline constexpr char kCheckpointMagic[4] = {'S', 'C', 'R', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointConfigWords = 13;

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch, kInvalidConfig };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, path_ + ": truncated checkpoint");
    }
  }
  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<unsigned char> serialize_checkpoint(const Model<T>& model) {
  const ModelConfig& c = model.config;
  std::vector<unsigned char> out(kCheckpointMagic, kCheckpointMagic + 4);
  detail::put_u32(out, kCheckpointVersion);
  const std::uint32_t flags = (c.use_dh ? 1u : 0u) | (c.use_hfc ? 2u : 0u);
  for (std::uint32_t v : {static_cast<std::uint32_t>(c.num_layers), static_cast<std::uint32_t>(c.base_channels),
                          static_cast<std::uint32_t>(c.max_channels), static_cast<std::uint32_t>(c.input_channels),
                          static_cast<std::uint32_t>(c.output_channels), static_cast<std::uint32_t>(c.kernel_size),
                          static_cast<std::uint32_t>(c.image_size), flags, static_cast<std::uint32_t>(c.hfc_radius),
                          std::bit_cast<std::uint32_t>(c.negative_slope), std::bit_cast<std::uint32_t>(c.hfc_sigma),
                          static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32)}) {
    detail::put_u32(out, v);
  }
  const auto params = model.parameters();
  detail::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_u32(out, static_cast<std::uint32_t>(p.shape().size()));
    for (int d : p.shape()) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (T v : p.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, path.string() + ": write failed");
}

template <typename T = float>
Model<T> deserialize_checkpoint(const std::vector<unsigned char>& bytes, const std::string& name = "checkpoint") {
  using Kind = CheckpointError::Kind;
  detail::ByteReader in(bytes, name);
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw CheckpointError(Kind::kBadMagic, name + ": bad magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersionMismatch, name + ": version mismatch (file " + std::to_string(version) +
                                                      ", expected " + std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig c;
  c.num_layers = static_cast<int>(in.u32());
  c.base_channels = static_cast<int>(in.u32());
  c.max_channels = static_cast<int>(in.u32());
  c.input_channels = static_cast<int>(in.u32());
  c.output_channels = static_cast<int>(in.u32());
  c.kernel_size = static_cast<int>(in.u32());
  c.image_size = static_cast<int>(in.u32());
  const std::uint32_t flags = in.u32();
  c.use_dh = flags & 1u;
  c.use_hfc = flags & 2u;
  c.hfc_radius = static_cast<int>(in.u32());
  c.negative_slope = in.f32();
  c.hfc_sigma = in.f32();
  const std::uint64_t lo = in.u32();
  const std::uint64_t hi = in.u32();
  c.seed = lo | (hi << 32);

  Model<T> model;
  try {
    model = build_model<T>(c);
  } catch (const InvalidArgument& e) {
    throw CheckpointError(Kind::kInvalidConfig, name + ": invalid stored config: " + e.what());
  }
  auto params = model.parameters();
  const std::uint32_t count = in.u32();
  if (count != params.size()) {
    throw CheckpointError(Kind::kShapeMismatch, name + ": " + std::to_string(count) + " parameters stored, config implies " +
                                                    std::to_string(params.size()));
  }
  for (auto& p : params) {
    const std::uint32_t rank = in.u32();
    if (rank != p.shape().size()) {
      throw CheckpointError(Kind::kShapeMismatch, name + ": stored rank " + std::to_string(rank) + " != expected " +
                                                      std::to_string(p.shape().size()));
    }
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.u32());
    if (shape != p.shape()) {
      throw CheckpointError(Kind::kShapeMismatch, name + ": stored shape " + to_string(shape) + " != expected " +
                                                      to_string(p.shape()));
    }
    for (auto& v : p.values()) v = static_cast<T>(in.f32());
  }
  if (!in.at_end()) throw CheckpointError(Kind::kShapeMismatch, name + ": trailing bytes after parameters");
  return model;
}

template <typename T = float>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, path.string() + ": cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(bytes, path.string());
}

}  // namespace scrnet

#endif  // SCRNET_CHECKPOINT_HPP
