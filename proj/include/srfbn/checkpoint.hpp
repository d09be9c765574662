#pragma once

// Binary checkpoint layout (all integers u32 little-endian):
//   "SRFB" | version | scale T G m c_in c_out | 5 flag bytes |
//   entry count | per entry: id length, id bytes (UTF-8), rank, dims..., f32 payload

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "srfbn/error.hpp"
#include "srfbn/model.hpp"
#include "srfbn/weights.hpp"

namespace srfbn {

inline constexpr std::array<char, 4> kCheckpointMagic{'S', 'R', 'F', 'B'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public FormatError {
 public:
  enum class Kind { VersionMismatch, Truncated, Corrupt };
  CheckpointError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  ModelConfig config;
  WeightSet weights;
};

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint: truncated payload");
  }
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline void write_config(ByteWriter& w, const ModelConfig& c) {
  for (int v : {c.scale, c.T, c.G, c.m, c.c_in, c.c_out}) w.u32(static_cast<std::uint32_t>(v));
  for (bool f : {c.share_weights, c.tie_loss_every_iteration, c.lr_input_every_iteration, c.use_udsl,
                 c.use_dsc})
    w.u8(f ? 1 : 0);
}

inline ModelConfig read_config(ByteReader& r) {
  ModelConfig c;
  for (int* v : {&c.scale, &c.T, &c.G, &c.m, &c.c_in, &c.c_out}) *v = static_cast<int>(r.u32());
  for (bool* f : {&c.share_weights, &c.tie_loss_every_iteration, &c.lr_input_every_iteration, &c.use_udsl,
                  &c.use_dsc}) {
    const auto b = r.u8();
    if (b > 1) throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint: bad flag byte");
    *f = b == 1;
  }
  return c;
}

}  // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const WeightSet& weights, const ModelConfig& cfg) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  detail::write_config(w, cfg);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  for (const auto& [id, t] : weights) {
    w.u32(static_cast<std::uint32_t>(id.size()));
    w.raw(id.data(), id.size());
    w.u32(4);
    for (int d : {t.n(), t.c(), t.h(), t.w()}) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.storage()) w.f32(v);
  }
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::vector<std::uint8_t> bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.remaining() < 4 || r.str(4) != std::string(kCheckpointMagic.data(), 4))
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "checkpoint: bad magic, not an SRFB checkpoint of a supported version");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          "checkpoint: unsupported format version " + std::to_string(version));
  Checkpoint ck;
  ck.config = detail::read_config(r);
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(CheckpointError::Kind::Corrupt, std::string("checkpoint: ") + e.what());
  }
  const auto count = r.u32();
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto len = r.u32();
    std::string id = r.str(len);
    const auto rank = r.u32();
    if (rank < 1 || rank > 4)
      throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint: bad rank for " + id);
    std::array<int, 4> d{1, 1, 1, 1};
    for (std::uint32_t i = 0; i < rank; ++i) d[4 - rank + i] = static_cast<int>(r.u32());
    Dims4 dims{d[0], d[1], d[2], d[3]};
    if (r.remaining() / 4 < dims.count())
      throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint: truncated payload in " + id);
    std::vector<float> data(dims.count());
    for (auto& v : data) v = r.f32();
    if (ck.weights.contains(id))
      throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint: duplicate entry " + id);
    ck.weights.add(std::move(id), Tensor4(dims, std::move(data)));
  }
  if (r.remaining() != 0)
    throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint: trailing bytes");
  return ck;
}

/// Writes to a temporary sibling and renames, so readers never see a partial file.
inline void checkpoint_save(const WeightSet& weights, const ModelConfig& cfg,
                            const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(weights, cfg);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename checkpoint to " + path.string() + ": " + ec.message());
}

inline Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

}  // namespace srfbn
