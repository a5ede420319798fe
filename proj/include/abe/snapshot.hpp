// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// ASNAP: the binary activation-snapshot format. One file holds the
// activations of every recorded layer for one example population at one
// checkpoint. Little-endian throughout:
//
//   magic "ABES" | version u32 (=1) | checkpoint u64 | population u8 |
//   layer_count u32 | per layer: layer_id u32 | n_examples u32 |
//   n_features u32 | payload n_examples*n_features f32, row-major
//
// Recorders should dump post-nonlinearity outputs, flattening convolutional
// maps C*H*W in row-major order. Whether activations are taken before or
// after batch normalization is the experimenter's choice; the format carries
// whatever was recorded.

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abe/error.hpp"
#include "abe/io.hpp"

namespace abe {

enum class PopulationKind : std::uint8_t { source_valid = 0, target = 1, other = 2 };

/// A fixed set of examples tracked across checkpoints. `other` populations
/// carry a free-form label (manifest only; ASNAP stores just the kind).
struct Population {
  PopulationKind kind = PopulationKind::source_valid;
  std::string label;

  static Population source_valid() { return {PopulationKind::source_valid, {}}; }
  static Population target() { return {PopulationKind::target, {}}; }
  static Population other(std::string label) { return {PopulationKind::other, std::move(label)}; }

  static Population parse(std::string_view name) {
    if (name == "source_valid") return source_valid();
    if (name == "target") return target();
    if (name.empty()) throw Error(ErrorKind::invalid_argument, "empty population tag");
    return other(std::string(name));
  }

  std::string name() const {
    switch (kind) {
      case PopulationKind::source_valid: return "source_valid";
      case PopulationKind::target: return "target";
      case PopulationKind::other: return label;
    }
    return label;
  }

  friend bool operator==(const Population&, const Population&) = default;
};

/// One layer's activations for a batch: n_examples rows of n_features values.
struct LayerActivations {
  std::uint32_t layer_id = 0;
  std::uint32_t n_examples = 0;
  std::uint32_t n_features = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t n) const {
    return std::span<const float>(values).subspan(n * n_features, n_features);
  }
  float at(std::size_t n, std::size_t i) const { return values[n * n_features + i]; }

  friend bool operator==(const LayerActivations&, const LayerActivations&) = default;
};

struct ActivationSnapshot {
  std::uint64_t checkpoint = 0;
  PopulationKind population = PopulationKind::source_valid;
  std::vector<LayerActivations> layers;

  std::uint32_t n_examples() const { return layers.empty() ? 0 : layers.front().n_examples; }

  friend bool operator==(const ActivationSnapshot&, const ActivationSnapshot&) = default;
};

struct LayerShape {
  std::uint32_t layer_id = 0;
  std::uint32_t n_examples = 0;
  std::uint32_t n_features = 0;
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Everything in an ASNAP file except the payload values.
struct SnapshotHeader {
  std::uint32_t version = 0;
  std::uint64_t checkpoint = 0;
  PopulationKind population = PopulationKind::source_valid;
  std::vector<LayerShape> layers;
};

namespace asnap {

inline constexpr std::array<char, 4> kMagic = {'A', 'B', 'E', 'S'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kFileHeaderBytes = 4 + 4 + 8 + 1 + 4;
inline constexpr std::size_t kLayerHeaderBytes = 4 + 4 + 4;

inline std::uint64_t file_size(std::span<const LayerShape> layers) {
  std::uint64_t size = kFileHeaderBytes;
  for (const auto& l : layers) {
    size += kLayerHeaderBytes + 4ull * l.n_examples * l.n_features;
  }
  return size;
}

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>((u >> (8 * b)) & 0xFFu));
  }
}

template <typename T>
T get_le(const char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return static_cast<T>(u);
}

inline std::string coord(std::size_t layer, std::size_t row, std::size_t col) {
  return "layer " + std::to_string(layer) + ", row " + std::to_string(row) + ", col " +
         std::to_string(col);
}

// Byte sources used by the parser: a whole file in memory, or a stream where
// the payload can be skipped.
class MemorySource {
 public:
  explicit MemorySource(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t size() const { return bytes_.size(); }
  void read(char* dst, std::size_t n) {
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  void skip(std::uint64_t n) { pos_ += n; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

class StreamSource {
 public:
  StreamSource(std::ifstream& in, std::uint64_t size) : in_(in), size_(size) {}
  std::uint64_t size() const { return size_; }
  void read(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorKind::io, "short read");
  }
  void skip(std::uint64_t n) { in_.seekg(static_cast<std::streamoff>(n), std::ios::cur); }

 private:
  std::ifstream& in_;
  std::uint64_t size_;
};

inline void require(std::uint64_t offset, std::uint64_t need, std::uint64_t size,
                    std::string_view what, std::string_view name) {
  if (offset + need > size) {
    throw Error(ErrorKind::truncated,
                std::string(name) + ": " + std::string(what) + " needs bytes up to " +
                    std::to_string(offset + need) + " but file has " + std::to_string(size) +
                    " bytes");
  }
}

/// Parses and validates the structure. When `payload` is non-null the values
/// are decoded into it (one vector per layer); otherwise they are skipped.
template <typename Source>
SnapshotHeader parse(Source& src, std::string_view name,
                     std::vector<std::vector<float>>* payload) {
  const std::uint64_t size = src.size();
  std::uint64_t offset = 0;
  char buf[kFileHeaderBytes];

  require(offset, 4, size, "magic", name);
  src.read(buf, 4);
  if (std::memcmp(buf, kMagic.data(), 4) != 0) {
    throw Error(ErrorKind::bad_magic, std::string(name) + ": expected \"ABES\"");
  }
  offset += 4;
  require(offset, kFileHeaderBytes - 4, size, "file header", name);
  src.read(buf, kFileHeaderBytes - 4);
  offset += kFileHeaderBytes - 4;

  SnapshotHeader header;
  header.version = get_le<std::uint32_t>(buf);
  if (header.version != kVersion) {
    throw Error(ErrorKind::unsupported_version,
                std::string(name) + ": version " + std::to_string(header.version) +
                    ", reader supports " + std::to_string(kVersion));
  }
  header.checkpoint = get_le<std::uint64_t>(buf + 4);
  const auto tag = static_cast<std::uint8_t>(buf[12]);
  if (tag > 2) {
    throw Error(ErrorKind::bad_header,
                std::string(name) + ": unknown population tag " + std::to_string(tag));
  }
  header.population = static_cast<PopulationKind>(tag);
  const auto layer_count = get_le<std::uint32_t>(buf + 13);
  if (layer_count == 0) throw Error(ErrorKind::bad_header, std::string(name) + ": zero layers");

  for (std::uint32_t l = 0; l < layer_count; ++l) {
    require(offset, kLayerHeaderBytes, size, "header of layer " + std::to_string(l), name);
    src.read(buf, kLayerHeaderBytes);
    offset += kLayerHeaderBytes;
    LayerShape shape{get_le<std::uint32_t>(buf), get_le<std::uint32_t>(buf + 4),
                     get_le<std::uint32_t>(buf + 8)};
    if (shape.layer_id != l) {
      throw Error(ErrorKind::dimension_mismatch,
                  std::string(name) + ": layer " + std::to_string(l) + " has id " +
                      std::to_string(shape.layer_id));
    }
    if (shape.n_examples == 0 || shape.n_features == 0) {
      throw Error(ErrorKind::dimension_mismatch,
                  std::string(name) + ": layer " + std::to_string(l) + " is " +
                      std::to_string(shape.n_examples) + "x" + std::to_string(shape.n_features));
    }
    if (l > 0 && shape.n_examples != header.layers.front().n_examples) {
      throw Error(ErrorKind::dimension_mismatch,
                  std::string(name) + ": layer " + std::to_string(l) + " has " +
                      std::to_string(shape.n_examples) + " examples, layer 0 has " +
                      std::to_string(header.layers.front().n_examples));
    }
    const std::uint64_t count = std::uint64_t{shape.n_examples} * shape.n_features;
    require(offset, 4 * count, size, "payload of layer " + std::to_string(l), name);
    if (payload != nullptr) {
      std::vector<float> values(count);
      if constexpr (std::endian::native == std::endian::little) {
        src.read(reinterpret_cast<char*>(values.data()), 4 * count);
      } else {
        std::vector<char> raw(4 * count);
        src.read(raw.data(), raw.size());
        for (std::uint64_t k = 0; k < count; ++k) {
          values[k] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * k));
        }
      }
      for (std::uint64_t k = 0; k < count; ++k) {
        if (!std::isfinite(values[k])) {
          throw Error(ErrorKind::non_finite,
                      std::string(name) + ": " +
                          coord(l, k / shape.n_features, k % shape.n_features));
        }
      }
      payload->push_back(std::move(values));
    } else {
      src.skip(4 * count);
    }
    offset += 4 * count;
    header.layers.push_back(shape);
  }
  if (offset != size) {
    throw Error(ErrorKind::dimension_mismatch,
                std::string(name) + ": " + std::to_string(size - offset) +
                    " trailing bytes after declared layers (expected " + std::to_string(offset) +
                    " bytes)");
  }
  return header;
}

}  // namespace detail

/// Checks the snapshot invariants: contiguous layer ids from 0, non-empty
/// layers sharing one example count, matching payload sizes, finite values.
inline void validate(const ActivationSnapshot& snap) {
  if (snap.layers.empty()) throw Error(ErrorKind::invalid_argument, "snapshot has no layers");
  if (snap.layers.size() > UINT32_MAX) {
    throw Error(ErrorKind::invalid_argument, "too many layers");
  }
  if (static_cast<std::uint8_t>(snap.population) > 2) {
    throw Error(ErrorKind::invalid_argument, "unknown population kind");
  }
  for (std::size_t l = 0; l < snap.layers.size(); ++l) {
    const auto& layer = snap.layers[l];
    if (layer.layer_id != l) {
      throw Error(ErrorKind::dimension_mismatch,
                  "layer " + std::to_string(l) + " has id " + std::to_string(layer.layer_id));
    }
    if (layer.n_examples == 0 || layer.n_features == 0) {
      throw Error(ErrorKind::dimension_mismatch, "layer " + std::to_string(l) + " is empty");
    }
    if (layer.n_examples != snap.layers.front().n_examples) {
      throw Error(ErrorKind::dimension_mismatch,
                  "layer " + std::to_string(l) + " example count differs from layer 0");
    }
    if (layer.values.size() != std::size_t{layer.n_examples} * layer.n_features) {
      throw Error(ErrorKind::dimension_mismatch,
                  "layer " + std::to_string(l) + " holds " + std::to_string(layer.values.size()) +
                      " values, expected " +
                      std::to_string(std::size_t{layer.n_examples} * layer.n_features));
    }
    for (std::size_t k = 0; k < layer.values.size(); ++k) {
      if (!std::isfinite(layer.values[k])) {
        throw Error(ErrorKind::non_finite,
                    detail::coord(l, k / layer.n_features, k % layer.n_features));
      }
    }
  }
}

inline std::string encode(const ActivationSnapshot& snap) {
  validate(snap);
  std::string out;
  std::vector<LayerShape> shapes;
  for (const auto& l : snap.layers) shapes.push_back({l.layer_id, l.n_examples, l.n_features});
  out.reserve(file_size(shapes));
  out.append(kMagic.data(), kMagic.size());
  detail::put_le(out, kVersion);
  detail::put_le(out, snap.checkpoint);
  detail::put_le(out, static_cast<std::uint8_t>(snap.population));
  detail::put_le(out, static_cast<std::uint32_t>(snap.layers.size()));
  for (const auto& layer : snap.layers) {
    detail::put_le(out, layer.layer_id);
    detail::put_le(out, layer.n_examples);
    detail::put_le(out, layer.n_features);
    for (float v : layer.values) detail::put_le(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

inline ActivationSnapshot decode(std::string_view bytes, std::string_view name = "<memory>") {
  detail::MemorySource src(bytes);
  std::vector<std::vector<float>> payload;
  const SnapshotHeader header = detail::parse(src, name, &payload);
  ActivationSnapshot snap;
  snap.checkpoint = header.checkpoint;
  snap.population = header.population;
  for (std::size_t l = 0; l < header.layers.size(); ++l) {
    const auto& s = header.layers[l];
    snap.layers.push_back({s.layer_id, s.n_examples, s.n_features, std::move(payload[l])});
  }
  return snap;
}

}  // namespace asnap

inline void write_snapshot(const ActivationSnapshot& snapshot, const std::filesystem::path& path) {
  io::write_file_atomic(path, asnap::encode(snapshot));
}

inline ActivationSnapshot read_snapshot(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  return asnap::decode(bytes, path.string());
}

/// Validates structure and section lengths without decoding payload values.
inline SnapshotHeader read_snapshot_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(std::filesystem::exists(path) ? ErrorKind::io : ErrorKind::missing_file,
                "cannot open " + path.string());
  }
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorKind::io, "cannot stat " + path.string());
  asnap::detail::StreamSource src(in, size);
  return asnap::detail::parse(src, path.string(), nullptr);
}

}  // namespace abe
