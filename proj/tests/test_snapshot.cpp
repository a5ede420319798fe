// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "abe/io.hpp"
#include "abe/moments.hpp"
#include "abe/snapshot.hpp"
#include "oracles.hpp"

namespace {

using abe::ActivationSnapshot;
using abe::Error;
using abe::ErrorKind;
using abe::LayerActivations;
using abe::PopulationKind;

const std::filesystem::path kFixtures = ABE_FIXTURE_DIR;

ActivationSnapshot sample_snapshot(std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 2.0f);
  ActivationSnapshot s;
  s.checkpoint = 4242;
  s.population = PopulationKind::target;
  const std::uint32_t dims[] = {7, 1, 33};
  for (std::uint32_t l = 0; l < 3; ++l) {
    LayerActivations la{l, 5, dims[l], std::vector<float>(5 * dims[l])};
    for (float& v : la.values) v = dist(rng);
    s.layers.push_back(std::move(la));
  }
  // Extreme but finite values survive the round trip bit-for-bit.
  s.layers[0].values[0] = std::numeric_limits<float>::max();
  s.layers[0].values[1] = std::numeric_limits<float>::denorm_min();
  s.layers[0].values[2] = -0.0f;
  return s;
}

ErrorKind decode_kind(const std::string& bytes) {
  try {
    abe::asnap::decode(bytes);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted corrupted bytes";
  return ErrorKind::io;
}

TEST(Snapshot, EncodeDecodeRoundTripIsBitExact) {
  const ActivationSnapshot s = sample_snapshot();
  const std::string bytes = abe::asnap::encode(s);
  const ActivationSnapshot back = abe::asnap::decode(bytes);
  ASSERT_EQ(back.checkpoint, s.checkpoint);
  ASSERT_EQ(back.population, s.population);
  ASSERT_EQ(back.layers.size(), s.layers.size());
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    ASSERT_EQ(back.layers[l].values.size(), s.layers[l].values.size());
    EXPECT_EQ(std::memcmp(back.layers[l].values.data(), s.layers[l].values.data(),
                          s.layers[l].values.size() * sizeof(float)),
              0);
  }
  EXPECT_EQ(abe::asnap::encode(back), bytes);
}

TEST(Snapshot, FileSizeMatchesEncoding) {
  const ActivationSnapshot s = sample_snapshot();
  std::vector<abe::LayerShape> shapes;
  for (const auto& l : s.layers) shapes.push_back({l.layer_id, l.n_examples, l.n_features});
  EXPECT_EQ(abe::asnap::file_size(shapes), abe::asnap::encode(s).size());
  EXPECT_EQ(abe::asnap::kFileHeaderBytes, 21u);
}

TEST(Snapshot, WriteReadFileRoundTrip) {
  abe::testing::TempDir dir("snap");
  const ActivationSnapshot s = sample_snapshot(7);
  const auto path = dir.path() / "nested" / "x.asnap";
  abe::write_snapshot(s, path);
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_EQ(abe::read_snapshot(path), s);
  const auto header = abe::read_snapshot_header(path);
  EXPECT_EQ(header.checkpoint, 4242u);
  EXPECT_EQ(header.population, PopulationKind::target);
  ASSERT_EQ(header.layers.size(), 3u);
  EXPECT_EQ(header.layers[2].n_features, 33u);
}

TEST(Snapshot, LittleEndianLayout) {
  ActivationSnapshot s{0x0102030405060708ull, PopulationKind::other, {{0, 1, 1, {1.0f}}}};
  const std::string b = abe::asnap::encode(s);
  ASSERT_EQ(b.size(), 21u + 12u + 4u);
  EXPECT_EQ(b.substr(0, 4), "ABES");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1u);  // version low byte
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 0x08u);
  EXPECT_EQ(static_cast<unsigned char>(b[15]), 0x01u);
  EXPECT_EQ(static_cast<unsigned char>(b[16]), 2u);  // population other
  EXPECT_EQ(static_cast<unsigned char>(b[17]), 1u);  // one layer
  // 1.0f = 0x3f800000, little-endian
  EXPECT_EQ(static_cast<unsigned char>(b[33]), 0x00u);
  EXPECT_EQ(static_cast<unsigned char>(b[36]), 0x3fu);
}

TEST(Snapshot, BadMagicRejected) {
  std::string b = abe::asnap::encode(sample_snapshot());
  for (int k = 0; k < 4; ++k) {
    std::string m = b;
    m[k] ^= 0x20;
    EXPECT_EQ(decode_kind(m), ErrorKind::bad_magic);
  }
}

TEST(Snapshot, UnsupportedVersionRejected) {
  std::string b = abe::asnap::encode(sample_snapshot());
  b[4] = 2;
  EXPECT_EQ(decode_kind(b), ErrorKind::unsupported_version);
}

TEST(Snapshot, EveryTruncationRejected) {
  const std::string b = abe::asnap::encode(sample_snapshot());
  for (std::size_t len = 0; len < b.size(); ++len) {
    const ErrorKind k = decode_kind(b.substr(0, len));
    EXPECT_EQ(k, ErrorKind::truncated) << "length " << len;
  }
}

TEST(Snapshot, TrailingBytesRejected) {
  const std::string b = abe::asnap::encode(sample_snapshot()) + "x";
  EXPECT_EQ(decode_kind(b), ErrorKind::dimension_mismatch);
}

TEST(Snapshot, NonFinitePayloadRejectedWithCoordinates) {
  const float bad[] = {std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity(),
                       -std::numeric_limits<float>::infinity()};
  for (float v : bad) {
    ActivationSnapshot s = sample_snapshot();
    std::string b = abe::asnap::encode(s);
    // layer 1 starts after layer 0 (12 + 5*7*4 bytes); poison row 3 of layer 1
    const std::size_t offset = 21 + 12 + 5 * 7 * 4 + 12 + 3 * 4;
    std::memcpy(b.data() + offset, &v, 4);
    try {
      abe::asnap::decode(b);
      FAIL() << "accepted non-finite payload";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::non_finite);
      EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }
  }
}

TEST(Snapshot, HeaderInconsistenciesRejected) {
  const std::string b = abe::asnap::encode(sample_snapshot());
  {
    std::string m = b;
    m[16] = 3;  // unknown population tag
    EXPECT_EQ(decode_kind(m), ErrorKind::bad_header);
  }
  {
    std::string m = b.substr(0, 21);
    m[17] = m[18] = m[19] = m[20] = 0;  // zero layers
    EXPECT_EQ(decode_kind(m), ErrorKind::bad_header);
  }
  {
    std::string m = b;
    m[21] = 5;  // layer 0 claims id 5
    EXPECT_EQ(decode_kind(m), ErrorKind::dimension_mismatch);
  }
  {
    std::string m = b;
    const std::size_t layer1 = 21 + 12 + 5 * 7 * 4;
    m[layer1 + 4] = 4;  // layer 1 claims 4 examples, layer 0 has 5
    EXPECT_EQ(decode_kind(m), ErrorKind::dimension_mismatch);
  }
}

TEST(Snapshot, EncodeValidatesInvariants) {
  ActivationSnapshot s = sample_snapshot();
  s.layers[1].values.pop_back();
  EXPECT_THROW(abe::asnap::encode(s), Error);
  s = sample_snapshot();
  s.layers[2].values[4] = std::nanf("");
  try {
    abe::asnap::encode(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::non_finite);
  }
}

TEST(Snapshot, MissingFileIsDistinguished) {
  try {
    abe::read_snapshot("/nonexistent/dir/x.asnap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_file);
  }
}

TEST(Snapshot, HeaderReaderRejectsShortPayloadWithoutDecoding) {
  abe::testing::TempDir dir("hdr");
  std::string b = abe::asnap::encode(sample_snapshot());
  b.resize(b.size() - 1);
  const auto path = dir.path() / "short.asnap";
  abe::io::write_file_atomic(path, b);
  try {
    abe::read_snapshot_header(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::truncated);
  }
}

// Fixtures written by tests/fixtures/make_fixtures.py, an independent writer.

nlohmann::json expected_fixtures() {
  return nlohmann::json::parse(abe::io::read_file(kFixtures / "expected.json"));
}

TEST(GoldenFixtures, CorruptedFilesRejectedWithDesignatedKind) {
  const std::pair<const char*, ErrorKind> cases[] = {
      {"bad_magic.asnap", ErrorKind::bad_magic},
      {"bad_version.asnap", ErrorKind::unsupported_version},
      {"truncated.asnap", ErrorKind::truncated},
      {"trailing.asnap", ErrorKind::dimension_mismatch},
      {"nan.asnap", ErrorKind::non_finite},
  };
  for (const auto& [name, kind] : cases) {
    try {
      abe::read_snapshot(kFixtures / "corrupt" / name);
      ADD_FAILURE() << name << " accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind) << name << ": " << e.what();
    }
  }
}

TEST(GoldenFixtures, ConvolutionalFlatteningIsChannelHeightWidth) {
  const auto snap = abe::read_snapshot(kFixtures / "conv_2x2x2.asnap");
  EXPECT_EQ(snap.checkpoint, 7u);
  EXPECT_EQ(snap.population, PopulationKind::target);
  ASSERT_EQ(snap.layers.size(), 2u);
  const auto& conv = snap.layers[0];
  ASSERT_EQ(conv.n_examples, 2u);
  ASSERT_EQ(conv.n_features, 8u);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t w = 0; w < 2; ++w) {
          EXPECT_EQ(conv.at(n, c * 4 + h * 2 + w), static_cast<float>(1000 * n + 100 * c + 10 * h + w));
        }
      }
    }
  }
}

TEST(GoldenFixtures, PayloadsParseWithExactValues) {
  const auto expected = expected_fixtures();
  for (const auto& [name, layers] : expected["values"].items()) {
    const auto snap = abe::read_snapshot(kFixtures / name);
    ASSERT_EQ(snap.layers.size(), layers.size()) << name;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto want = layers[l].get<std::vector<double>>();
      ASSERT_EQ(snap.layers[l].values.size(), want.size());
      for (std::size_t k = 0; k < want.size(); ++k) {
        EXPECT_EQ(static_cast<double>(snap.layers[l].values[k]), want[k]) << name << " layer " << l;
      }
    }
  }
}

TEST(GoldenFixtures, MomentsMatchExactRationalOracle) {
  const auto expected = expected_fixtures();
  for (const auto& [name, layers] : expected["moments"].items()) {
    const auto snap = abe::read_snapshot(kFixtures / name);
    ASSERT_EQ(snap.layers.size(), layers.size()) << name;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto got = abe::compute_moments(snap.layers[l]);
      for (std::size_t k = 0; k < 4; ++k) {
        const double want = layers[l][k].get<double>();
        EXPECT_NEAR(got[abe::kMoments[k]], want, 1e-13 * std::max(1.0, std::abs(want)))
            << name << " layer " << l << " m" << k + 1;
      }
    }
  }
}

TEST(GoldenFixtures, ConstantRowsGiveTwoEverywhere) {
  const auto m = abe::compute_moments(abe::read_snapshot(kFixtures / "constant_rows.asnap").layers[0]);
  EXPECT_EQ(m, (abe::AggregatedMoments{2.0, 2.0, 2.0, 2.0}));
}

}  // namespace
