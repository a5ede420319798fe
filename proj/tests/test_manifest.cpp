// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "abe/io.hpp"
#include "abe/manifest.hpp"
#include "abe/snapshot.hpp"
#include "abe/synth/run_writer.hpp"
#include "oracles.hpp"

namespace {

using abe::ActivationSnapshot;
using abe::Error;
using abe::ErrorKind;
using abe::Population;
using abe::PopulationKind;
namespace fs = std::filesystem;

const fs::path kFixtures = ABE_FIXTURE_DIR;

ActivationSnapshot snap(std::uint64_t cp, PopulationKind pop, std::vector<std::uint32_t> dims,
                        std::uint32_t rows = 2) {
  ActivationSnapshot s{cp, pop, {}};
  for (std::uint32_t l = 0; l < dims.size(); ++l) {
    s.layers.push_back({l, rows, dims[l], std::vector<float>(rows * dims[l], 0.5f * (l + 1))});
  }
  return s;
}

/// A valid 3-checkpoint run with layers of width 4 and 3.
fs::path write_run(const fs::path& dir) {
  abe::synth::RunWriter w(dir, "t", {4, 3});
  for (std::uint64_t cp : {0, 5, 10}) {
    w.add(snap(cp, PopulationKind::source_valid, {4, 3}), Population::source_valid());
    w.add(snap(cp, PopulationKind::target, {4, 3}, 5), Population::target());
  }
  return w.finish();
}

ErrorKind load_kind(const fs::path& manifest) {
  try {
    abe::Run::load(manifest);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "load accepted an invalid run";
  return ErrorKind::io;
}

nlohmann::ordered_json read_json(const fs::path& p) {
  return nlohmann::ordered_json::parse(abe::io::read_file(p));
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) {
  abe::io::write_file_atomic(p, j.dump(2));
}

TEST(Manifest, JsonRoundTrip) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  const auto j = read_json(path);
  const auto m = abe::manifest::from_json(j);
  EXPECT_EQ(abe::manifest::to_json(m), j);
  EXPECT_EQ(m.checkpoints, (std::vector<std::uint64_t>{0, 5, 10}));
  EXPECT_EQ(m.layer_dims(), (std::vector<std::uint32_t>{4, 3}));
}

TEST(Manifest, LoadsAndServesSnapshots) {
  abe::testing::TempDir dir("man");
  const auto run = abe::Run::load(write_run(dir.path()));
  EXPECT_EQ(run.layer_count(), 2u);
  EXPECT_TRUE(run.has(Population::target()));
  EXPECT_FALSE(run.has(Population::other("ood")));
  const auto s = run.snapshot(Population::target(), 5);
  EXPECT_EQ(s, snap(5, PopulationKind::target, {4, 3}, 5));
}

TEST(Manifest, MissingSnapshotFile) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  fs::remove(dir.path() / "snapshots" / "target_5.asnap");
  EXPECT_EQ(load_kind(path), ErrorKind::missing_file);
}

TEST(Manifest, CheckpointWithoutFileIsAGap) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  auto j = read_json(path);
  j["populations"][1]["files"].erase(1);
  write_json(path, j);
  EXPECT_EQ(load_kind(path), ErrorKind::checkpoint_gap);
}

TEST(Manifest, FileForUndeclaredCheckpointIsAGap) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  auto j = read_json(path);
  j["populations"][0]["files"][2]["checkpoint"] = 11;
  write_json(path, j);
  EXPECT_EQ(load_kind(path), ErrorKind::checkpoint_gap);
}

TEST(Manifest, DimensionDriftNamesLayerAndWidths) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  abe::write_snapshot(snap(10, PopulationKind::source_valid, {4, 6}),
                      dir.path() / "snapshots" / "source_valid_10.asnap");
  try {
    abe::Run::load(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_drift);
    EXPECT_NE(std::string(e.what()).find("layer 1 has D=6, manifest declares D=3"), std::string::npos)
        << e.what();
  }
}

TEST(Manifest, LayerCountDrift) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  abe::write_snapshot(snap(0, PopulationKind::target, {4}), dir.path() / "snapshots" / "target_0.asnap");
  EXPECT_EQ(load_kind(path), ErrorKind::dimension_drift);
}

TEST(Manifest, FileHeaderMustMatchEntry) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  abe::write_snapshot(snap(6, PopulationKind::target, {4, 3}), dir.path() / "snapshots" / "target_5.asnap");
  EXPECT_EQ(load_kind(path), ErrorKind::invalid_manifest);
  write_run(dir.path());
  abe::write_snapshot(snap(5, PopulationKind::source_valid, {4, 3}),
                      dir.path() / "snapshots" / "target_5.asnap");
  EXPECT_EQ(load_kind(path), ErrorKind::invalid_manifest);
}

TEST(Manifest, CorruptedSnapshotSurfacesFormatError) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  abe::io::write_file_atomic(dir.path() / "snapshots" / "target_10.asnap", "ABEZ-garbage-bytes----");
  EXPECT_EQ(load_kind(path), ErrorKind::bad_magic);
}

TEST(Manifest, StructuralErrors) {
  abe::testing::TempDir dir("man");
  const auto path = write_run(dir.path());
  const auto good = read_json(path);
  auto expect_invalid = [&](nlohmann::ordered_json j) {
    write_json(path, j);
    EXPECT_EQ(load_kind(path), ErrorKind::invalid_manifest) << j.dump();
  };
  {
    auto j = good;
    j["checkpoints"] = {0, 10, 5};
    expect_invalid(j);
  }
  {
    auto j = good;
    j["layers"][1]["id"] = 2;
    expect_invalid(j);
  }
  {
    auto j = good;
    j.erase("run_id");
    expect_invalid(j);
  }
  {
    auto j = good;
    j["populations"][1]["tag"] = "source_valid";
    expect_invalid(j);
  }
  {
    auto j = good;
    j["checkpoints"] = nlohmann::ordered_json::array();
    expect_invalid(j);
  }
  abe::io::write_file_atomic(path, "{ not json");
  EXPECT_EQ(load_kind(path), ErrorKind::invalid_manifest);
  EXPECT_EQ(load_kind(dir.path() / "absent.json"), ErrorKind::missing_file);
}

TEST(Manifest, GoldenRunFromIndependentWriter) {
  const auto run = abe::Run::load(kFixtures / "run" / "manifest.json");
  EXPECT_EQ(run.manifest().run_id, "golden");
  EXPECT_EQ(run.checkpoints(), (std::vector<std::uint64_t>{0, 10, 20, 30}));
  EXPECT_EQ(run.manifest().meta["writer"], "make_fixtures.py");
  const auto s = run.snapshot(Population::target(), 30);
  ASSERT_EQ(s.layers.size(), 2u);
  EXPECT_EQ(s.layers[1].values, (std::vector<float>{1.5f, 1.0f, 1.0f, 1.5f}));
  EXPECT_EQ(s.layers[0].values, (std::vector<float>{2.5f, 1.25f, 0.5f, 1.25f, 2.5f, 0.5f}));
}

}  // namespace
