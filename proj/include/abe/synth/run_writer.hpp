// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Writes a run directory in the layout the engine ingests:
//
//   <dir>/manifest.json
//   <dir>/snapshots/<population>_<checkpoint>.asnap

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "abe/error.hpp"
#include "abe/manifest.hpp"
#include "abe/snapshot.hpp"

namespace abe::synth {

class RunWriter {
 public:
  RunWriter(std::filesystem::path dir, std::string run_id, std::vector<std::uint32_t> layer_dims)
      : dir_(std::move(dir)) {
    manifest_.run_id = std::move(run_id);
    for (std::size_t l = 0; l < layer_dims.size(); ++l) {
      manifest_.layers.push_back({static_cast<std::uint32_t>(l), layer_dims[l]});
    }
  }

  /// Writes one snapshot file and records it in the manifest under
  /// `population`, whose kind must match the snapshot's. Checkpoints must be
  /// added in increasing order.
  void add(const ActivationSnapshot& snapshot, const Population& population) {
    if (population.kind != snapshot.population) {
      throw Error(ErrorKind::invalid_argument, "snapshot kind does not match population " + population.name());
    }
    const std::string rel = "snapshots/" + population.name() + "_" +
                            std::to_string(snapshot.checkpoint) + ".asnap";
    write_snapshot(snapshot, dir_ / rel);
    if (manifest_.checkpoints.empty() || manifest_.checkpoints.back() < snapshot.checkpoint) {
      manifest_.checkpoints.push_back(snapshot.checkpoint);
    }
    PopulationFiles* files = nullptr;
    for (auto& p : manifest_.populations) {
      if (p.population == population) files = &p;
    }
    if (files == nullptr) {
      manifest_.populations.push_back({population, {}});
      files = &manifest_.populations.back();
    }
    files->files.push_back({snapshot.checkpoint, rel});
  }

  void set_meta(nlohmann::ordered_json meta) { manifest_.meta = std::move(meta); }

  /// Writes manifest.json and returns its path.
  std::filesystem::path finish() const {
    const auto path = dir_ / "manifest.json";
    manifest::write(manifest_, path);
    return path;
  }

  const RunManifest& manifest() const { return manifest_; }

 private:
  std::filesystem::path dir_;
  RunManifest manifest_;
};

}  // namespace abe::synth
