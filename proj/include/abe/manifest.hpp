// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run manifests: a JSON index of every snapshot a recording produced.
//
//   {
//     "run_id": "toy-42",
//     "checkpoints": [0, 1, 2],
//     "layers": [{"id": 0, "features": 64}, ...],
//     "populations": [
//       {"tag": "source_valid", "files": [{"checkpoint": 0, "path": "..."}, ...]},
//       {"tag": "target", "files": [...]}
//     ],
//     "meta": {...}            // optional, free-form
//   }
//
// Relative paths resolve against the manifest's directory.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abe/error.hpp"
#include "abe/io.hpp"
#include "abe/snapshot.hpp"

namespace abe {

struct LayerSpec {
  std::uint32_t id = 0;
  std::uint32_t features = 0;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct SnapshotRef {
  std::uint64_t checkpoint = 0;
  std::string path;
  friend bool operator==(const SnapshotRef&, const SnapshotRef&) = default;
};

struct PopulationFiles {
  Population population;
  std::vector<SnapshotRef> files;
  friend bool operator==(const PopulationFiles&, const PopulationFiles&) = default;
};

struct RunManifest {
  std::string run_id;
  std::vector<std::uint64_t> checkpoints;
  std::vector<LayerSpec> layers;
  std::vector<PopulationFiles> populations;
  nlohmann::ordered_json meta;  // null when absent

  std::vector<std::uint32_t> layer_dims() const {
    std::vector<std::uint32_t> dims;
    for (const auto& l : layers) dims.push_back(l.features);
    return dims;
  }

  const PopulationFiles* find(const Population& population) const {
    for (const auto& p : populations) {
      if (p.population == population) return &p;
    }
    return nullptr;
  }

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

namespace manifest {

inline std::string pair_name(const Population& population, std::uint64_t checkpoint) {
  return "(" + population.name() + ", " + std::to_string(checkpoint) + ")";
}

/// Structural checks that need no file access.
inline void validate(const RunManifest& m) {
  if (m.checkpoints.empty()) throw Error(ErrorKind::invalid_manifest, "no checkpoints listed");
  for (std::size_t k = 1; k < m.checkpoints.size(); ++k) {
    if (m.checkpoints[k] <= m.checkpoints[k - 1]) {
      throw Error(ErrorKind::invalid_manifest,
                  "checkpoints not strictly increasing at position " + std::to_string(k));
    }
  }
  if (m.layers.empty()) throw Error(ErrorKind::invalid_manifest, "no layers listed");
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    if (m.layers[l].id != l) {
      throw Error(ErrorKind::invalid_manifest, "layer ids must be contiguous from 0; position " +
                                                   std::to_string(l) + " has id " +
                                                   std::to_string(m.layers[l].id));
    }
    if (m.layers[l].features == 0) {
      throw Error(ErrorKind::invalid_manifest, "layer " + std::to_string(l) + " has 0 features");
    }
  }
  std::set<std::string> seen;
  for (const auto& p : m.populations) {
    if (!seen.insert(p.population.name()).second) {
      throw Error(ErrorKind::invalid_manifest, "population " + p.population.name() + " listed twice");
    }
    std::set<std::uint64_t> covered;
    for (const auto& f : p.files) {
      if (!std::binary_search(m.checkpoints.begin(), m.checkpoints.end(), f.checkpoint)) {
        throw Error(ErrorKind::checkpoint_gap,
                    pair_name(p.population, f.checkpoint) + " is not a declared checkpoint");
      }
      if (!covered.insert(f.checkpoint).second) {
        throw Error(ErrorKind::invalid_manifest,
                    pair_name(p.population, f.checkpoint) + " listed more than once");
      }
    }
    for (auto c : m.checkpoints) {
      if (!covered.contains(c)) {
        throw Error(ErrorKind::checkpoint_gap, "no file for " + pair_name(p.population, c));
      }
    }
  }
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["run_id"] = m.run_id;
  j["checkpoints"] = m.checkpoints;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) j["layers"].push_back({{"id", l.id}, {"features", l.features}});
  j["populations"] = nlohmann::ordered_json::array();
  for (const auto& p : m.populations) {
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& f : p.files) files.push_back({{"checkpoint", f.checkpoint}, {"path", f.path}});
    j["populations"].push_back({{"tag", p.population.name()}, {"files", std::move(files)}});
  }
  if (!m.meta.is_null()) j["meta"] = m.meta;
  return j;
}

inline RunManifest from_json(const nlohmann::ordered_json& j) {
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    m.checkpoints = j.at("checkpoints").get<std::vector<std::uint64_t>>();
    for (const auto& l : j.at("layers")) {
      m.layers.push_back({l.at("id").get<std::uint32_t>(), l.at("features").get<std::uint32_t>()});
    }
    for (const auto& p : j.at("populations")) {
      PopulationFiles pf{Population::parse(p.at("tag").get<std::string>()), {}};
      for (const auto& f : p.at("files")) {
        pf.files.push_back({f.at("checkpoint").get<std::uint64_t>(), f.at("path").get<std::string>()});
      }
      m.populations.push_back(std::move(pf));
    }
    if (j.contains("meta")) m.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_manifest, e.what());
  }
  validate(m);
  return m;
}

inline void write(const RunManifest& m, const std::filesystem::path& path) {
  validate(m);
  io::write_file_atomic(path, to_json(m).dump(2) + "\n");
}

}  // namespace manifest

/// A loaded manifest plus its base directory. Every file's header has been
/// checked against the manifest; payloads are read on demand.
class Run {
 public:
  static Run load(const std::filesystem::path& manifest_path) {
    const std::string text = io::read_file(manifest_path);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::invalid_manifest, manifest_path.string() + ": " + e.what());
    }
    Run run(manifest::from_json(j), manifest_path.parent_path());
    run.check_files();
    return run;
  }

  Run(RunManifest manifest, std::filesystem::path base_dir)
      : manifest_(std::move(manifest)), base_dir_(std::move(base_dir)) {
    manifest::validate(manifest_);
  }

  const RunManifest& manifest() const { return manifest_; }
  const std::vector<std::uint64_t>& checkpoints() const { return manifest_.checkpoints; }
  std::size_t layer_count() const { return manifest_.layers.size(); }
  bool has(const Population& population) const { return manifest_.find(population) != nullptr; }

  std::filesystem::path path_of(const Population& population, std::uint64_t checkpoint) const {
    const PopulationFiles* files = manifest_.find(population);
    if (files == nullptr) {
      throw Error(ErrorKind::checkpoint_gap, "population " + population.name() + " not in run");
    }
    for (const auto& f : files->files) {
      if (f.checkpoint == checkpoint) {
        std::filesystem::path p(f.path);
        return p.is_absolute() ? p : base_dir_ / p;
      }
    }
    throw Error(ErrorKind::checkpoint_gap, "no file for " + manifest::pair_name(population, checkpoint));
  }

  /// Reads and fully validates one snapshot.
  ActivationSnapshot snapshot(const Population& population, std::uint64_t checkpoint) const {
    const auto path = path_of(population, checkpoint);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::missing_file,
                  manifest::pair_name(population, checkpoint) + " -> " + path.string());
    }
    ActivationSnapshot snap = read_snapshot(path);
    std::vector<LayerShape> shapes;
    for (const auto& l : snap.layers) shapes.push_back({l.layer_id, l.n_examples, l.n_features});
    check_header(population, checkpoint, path, snap.checkpoint, snap.population, shapes);
    return snap;
  }

 private:
  void check_files() const {
    for (const auto& p : manifest_.populations) {
      for (const auto& f : p.files) {
        const auto path = path_of(p.population, f.checkpoint);
        if (!std::filesystem::exists(path)) {
          throw Error(ErrorKind::missing_file,
                      manifest::pair_name(p.population, f.checkpoint) + " -> " + path.string());
        }
        const SnapshotHeader h = read_snapshot_header(path);
        check_header(p.population, f.checkpoint, path, h.checkpoint, h.population, h.layers);
      }
    }
  }

  void check_header(const Population& population, std::uint64_t checkpoint,
                    const std::filesystem::path& path, std::uint64_t file_checkpoint,
                    PopulationKind file_population, const std::vector<LayerShape>& shapes) const {
    const std::string where = manifest::pair_name(population, checkpoint) + " " + path.string();
    if (file_checkpoint != checkpoint) {
      throw Error(ErrorKind::invalid_manifest,
                  where + ": file records checkpoint " + std::to_string(file_checkpoint));
    }
    if (file_population != population.kind) {
      throw Error(ErrorKind::invalid_manifest, where + ": file records a different population tag");
    }
    if (shapes.size() != manifest_.layers.size()) {
      throw Error(ErrorKind::dimension_drift,
                  where + ": " + std::to_string(shapes.size()) + " layers, manifest declares " +
                      std::to_string(manifest_.layers.size()));
    }
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      if (shapes[l].n_features != manifest_.layers[l].features) {
        throw Error(ErrorKind::dimension_drift,
                    where + ": layer " + std::to_string(l) + " has D=" +
                        std::to_string(shapes[l].n_features) + ", manifest declares D=" +
                        std::to_string(manifest_.layers[l].features));
      }
    }
  }

  RunManifest manifest_;
  std::filesystem::path base_dir_;
};

inline Run load_run(const std::filesystem::path& manifest_path) { return Run::load(manifest_path); }

}  // namespace abe
