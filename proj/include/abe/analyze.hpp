// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end analysis of a recorded run: trajectories of both populations
// and the stopping report.

#pragma once

#include <cstdint>
#include <filesystem>

#include "abe/divergence.hpp"
#include "abe/manifest.hpp"
#include "abe/trajectory.hpp"

namespace abe {

struct Analysis {
  Trajectory source;
  Trajectory target;
  DivergenceReport report;
};

/// Requires populations source_valid and target in the run.
inline Analysis analyze_run(const Run& run, std::uint64_t t_valid_star,
                            const DivergenceOptions& options = {}) {
  for (const auto& p : {Population::source_valid(), Population::target()}) {
    if (!run.has(p)) {
      throw Error(ErrorKind::invalid_manifest, "run has no " + p.name() + " population");
    }
  }
  // Check the axis before reading any payload.
  detail::valid_position(run.checkpoints(), t_valid_star);
  Trajectory source = build_trajectory(run, Population::source_valid());
  Trajectory target = build_trajectory(run, Population::target());
  DivergenceReport report = stopping_time(target, source, t_valid_star, options);
  return {std::move(source), std::move(target), std::move(report)};
}

inline Analysis analyze_run(const std::filesystem::path& manifest_path, std::uint64_t t_valid_star,
                            const DivergenceOptions& options = {}) {
  return analyze_run(Run::load(manifest_path), t_valid_star, options);
}

}  // namespace abe
