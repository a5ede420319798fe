// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "abe/error.hpp"
#include "abe/format.hpp"
#include "abe/manifest.hpp"
#include "abe/moments.hpp"
#include "abe/parallel.hpp"

namespace abe {

/// One (layer, moment) component of a trajectory over time.
struct Series {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> values;
  std::size_t layer = 0;
  Moment moment = Moment::m1;

  std::size_t size() const { return values.size(); }
};

/// Aggregated moments of one population over time: T checkpoints x L layers
/// x 4 moments, stored dense.
class Trajectory {
 public:
  Trajectory(Population population, std::vector<std::uint64_t> checkpoints, std::size_t layers,
             std::vector<double> values)
      : population_(std::move(population)),
        checkpoints_(std::move(checkpoints)),
        layers_(layers),
        values_(std::move(values)) {
    if (checkpoints_.empty() || layers_ == 0) {
      throw Error(ErrorKind::invalid_argument, "trajectory needs at least one checkpoint and layer");
    }
    for (std::size_t k = 1; k < checkpoints_.size(); ++k) {
      if (checkpoints_[k] <= checkpoints_[k - 1]) {
        throw Error(ErrorKind::invalid_argument, "trajectory checkpoints not strictly increasing");
      }
    }
    if (values_.size() != checkpoints_.size() * layers_ * kMomentCount) {
      throw Error(ErrorKind::dimension_mismatch, "trajectory values do not match T x L x 4");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorKind::non_finite, "trajectory entry is not finite");
    }
  }

  static Trajectory from_moments(Population population, std::vector<std::uint64_t> checkpoints,
                                 const std::vector<std::vector<AggregatedMoments>>& moments) {
    const std::size_t layers = moments.empty() ? 0 : moments.front().size();
    std::vector<double> values;
    values.reserve(moments.size() * layers * kMomentCount);
    for (const auto& per_layer : moments) {
      if (per_layer.size() != layers) {
        throw Error(ErrorKind::dimension_drift, "layer count changes across checkpoints");
      }
      for (const auto& m : per_layer) {
        for (Moment k : kMoments) values.push_back(m[k]);
      }
    }
    return Trajectory(std::move(population), std::move(checkpoints), layers, std::move(values));
  }

  const Population& population() const { return population_; }
  const std::vector<std::uint64_t>& checkpoints() const { return checkpoints_; }
  std::size_t time_steps() const { return checkpoints_.size(); }
  std::size_t layers() const { return layers_; }
  const std::vector<double>& values() const { return values_; }

  /// Entry at time position `t` (rank in the checkpoint list, not the
  /// checkpoint index itself).
  double at(std::size_t t, std::size_t layer, Moment m) const {
    return values_[(t * layers_ + layer) * kMomentCount + static_cast<std::size_t>(m)];
  }

  AggregatedMoments moments_at(std::size_t t, std::size_t layer) const {
    return {at(t, layer, Moment::m1), at(t, layer, Moment::m2), at(t, layer, Moment::m3),
            at(t, layer, Moment::m4)};
  }

  /// The first `count` checkpoints.
  Trajectory prefix(std::size_t count) const {
    if (count == 0 || count > checkpoints_.size()) {
      throw Error(ErrorKind::out_of_range, "prefix length " + std::to_string(count) +
                                               " outside [1, " +
                                               std::to_string(checkpoints_.size()) + "]");
    }
    return Trajectory(population_,
                      {checkpoints_.begin(), checkpoints_.begin() + static_cast<long>(count)},
                      layers_,
                      {values_.begin(),
                       values_.begin() + static_cast<long>(count * layers_ * kMomentCount)});
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  Population population_;
  std::vector<std::uint64_t> checkpoints_;
  std::size_t layers_;
  std::vector<double> values_;
};

/// Computes the moments of every (checkpoint, layer) of one population.
/// Snapshots are loaded in parallel; each checkpoint fills its own slot.
inline Trajectory build_trajectory(const Run& run, const Population& population) {
  if (!run.has(population)) {
    throw Error(ErrorKind::checkpoint_gap, "population " + population.name() + " not in run");
  }
  const auto& checkpoints = run.checkpoints();
  const std::size_t layers = run.layer_count();
  std::vector<std::vector<AggregatedMoments>> moments(checkpoints.size());
  parallel_for(checkpoints.size(), [&](std::size_t t) {
    const ActivationSnapshot snap = run.snapshot(population, checkpoints[t]);
    std::vector<AggregatedMoments> per_layer;
    per_layer.reserve(layers);
    for (const auto& layer : snap.layers) per_layer.push_back(compute_moments(layer));
    moments[t] = std::move(per_layer);
  });
  return Trajectory::from_moments(population, checkpoints, moments);
}

inline Series slice(const Trajectory& traj, std::size_t layer, Moment moment) {
  if (layer >= traj.layers()) {
    throw Error(ErrorKind::out_of_range, "layer " + std::to_string(layer) + " outside [0, " +
                                             std::to_string(traj.layers()) + ")");
  }
  if (static_cast<std::size_t>(moment) >= kMomentCount) {
    throw Error(ErrorKind::out_of_range, "moment index outside m1..m4");
  }
  Series s;
  s.checkpoints = traj.checkpoints();
  s.layer = layer;
  s.moment = moment;
  s.values.reserve(traj.time_steps());
  for (std::size_t t = 0; t < traj.time_steps(); ++t) s.values.push_back(traj.at(t, layer, moment));
  return s;
}

/// CSV with header checkpoint,layer,m1,m2,m3,m4 and one row per (t, l).
inline std::string to_csv(const Trajectory& traj) {
  std::string out = "checkpoint,layer,m1,m2,m3,m4\n";
  for (std::size_t t = 0; t < traj.time_steps(); ++t) {
    for (std::size_t l = 0; l < traj.layers(); ++l) {
      out += std::to_string(traj.checkpoints()[t]) + "," + std::to_string(l);
      for (Moment m : kMoments) out += "," + fmt::real(traj.at(t, l, m));
      out += "\n";
    }
  }
  return out;
}

}  // namespace abe
