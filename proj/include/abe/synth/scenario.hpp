// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Parametric trajectory scenarios with a planted critical (layer, moment,
// breakpoint). Every source slice drifts linearly. The target copies the
// source except on the planted slice, which turns around after the
// breakpoint and runs with negated slope to the end of the axis.
//
// The turned-around segment is
//
//   target(p) = source(p_b) + slope * (p_last - p - 1/2),   p > p_b
//
// with positions p in checkpoint ranks. The half-step offset makes the
// first post-breakpoint value drop below the pre-breakpoint trend, so
// windows that start before p_b correlate worse than the window starting
// at p_b. Without it the span weighting pulls t_hat one or two
// checkpoints early.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abe/baselines.hpp"
#include "abe/error.hpp"
#include "abe/io.hpp"
#include "abe/moments.hpp"
#include "abe/snapshot.hpp"
#include "abe/synth/rng.hpp"
#include "abe/synth/run_writer.hpp"
#include "abe/trajectory.hpp"

namespace abe::synth {

struct ScenarioSpec {
  std::size_t layers = 4;
  std::size_t checkpoints = 11;  // T; the axis is 0, stride, ..., (T-1)*stride
  std::uint64_t checkpoint_stride = 1;
  std::size_t planted_layer = 0;
  Moment planted_moment = Moment::m1;
  std::uint64_t breakpoint = 5;  // a checkpoint index on the axis
  double noise_sigma = 0.0;      // absolute deviation of i.i.d. Gaussian noise
  double drift_slope = 1.0;      // slope magnitudes are drawn from [s, 2s]
  bool planted = true;           // false: target is a positive affine copy
  std::uint64_t seed = 0;

  std::vector<std::uint64_t> axis() const {
    std::vector<std::uint64_t> a(checkpoints);
    for (std::size_t k = 0; k < checkpoints; ++k) a[k] = k * checkpoint_stride;
    return a;
  }

  void validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::invalid_argument, msg); };
    if (layers == 0) bad("scenario needs at least one layer");
    if (checkpoints < 3) bad("scenario needs at least 3 checkpoints");
    if (checkpoint_stride == 0) bad("checkpoint stride must be positive");
    if (!(drift_slope > 0.0) || !std::isfinite(drift_slope)) bad("drift slope must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise sigma must be >= 0");
    if (!planted) return;
    if (planted_layer >= layers) {
      bad("planted layer " + std::to_string(planted_layer) + " outside [0, " +
          std::to_string(layers) + ")");
    }
    if (static_cast<std::size_t>(planted_moment) >= kMomentCount) bad("planted moment outside m1..m4");
    const std::uint64_t last = (checkpoints - 1) * checkpoint_stride;
    if (breakpoint % checkpoint_stride != 0 || breakpoint == 0 || breakpoint >= last) {
      bad("breakpoint " + std::to_string(breakpoint) + " must be a checkpoint strictly inside (0, " +
          std::to_string(last) + ")");
    }
  }
};

/// The planted triple. Without a planted divergence the expected report is
/// diverged = false and t_hat = t_valid_star.
struct GroundTruth {
  bool planted = true;
  std::size_t layer = 0;
  Moment moment = Moment::m1;
  std::uint64_t breakpoint = 0;
  std::uint64_t t_valid_star = 0;
};

struct Scenario {
  ScenarioSpec spec;
  Trajectory source;
  Trajectory target;
  GroundTruth truth;
  std::vector<double> slopes;      // per slice, layer-major, before noise
  std::vector<double> intercepts;  // source(p) = intercept + slope * p
};

inline Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t T = spec.checkpoints;
  const std::size_t L = spec.layers;
  const std::size_t slices = L * kMomentCount;
  auto idx = [&](std::size_t t, std::size_t k) { return t * slices + k; };

  std::vector<double> slope(slices), intercept(slices);
  for (std::size_t k = 0; k < slices; ++k) {
    slope[k] = rng.sign() * rng.uniform(spec.drift_slope, 2.0 * spec.drift_slope);
    intercept[k] = rng.uniform(-5.0, 5.0) * spec.drift_slope;
  }
  std::vector<double> gain(slices, 1.0), offset(slices, 0.0);
  if (!spec.planted) {
    for (std::size_t k = 0; k < slices; ++k) {
      gain[k] = rng.uniform(0.5, 2.0);
      offset[k] = rng.uniform(-1.0, 1.0) * spec.drift_slope;
    }
  }

  std::vector<double> source(T * slices), target(T * slices);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < slices; ++k) {
      source[idx(t, k)] = intercept[k] + slope[k] * static_cast<double>(t);
      target[idx(t, k)] = gain[k] * source[idx(t, k)] + offset[k];
    }
  }
  const std::size_t last = T - 1;
  const std::size_t bp = static_cast<std::size_t>(spec.breakpoint / spec.checkpoint_stride);
  if (spec.planted) {
    const std::size_t k = spec.planted_layer * kMomentCount + static_cast<std::size_t>(spec.planted_moment);
    for (std::size_t t = bp + 1; t < T; ++t) {
      target[idx(t, k)] =
          source[idx(bp, k)] + slope[k] * (static_cast<double>(last - t) - 0.5);
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (double& v : source) v += rng.normal(0.0, spec.noise_sigma);
    for (double& v : target) v += rng.normal(0.0, spec.noise_sigma);
  }

  const auto axis = spec.axis();
  GroundTruth truth;
  truth.planted = spec.planted;
  truth.layer = spec.planted ? spec.planted_layer : 0;
  truth.moment = spec.planted ? spec.planted_moment : Moment::m1;
  truth.breakpoint = spec.planted ? spec.breakpoint : axis.back();
  truth.t_valid_star = axis.back();
  return Scenario{spec, Trajectory(Population::source_valid(), axis, L, std::move(source)),
                  Trajectory(Population::target(), axis, L, std::move(target)), truth,
                  std::move(slope), std::move(intercept)};
}

inline nlohmann::ordered_json to_json(const GroundTruth& g) {
  nlohmann::ordered_json j;
  j["planted"] = g.planted;
  j["critical_layer"] = g.layer;
  j["critical_moment"] = std::string(to_string(g.moment));
  j["breakpoint"] = g.breakpoint;
  j["t_valid_star"] = g.t_valid_star;
  return j;
}

namespace detail {

/// Features per layer and rows per population of materialized scenarios.
inline constexpr std::size_t kScenarioFeatures = 16;
inline constexpr std::size_t kScenarioRows = 2;

/// Two rows z = mu +/- delta in R^16 whose aggregated moments equal
/// (m1, m2, m3, m4). mu carries m1 along the all-ones direction and the
/// rest of m2 along e = (e0 - e1)/sqrt2; delta carries the row-sum spread
/// along ones and the remaining variance along f = (e2 - e3)/sqrt2.
/// Requires m2 >= m1^2/D, m4 + m3 >= m1^2 and m3 - m2 >= (m4 + m3 - m1^2)/D.
inline std::vector<float> rows_with_moments(double m1, double m2, double m3, double m4) {
  const double D = static_cast<double>(kScenarioFeatures);
  const double a = std::sqrt(m2 - m1 * m1 / D);
  const double s_delta = std::sqrt(m4 + m3 - m1 * m1);
  const double b = std::sqrt((m3 - m2) - s_delta * s_delta / D);
  std::vector<double> mu(kScenarioFeatures, m1 / D), delta(kScenarioFeatures, s_delta / D);
  mu[0] += a / std::numbers::sqrt2;
  mu[1] -= a / std::numbers::sqrt2;
  delta[2] += b / std::numbers::sqrt2;
  delta[3] -= b / std::numbers::sqrt2;
  std::vector<float> out(kScenarioRows * kScenarioFeatures);
  for (std::size_t i = 0; i < kScenarioFeatures; ++i) {
    out[i] = static_cast<float>(mu[i] + delta[i]);
    out[kScenarioFeatures + i] = static_cast<float>(mu[i] - delta[i]);
  }
  return out;
}

}  // namespace detail

/// Writes the scenario as a run directory: ASNAP snapshots whose moments
/// reproduce the trajectories up to a positive affine map per slice,
/// manifest.json, valid_curve.csv (rising, so t_valid_star is the last
/// checkpoint), target_curve.csv (peaking at the breakpoint) and
/// ground_truth.json. Positive affine maps leave every correlation, and so
/// the report, unchanged. Returns the manifest path.
inline std::filesystem::path write_scenario(const Scenario& s, const std::filesystem::path& dir) {
  const std::size_t T = s.source.time_steps();
  const std::size_t L = s.source.layers();
  // Per-slice map of both populations' values into [-1, 1].
  std::vector<double> mid(L * kMomentCount, 0.0), half(L * kMomentCount, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    for (Moment m : kMoments) {
      double lo = s.source.at(0, l, m), hi = lo;
      for (std::size_t t = 0; t < T; ++t) {
        for (const Trajectory* tr : {&s.source, &s.target}) {
          lo = std::min(lo, tr->at(t, l, m));
          hi = std::max(hi, tr->at(t, l, m));
        }
      }
      const std::size_t k = l * kMomentCount + static_cast<std::size_t>(m);
      mid[k] = 0.5 * (hi + lo);
      half[k] = 0.5 * (hi - lo);
    }
  }
  auto unit = [&](const Trajectory& tr, std::size_t t, std::size_t l, Moment m) {
    const std::size_t k = l * kMomentCount + static_cast<std::size_t>(m);
    return half[k] > 0.0 ? (tr.at(t, l, m) - mid[k]) / half[k] : 0.0;
  };

  RunWriter writer(dir, "scenario-" + std::to_string(s.spec.seed),
                   std::vector<std::uint32_t>(L, detail::kScenarioFeatures));
  for (std::size_t t = 0; t < T; ++t) {
    for (const Trajectory* tr : {&s.source, &s.target}) {
      ActivationSnapshot snap{tr->checkpoints()[t], tr->population().kind, {}};
      for (std::size_t l = 0; l < L; ++l) {
        snap.layers.push_back(
            {static_cast<std::uint32_t>(l), detail::kScenarioRows, detail::kScenarioFeatures,
             detail::rows_with_moments(unit(*tr, t, l, Moment::m1), 2.0 + unit(*tr, t, l, Moment::m2),
                                       5.0 + unit(*tr, t, l, Moment::m3),
                                       3.0 + unit(*tr, t, l, Moment::m4))});
      }
      writer.add(snap, tr->population());
    }
  }
  writer.set_meta({{"generator", "scenario"}, {"seed", s.spec.seed}});
  const auto manifest_path = writer.finish();

  const auto& axis = s.source.checkpoints();
  const std::size_t bp = std::lower_bound(axis.begin(), axis.end(), s.truth.breakpoint) - axis.begin();
  AccuracyCurve valid{axis, {}, CurveKind::maximize};
  AccuracyCurve target{axis, {}, CurveKind::maximize};
  for (std::size_t t = 0; t < T; ++t) {
    valid.values.push_back(0.5 + 0.25 * static_cast<double>(t) / static_cast<double>(T - 1));
    const double dist = t > bp ? static_cast<double>(t - bp) : static_cast<double>(bp - t);
    target.values.push_back(0.75 - 0.25 * dist / static_cast<double>(T - 1));
  }
  curve_csv::write(valid, dir / "valid_curve.csv");
  curve_csv::write(target, dir / "target_curve.csv");
  io::write_file_atomic(dir / "ground_truth.json", to_json(s.truth).dump(2) + "\n");
  return manifest_path;
}

}  // namespace abe::synth
