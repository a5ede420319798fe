// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Divergence between the target and source trajectories, and the stopping
// time derived from it.
//
// For a slice (l, m) and a window (t1, t2] of observed checkpoints,
//
//   d = -rho(target, source over t1 < t <= t2) * (t2 - t1)
//
// The critical slice maximizes max_t d(t, t_valid*) over all (l, m); the
// stopping time is the window start t that attains that maximum. When no
// window shows positive divergence the run stops at t_valid*.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abe/error.hpp"
#include "abe/moments.hpp"
#include "abe/parallel.hpp"
#include "abe/trajectory.hpp"

namespace abe {

/// How (t2 - t1) is measured: in observed steps (rank) or raw checkpoint
/// index units.
enum class IntervalUnit { rank, raw };

struct DivergenceOptions {
  IntervalUnit unit = IntervalUnit::rank;
};

/// Windows must hold at least this many observed checkpoints.
inline constexpr std::size_t kMinWindowPoints = 2;

struct DivergenceScore {
  std::size_t layer = 0;
  Moment moment = Moment::m1;
  std::uint64_t t1 = 0;
  std::uint64_t t2 = 0;
  std::optional<double> rho;  // nullopt when either side is constant
  double score = 0.0;

  friend bool operator==(const DivergenceScore&, const DivergenceScore&) = default;
};

struct DivergenceReport {
  std::size_t critical_layer = 0;
  Moment critical_moment = Moment::m1;
  std::uint64_t t_hat = 0;
  std::uint64_t t_valid_star = 0;
  double best_score = 0.0;
  std::vector<DivergenceScore> all_scores;  // per-(l, m) maxima, layer-major
  bool diverged = false;

  friend bool operator==(const DivergenceReport&, const DivergenceReport&) = default;
};

/// Sample Pearson correlation; nullopt if either series has zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::invalid_argument, "pearson: series lengths differ (" +
                                                 std::to_string(a.size()) + " vs " +
                                                 std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw Error(ErrorKind::window_too_small, "pearson needs at least 2 points");
  const auto [a_lo, a_hi] = std::minmax_element(a.begin(), a.end());
  const auto [b_lo, b_hi] = std::minmax_element(b.begin(), b.end());
  if (*a_lo == *a_hi || *b_lo == *b_hi) return std::nullopt;
  // Two distinct points are exactly collinear; the general formula can land
  // an ulp short of +/-1.
  if (a.size() == 2) return (a[1] > a[0]) == (b[1] > b[0]) ? 1.0 : -1.0;

  const double n = static_cast<double>(a.size());
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    mean_a += a[k];
    mean_b += b[k];
  }
  mean_a /= n;
  mean_b /= n;
  double s_ab = 0.0;
  double s_aa = 0.0;
  double s_bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - mean_a;
    const double db = b[k] - mean_b;
    s_ab += da * db;
    s_aa += da * da;
    s_bb += db * db;
  }
  if (s_aa <= 0.0 || s_bb <= 0.0) return std::nullopt;
  return std::clamp(s_ab / std::sqrt(s_aa * s_bb), -1.0, 1.0);
}

namespace detail {

inline std::size_t position_of(const std::vector<std::uint64_t>& checkpoints, std::uint64_t t,
                               std::string_view what) {
  const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), t);
  if (it == checkpoints.end() || *it != t) {
    throw Error(ErrorKind::out_of_range,
                std::string(what) + " " + std::to_string(t) +
                    " is not an observed checkpoint (observed: " +
                    std::to_string(checkpoints.front()) + ".." +
                    std::to_string(checkpoints.back()) + ", " +
                    std::to_string(checkpoints.size()) + " checkpoints)");
  }
  return static_cast<std::size_t>(it - checkpoints.begin());
}

inline double interval_length(const std::vector<std::uint64_t>& checkpoints, std::size_t p1,
                              std::size_t p2, IntervalUnit unit) {
  if (unit == IntervalUnit::rank) return static_cast<double>(p2 - p1);
  return static_cast<double>(checkpoints[p2] - checkpoints[p1]);
}

/// Score of window (p1, p2] given as positions into the shared axis.
inline DivergenceScore score_window(std::span<const double> target, std::span<const double> source,
                                    const std::vector<std::uint64_t>& checkpoints, std::size_t p1,
                                    std::size_t p2, const DivergenceOptions& options) {
  DivergenceScore s;
  s.t1 = checkpoints[p1];
  s.t2 = checkpoints[p2];
  s.rho = pearson(target.subspan(p1 + 1, p2 - p1), source.subspan(p1 + 1, p2 - p1));
  // Adding 0.0 folds -0.0 into +0.0 so reports never print "-0".
  s.score = s.rho ? -*s.rho * interval_length(checkpoints, p1, p2, options.unit) + 0.0 : 0.0;
  return s;
}

/// Best window (t, t2] over every admissible start t, earliest on ties.
inline DivergenceScore best_window(std::span<const double> target, std::span<const double> source,
                                   const std::vector<std::uint64_t>& checkpoints, std::size_t p2,
                                   const DivergenceOptions& options) {
  DivergenceScore best = score_window(target, source, checkpoints, 0, p2, options);
  for (std::size_t p1 = 1; p1 + kMinWindowPoints <= p2; ++p1) {
    DivergenceScore s = score_window(target, source, checkpoints, p1, p2, options);
    if (s.score > best.score) best = s;
  }
  return best;
}

inline void check_compatible(const Trajectory& target, const Trajectory& source) {
  if (target.checkpoints() != source.checkpoints()) {
    throw Error(ErrorKind::dimension_mismatch, "target and source trajectories use different checkpoints");
  }
  if (target.layers() != source.layers()) {
    throw Error(ErrorKind::dimension_mismatch,
                "target has " + std::to_string(target.layers()) + " layers, source has " +
                    std::to_string(source.layers()));
  }
}

inline std::size_t valid_position(const std::vector<std::uint64_t>& checkpoints,
                                  std::uint64_t t_valid_star) {
  const std::size_t p = position_of(checkpoints, t_valid_star, "t_valid_star");
  if (p < 1) {
    throw Error(ErrorKind::degenerate_axis,
                "t_valid_star " + std::to_string(t_valid_star) +
                    " is the first checkpoint; at least 2 checkpoints must lie in [t0, t_valid_star]");
  }
  return p;
}

}  // namespace detail

/// d over the window (t1, t2] of two series sharing one checkpoint axis.
inline DivergenceScore divergence_score(const Series& target, const Series& source,
                                        std::uint64_t t1, std::uint64_t t2,
                                        const DivergenceOptions& options = {}) {
  if (target.checkpoints != source.checkpoints || target.values.size() != source.values.size() ||
      target.values.size() != target.checkpoints.size()) {
    throw Error(ErrorKind::dimension_mismatch, "series do not share a checkpoint axis");
  }
  if (target.checkpoints.empty()) throw Error(ErrorKind::window_too_small, "empty series");
  const std::size_t p1 = detail::position_of(target.checkpoints, t1, "t1");
  const std::size_t p2 = detail::position_of(target.checkpoints, t2, "t2");
  if (p2 < p1 + kMinWindowPoints) {
    throw Error(ErrorKind::window_too_small,
                "window (" + std::to_string(t1) + ", " + std::to_string(t2) + "] holds " +
                    std::to_string(p2 > p1 ? p2 - p1 : 0) + " checkpoint(s), need " +
                    std::to_string(kMinWindowPoints));
  }
  DivergenceScore s =
      detail::score_window(target.values, source.values, target.checkpoints, p1, p2, options);
  s.layer = target.layer;
  s.moment = target.moment;
  return s;
}

/// Per-slice maxima for every (layer, moment), layer-major. Empty when no
/// window (t, t_valid_star] holds the minimum number of checkpoints.
inline std::vector<DivergenceScore> slice_maxima(const Trajectory& target, const Trajectory& source,
                                                 std::uint64_t t_valid_star,
                                                 const DivergenceOptions& options = {}) {
  detail::check_compatible(target, source);
  const auto& checkpoints = target.checkpoints();
  const std::size_t p2 = detail::valid_position(checkpoints, t_valid_star);
  if (p2 < kMinWindowPoints) return {};
  const std::size_t slices = target.layers() * kMomentCount;
  std::vector<DivergenceScore> maxima(slices);
  parallel_for(slices, [&](std::size_t k) {
    const std::size_t layer = k / kMomentCount;
    const Moment moment = kMoments[k % kMomentCount];
    const Series ts = slice(target, layer, moment);
    const Series ss = slice(source, layer, moment);
    DivergenceScore best = detail::best_window(ts.values, ss.values, checkpoints, p2, options);
    best.layer = layer;
    best.moment = moment;
    maxima[k] = best;
  });
  return maxima;
}

struct CriticalSlice {
  std::size_t layer = 0;
  Moment moment = Moment::m1;
  DivergenceScore best;
  std::vector<DivergenceScore> per_slice;
};

/// Argmax over (l, m) of the per-slice maxima. Ties resolve to the lower
/// layer, then the lower moment, then the earlier window start.
inline CriticalSlice find_critical(const Trajectory& target, const Trajectory& source,
                                   std::uint64_t t_valid_star,
                                   const DivergenceOptions& options = {}) {
  CriticalSlice result;
  result.per_slice = slice_maxima(target, source, t_valid_star, options);
  if (result.per_slice.empty()) return result;  // no admissible window: score 0
  std::size_t best = 0;
  for (std::size_t k = 1; k < result.per_slice.size(); ++k) {
    if (result.per_slice[k].score > result.per_slice[best].score) best = k;
  }
  result.best = result.per_slice[best];
  result.layer = result.best.layer;
  result.moment = result.best.moment;
  return result;
}

inline DivergenceReport stopping_time(const Trajectory& target, const Trajectory& source,
                                      std::uint64_t t_valid_star,
                                      const DivergenceOptions& options = {}) {
  CriticalSlice critical = find_critical(target, source, t_valid_star, options);
  DivergenceReport report;
  report.critical_layer = critical.layer;
  report.critical_moment = critical.moment;
  report.t_valid_star = t_valid_star;
  report.best_score = critical.best.score;
  report.diverged = critical.best.score > 0.0;
  report.t_hat = report.diverged ? critical.best.t1 : t_valid_star;
  report.all_scores = std::move(critical.per_slice);
  return report;
}

inline nlohmann::ordered_json to_json(const DivergenceScore& s) {
  nlohmann::ordered_json j;
  j["layer"] = s.layer;
  j["moment"] = std::string(to_string(s.moment));
  j["t1"] = s.t1;
  j["t2"] = s.t2;
  j["rho"] = s.rho ? nlohmann::ordered_json(*s.rho) : nlohmann::ordered_json(nullptr);
  j["score"] = s.score;
  return j;
}

inline nlohmann::ordered_json to_json(const DivergenceReport& r) {
  nlohmann::ordered_json j;
  j["critical_layer"] = r.critical_layer;
  j["critical_moment"] = std::string(to_string(r.critical_moment));
  j["t_hat"] = r.t_hat;
  j["t_valid_star"] = r.t_valid_star;
  j["diverged"] = r.diverged;
  j["best_score"] = r.best_score;
  j["scores"] = nlohmann::ordered_json::array();
  for (const auto& s : r.all_scores) j["scores"].push_back(to_json(s));
  return j;
}

inline DivergenceReport report_from_json(const nlohmann::ordered_json& j) {
  auto moment_of = [](const nlohmann::ordered_json& v) {
    const auto m = parse_moment(v.get<std::string>());
    if (!m) throw Error(ErrorKind::invalid_argument, "unknown moment " + v.dump());
    return *m;
  };
  DivergenceReport r;
  try {
    r.critical_layer = j.at("critical_layer").get<std::size_t>();
    r.critical_moment = moment_of(j.at("critical_moment"));
    r.t_hat = j.at("t_hat").get<std::uint64_t>();
    r.t_valid_star = j.at("t_valid_star").get<std::uint64_t>();
    r.diverged = j.at("diverged").get<bool>();
    r.best_score = j.at("best_score").get<double>();
    if (j.contains("scores")) {
      for (const auto& s : j.at("scores")) {
        DivergenceScore d;
        d.layer = s.at("layer").get<std::size_t>();
        d.moment = moment_of(s.at("moment"));
        d.t1 = s.at("t1").get<std::uint64_t>();
        d.t2 = s.at("t2").get<std::uint64_t>();
        if (!s.at("rho").is_null()) d.rho = s.at("rho").get<double>();
        d.score = s.at("score").get<double>();
        r.all_scores.push_back(d);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("malformed divergence report: ") + e.what());
  }
  if (r.t_hat > r.t_valid_star) {
    throw Error(ErrorKind::invalid_argument, "report has t_hat after t_valid_star");
  }
  return r;
}

}  // namespace abe
