// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Curve-based stopping (validation baseline, oracle, any "stop at the best
// point of this curve" rule) and gap-closure evaluation of a stopping report.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abe/divergence.hpp"
#include "abe/error.hpp"
#include "abe/format.hpp"
#include "abe/io.hpp"

namespace abe {

enum class CurveKind { maximize, minimize };

/// Accuracy (maximize) or loss (minimize) per checkpoint.
struct AccuracyCurve {
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> values;
  CurveKind kind = CurveKind::maximize;

  void validate() const {
    if (checkpoints.size() != values.size()) {
      throw Error(ErrorKind::invalid_curve, "curve has " + std::to_string(checkpoints.size()) +
                                                " checkpoints but " +
                                                std::to_string(values.size()) + " values");
    }
    for (std::size_t k = 1; k < checkpoints.size(); ++k) {
      if (checkpoints[k] <= checkpoints[k - 1]) {
        throw Error(ErrorKind::invalid_curve,
                    "curve checkpoints not strictly increasing at row " + std::to_string(k + 1));
      }
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!std::isfinite(values[k])) {
        throw Error(ErrorKind::invalid_curve,
                    "non-finite value at checkpoint " + std::to_string(checkpoints[k]));
      }
    }
  }

  /// Value at checkpoint `t`, which must be on the curve's axis.
  double at(std::uint64_t t) const {
    const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), t);
    if (it == checkpoints.end() || *it != t) {
      throw Error(ErrorKind::out_of_range,
                  "checkpoint " + std::to_string(t) + " is not on the curve's axis");
    }
    return values[static_cast<std::size_t>(it - checkpoints.begin())];
  }
};

/// Checkpoint of the curve's maximum (or minimum); earliest on ties.
inline std::uint64_t stop_at_extremum(const AccuracyCurve& curve) {
  curve.validate();
  if (curve.values.empty()) throw Error(ErrorKind::invalid_curve, "empty curve");
  std::size_t best = 0;
  for (std::size_t k = 1; k < curve.values.size(); ++k) {
    const bool better = curve.kind == CurveKind::maximize ? curve.values[k] > curve.values[best]
                                                          : curve.values[k] < curve.values[best];
    if (better) best = k;
  }
  return curve.checkpoints[best];
}

/// Target-curve values at the ABE stop, the baseline stop and the oracle
/// optimum t* = argmax of the target curve.
///
///   gap_closure = (acc_at_abe - acc_at_baseline) / (acc_optimal - acc_at_baseline)
///
/// For minimize curves the differences are sign-flipped so that 1 still
/// means "stopped at the optimum". A zero denominator (baseline already
/// optimal) gives gap_closure 0 and baseline_optimal = true.
struct EvalSummary {
  double acc_at_abe = 0.0;
  double acc_at_baseline = 0.0;
  double acc_optimal = 0.0;
  double gap_closure = 0.0;
  std::uint64_t t_hat = 0;
  std::uint64_t t_valid_star = 0;
  std::uint64_t t_star = 0;
  bool baseline_optimal = false;
};

inline EvalSummary evaluate(const DivergenceReport& report, const AccuracyCurve& target_curve) {
  target_curve.validate();
  EvalSummary s;
  s.t_hat = report.t_hat;
  s.t_valid_star = report.t_valid_star;
  s.t_star = stop_at_extremum(target_curve);
  s.acc_at_abe = target_curve.at(report.t_hat);
  s.acc_at_baseline = target_curve.at(report.t_valid_star);
  s.acc_optimal = target_curve.at(s.t_star);
  const double sign = target_curve.kind == CurveKind::maximize ? 1.0 : -1.0;
  const double denominator = sign * (s.acc_optimal - s.acc_at_baseline);
  if (denominator > 0.0) {
    s.gap_closure = sign * (s.acc_at_abe - s.acc_at_baseline) / denominator;
  } else {
    s.gap_closure = 0.0;
    s.baseline_optimal = true;
  }
  return s;
}

inline nlohmann::ordered_json to_json(const EvalSummary& s) {
  nlohmann::ordered_json j;
  j["acc_at_abe"] = s.acc_at_abe;
  j["acc_at_baseline"] = s.acc_at_baseline;
  j["acc_optimal"] = s.acc_optimal;
  j["gap_closure"] = s.gap_closure;
  j["t_hat"] = s.t_hat;
  j["t_valid_star"] = s.t_valid_star;
  j["t_star"] = s.t_star;
  j["baseline_optimal"] = s.baseline_optimal;
  return j;
}

namespace curve_csv {

/// Parses "checkpoint,value" CSV (header required).
inline AccuracyCurve parse(std::string_view text, CurveKind kind, std::string_view name = "<curve>") {
  const auto rows = fmt::lines(text);
  if (rows.empty()) throw Error(ErrorKind::invalid_curve, std::string(name) + ": empty file");
  const auto header = fmt::split(rows.front(), ',');
  if (header.size() != 2 || header[0] != "checkpoint" || header[1] != "value") {
    throw Error(ErrorKind::invalid_curve,
                std::string(name) + ": header must be \"checkpoint,value\"");
  }
  AccuracyCurve curve;
  curve.kind = kind;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto fields = fmt::split(rows[r], ',');
    if (fields.size() != 2) {
      throw Error(ErrorKind::invalid_curve,
                  std::string(name) + ": row " + std::to_string(r + 1) + " needs 2 fields");
    }
    try {
      curve.checkpoints.push_back(fmt::parse_number<std::uint64_t>(fields[0], "checkpoint"));
      curve.values.push_back(fmt::parse_number<double>(fields[1], "value"));
    } catch (const Error& e) {
      throw Error(ErrorKind::invalid_curve,
                  std::string(name) + ": row " + std::to_string(r + 1) + ": " + e.what());
    }
  }
  if (curve.values.empty()) throw Error(ErrorKind::invalid_curve, std::string(name) + ": no rows");
  try {
    curve.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_curve, std::string(name) + ": " + e.what());
  }
  return curve;
}

inline AccuracyCurve read(const std::filesystem::path& path, CurveKind kind) {
  return parse(io::read_file(path), kind, path.string());
}

inline std::string format(const AccuracyCurve& curve) {
  std::string out = "checkpoint,value\n";
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    out += std::to_string(curve.checkpoints[k]) + "," + fmt::real(curve.values[k]) + "\n";
  }
  return out;
}

inline void write(const AccuracyCurve& curve, const std::filesystem::path& path) {
  curve.validate();
  io::write_file_atomic(path, format(curve));
}

}  // namespace curve_csv

}  // namespace abe
