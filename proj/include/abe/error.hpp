// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace abe {

/// Every recoverable failure the engine reports. All of these describe bad
/// input; anything else escaping the library is an internal fault.
enum class ErrorKind {
  io,
  bad_magic,
  unsupported_version,
  truncated,
  dimension_mismatch,
  non_finite,
  invalid_argument,
  bad_header,
  invalid_manifest,
  missing_file,
  checkpoint_gap,
  dimension_drift,
  out_of_range,
  degenerate_axis,
  window_too_small,
  invalid_curve,
  training_diverged,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::bad_magic: return "bad magic";
    case ErrorKind::unsupported_version: return "unsupported version";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::bad_header: return "bad header";
    case ErrorKind::invalid_manifest: return "invalid manifest";
    case ErrorKind::missing_file: return "missing file";
    case ErrorKind::checkpoint_gap: return "checkpoint gap";
    case ErrorKind::dimension_drift: return "dimension drift";
    case ErrorKind::out_of_range: return "out of range";
    case ErrorKind::degenerate_axis: return "degenerate axis";
    case ErrorKind::window_too_small: return "window too small";
    case ErrorKind::invalid_curve: return "invalid curve";
    case ErrorKind::training_diverged: return "training diverged";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace abe
