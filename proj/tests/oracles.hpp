// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference implementations. Each follows the definitions
// literally and shares no code with the library path it checks.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "abe/divergence.hpp"
#include "abe/moments.hpp"
#include "abe/trajectory.hpp"

namespace abe::testing {

/// Moments from the full D x D matrix S_ij = (1/N) sum_n z_ni z_nj, plus
/// the sum of absolute terms entering each moment, the natural scale for
/// a relative tolerance.
struct OracleMoments {
  double m[4] = {0, 0, 0, 0};
  double scale[4] = {0, 0, 0, 0};
};

inline OracleMoments brute_force_moments(std::size_t n, std::size_t d, const std::vector<float>& z) {
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) mu[i] += z[r * d + i];
  }
  for (double& v : mu) v /= static_cast<double>(n);
  std::vector<double> S(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += static_cast<double>(z[r * d + i]) * z[r * d + j];
      S[i * d + j] = s / static_cast<double>(n);
    }
  }
  OracleMoments o;
  for (std::size_t i = 0; i < d; ++i) {
    o.m[0] += mu[i];
    o.scale[0] += std::abs(mu[i]);
    o.m[1] += mu[i] * mu[i];
    o.scale[1] += mu[i] * mu[i];
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) {
        o.m[2] += S[i * d + j];
        o.scale[2] += std::abs(S[i * d + j]);
      } else {
        o.m[3] += S[i * d + j];
        o.scale[3] += std::abs(S[i * d + j]);
      }
    }
  }
  return o;
}

/// |got - want| / max(scale, tiny). With scale = sum of |terms|, this bounds
/// the error relative to the magnitudes summed rather than to a result that
/// may cancel to near zero.
inline double scaled_error(double got, double want, double scale) {
  return std::abs(got - want) / std::max(scale, std::numeric_limits<double>::min());
}

/// Mean over ordered pairs n != n' of <z_n, z_n'>.
inline double mean_pairwise_inner(std::size_t n, std::size_t d, const std::vector<float>& z) {
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(z[a * d + i]) * z[b * d + i];
    }
  }
  return s / static_cast<double>(n * (n - 1));
}

/// Mean over ordered pairs n != n' of |z_n - z_n'|^2.
inline double mean_pairwise_sq_distance(std::size_t n, std::size_t d, const std::vector<float>& z) {
  double s = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(z[a * d + i]) - z[b * d + i];
        s += diff * diff;
      }
    }
  }
  return s / static_cast<double>(n * (n - 1));
}

/// Result of the exhaustive search over every (layer, moment, t).
struct BruteReport {
  std::size_t layer = 0;
  Moment moment = Moment::m1;
  std::uint64_t t_hat = 0;
  bool diverged = false;
  double best = 0.0;
};

/// Enumerates candidates in (layer, moment, t) order and keeps the first
/// strict maximum, which is the documented tie order. The correlation
/// primitive is the library's `pearson`; the search and tie logic are not.
inline BruteReport brute_force_stopping(const Trajectory& target, const Trajectory& source,
                                        std::uint64_t t_valid_star, IntervalUnit unit) {
  const auto& cps = target.checkpoints();
  std::size_t p2 = 0;
  while (cps[p2] != t_valid_star) ++p2;
  BruteReport r;
  bool first = true;
  for (std::size_t l = 0; l < target.layers(); ++l) {
    for (Moment m : kMoments) {
      for (std::size_t p1 = 0; p1 + 2 <= p2; ++p1) {
        std::vector<double> a, b;
        for (std::size_t p = p1 + 1; p <= p2; ++p) {
          a.push_back(target.at(p, l, m));
          b.push_back(source.at(p, l, m));
        }
        const auto rho = pearson(a, b);
        const double span = unit == IntervalUnit::rank ? static_cast<double>(p2 - p1)
                                                       : static_cast<double>(cps[p2] - cps[p1]);
        const double score = rho ? -*rho * span : 0.0;
        if (first || score > r.best) {
          first = false;
          r.best = score;
          r.layer = l;
          r.moment = m;
          r.t_hat = cps[p1];
        }
      }
    }
  }
  r.diverged = r.best > 0.0;
  if (!r.diverged) r.t_hat = t_valid_star;
  return r;
}

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("abe-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace abe::testing
