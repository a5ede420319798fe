// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "abe/error.hpp"
#include "abe/snapshot.hpp"

namespace abe {

/// Index of an aggregated moment. Serialized as "m1".."m4".
enum class Moment : std::uint8_t { m1 = 0, m2 = 1, m3 = 2, m4 = 3 };

inline constexpr std::size_t kMomentCount = 4;
inline constexpr std::array<Moment, kMomentCount> kMoments = {Moment::m1, Moment::m2, Moment::m3,
                                                              Moment::m4};

constexpr std::string_view to_string(Moment m) {
  constexpr std::array<std::string_view, kMomentCount> names = {"m1", "m2", "m3", "m4"};
  return names[static_cast<std::size_t>(m)];
}

inline std::optional<Moment> parse_moment(std::string_view name) {
  for (Moment m : kMoments) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

/// Feature-dimension summaries of a layer's first and second raw moments.
/// With mu_i the batch mean of feature i and S_ij = E[z_i z_j]:
///   m1 = sum_i mu_i          m2 = sum_i mu_i^2
///   m3 = sum_i S_ii          m4 = sum_{i != j} S_ij
/// These are sums over features, not means; Pearson correlation downstream
/// does not see the difference.
struct AggregatedMoments {
  double m1_hat = 0.0;
  double m2_hat = 0.0;
  double m3_hat = 0.0;
  double m4_hat = 0.0;

  double operator[](Moment m) const {
    switch (m) {
      case Moment::m1: return m1_hat;
      case Moment::m2: return m2_hat;
      case Moment::m3: return m3_hat;
      case Moment::m4: return m4_hat;
    }
    return 0.0;
  }

  friend bool operator==(const AggregatedMoments&, const AggregatedMoments&) = default;
};

/// O(N*D): the off-diagonal sum uses
///   m4 = (1/N) sum_n (sum_i z_ni)^2 - m3
/// so the D x D matrix is never formed. Inputs are f32; all accumulation is
/// f64 in a fixed order, so results are bit-reproducible.
inline AggregatedMoments compute_moments(std::size_t n_examples, std::size_t n_features,
                                         std::span<const float> values) {
  if (n_examples == 0 || n_features == 0 || values.size() != n_examples * n_features) {
    throw Error(ErrorKind::dimension_mismatch, "activation batch shape does not match its values");
  }
  std::vector<double> column_sum(n_features, 0.0);
  double diag_sum = 0.0;
  double row_sum_sq = 0.0;
  for (std::size_t n = 0; n < n_examples; ++n) {
    const float* row = values.data() + n * n_features;
    double row_sum = 0.0;
    double row_sq = 0.0;
    for (std::size_t i = 0; i < n_features; ++i) {
      const double z = row[i];
      column_sum[i] += z;
      row_sum += z;
      row_sq += z * z;
    }
    diag_sum += row_sq;
    row_sum_sq += row_sum * row_sum;
  }
  const double inv_n = 1.0 / static_cast<double>(n_examples);
  AggregatedMoments m;
  for (std::size_t i = 0; i < n_features; ++i) {
    const double mu = column_sum[i] * inv_n;
    m.m1_hat += mu;
    m.m2_hat += mu * mu;
  }
  m.m3_hat = diag_sum * inv_n;
  m.m4_hat = row_sum_sq * inv_n - m.m3_hat;
  return m;
}

inline AggregatedMoments compute_moments(const LayerActivations& batch) {
  return compute_moments(batch.n_examples, batch.n_features, batch.values);
}

/// Quantities expressible as linear combinations of the aggregated moments,
/// under the population identities for pairs of independent examples
/// (i != j). For a finite batch of N examples the mean over ordered pairs
/// n != n' differs by O(1/N): mean <z_n, z_n'> = (N*m2 - m3) / (N - 1).
struct DerivedMetrics {
  double expected_sq_l2_norm = 0.0;              // E|z|^2 = m3
  double expected_pairwise_inner_product = 0.0;  // E<z, z'> = m2
  double expected_sq_l2_dispersion = 0.0;        // E|z - z'|^2 = 2 (m3 - m2)
  double total_feature_variance = 0.0;           // sum_i Var z_i = m3 - m2

  std::vector<std::pair<std::string_view, double>> entries() const {
    return {{"expected_sq_l2_norm", expected_sq_l2_norm},
            {"expected_pairwise_inner_product", expected_pairwise_inner_product},
            {"expected_sq_l2_dispersion", expected_sq_l2_dispersion},
            {"total_feature_variance", total_feature_variance}};
  }
};

inline DerivedMetrics derived_metrics(const AggregatedMoments& m) {
  return {m.m3_hat, m.m2_hat, 2.0 * (m.m3_hat - m.m2_hat), m.m3_hat - m.m2_hat};
}

}  // namespace abe
