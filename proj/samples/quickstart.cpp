// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// Generates a synthetic run with a planted divergence, analyzes it from
// disk and scores the stopping time against the target curve.
//
//   quickstart [output-dir]

#include <filesystem>
#include <iostream>

#include "abe/abe.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "quickstart-run";
  try {
    abe::synth::ScenarioSpec spec;
    spec.layers = 3;
    spec.checkpoints = 12;
    spec.planted_layer = 2;
    spec.planted_moment = abe::Moment::m3;
    spec.breakpoint = 6;
    spec.noise_sigma = 0.01;
    const auto manifest = abe::synth::write_scenario(abe::synth::generate_scenario(spec), dir);

    const auto valid = abe::curve_csv::read(dir / "valid_curve.csv", abe::CurveKind::maximize);
    const std::uint64_t t_valid_star = abe::stop_at_extremum(valid);
    const auto analysis = abe::analyze_run(manifest, t_valid_star);
    const auto& report = analysis.report;

    std::cout << "validation stop  t_valid* = " << report.t_valid_star << "\n"
              << "ABE stop         t_hat    = " << report.t_hat << "\n"
              << "critical slice   layer " << report.critical_layer << ", "
              << abe::to_string(report.critical_moment) << " (score " << report.best_score << ")\n";

    const auto target = abe::curve_csv::read(dir / "target_curve.csv", abe::CurveKind::maximize);
    const auto summary = abe::evaluate(report, target);
    std::cout << "target accuracy  " << summary.acc_at_abe << " at t_hat vs " << summary.acc_at_baseline
              << " at t_valid* (best " << summary.acc_optimal << " at " << summary.t_star << ")\n"
              << "gap closure      " << summary.gap_closure << "\n";
  } catch (const abe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
