// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// abe: command-line front end.
//
//   abe analyze   --manifest run/manifest.json (--valid-curve v.csv | --t-valid N) --out report.json
//   abe evaluate  --report report.json --target-curve target.csv [--out summary.json]
//   abe moments   snapshot.asnap
//   abe synth scenario --out-dir DIR [...]
//   abe synth toytrain --out-dir DIR --seed N [...]
//
// Exit status: 0 on success, 2 on invalid input (bad flags, unreadable or
// malformed files, out-of-range checkpoints), 1 on internal failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "abe/abe.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitInput = 2;
constexpr int kExitInternal = 1;

constexpr const char* kFormatsHelp = R"(Formats:
  manifest.json   {"run_id", "checkpoints": [..], "layers": [{"id", "features"}],
                   "populations": [{"tag": "source_valid"|"target"|<label>,
                                    "files": [{"checkpoint", "path"}]}], "meta"?}
                  Paths are relative to the manifest's directory.
  *.asnap         little-endian: "ABES" | version u32 = 1 | checkpoint u64 |
                  population u8 (0 source_valid, 1 target, 2 other) |
                  layer_count u32 | per layer: id u32, n_examples u32,
                  n_features u32, f32 payload row-major.
  curve CSV       header "checkpoint,value", one row per checkpoint.
  report JSON     critical_layer, critical_moment, t_hat, t_valid_star,
                  diverged, best_score, scores[].
Environment:
  ABE_THREADS     worker threads (unset or 0: hardware concurrency).)";

abe::CurveKind parse_curve_kind(const std::string& s) {
  return s == "minimize" ? abe::CurveKind::minimize : abe::CurveKind::maximize;
}

void write_json(const nlohmann::ordered_json& j, const std::optional<std::string>& out) {
  const std::string text = j.dump(2) + "\n";
  if (out) {
    abe::io::write_file_atomic(*out, text);
  } else {
    std::cout << text;
  }
}

struct AnalyzeArgs {
  std::string manifest;
  std::optional<std::string> valid_curve;
  std::optional<std::uint64_t> t_valid;
  std::string interval_unit = "rank";
  std::string curve_kind = "maximize";
  std::string out;
  bool emit_trajectories = false;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto run = abe::Run::load(a.manifest);
  std::uint64_t t_valid_star = 0;
  if (a.valid_curve) {
    const auto curve = abe::curve_csv::read(*a.valid_curve, parse_curve_kind(a.curve_kind));
    t_valid_star = abe::stop_at_extremum(curve);
  } else {
    t_valid_star = *a.t_valid;
  }
  abe::DivergenceOptions options;
  options.unit = a.interval_unit == "raw" ? abe::IntervalUnit::raw : abe::IntervalUnit::rank;
  const auto analysis = abe::analyze_run(run, t_valid_star, options);
  const auto& r = analysis.report;
  abe::io::write_file_atomic(a.out, abe::to_json(r).dump(2) + "\n");
  if (a.emit_trajectories) {
    fs::path base(a.out);
    base.replace_extension();
    abe::io::write_file_atomic(base.string() + ".source_valid.csv", abe::to_csv(analysis.source));
    abe::io::write_file_atomic(base.string() + ".target.csv", abe::to_csv(analysis.target));
  }
  std::cout << "t_valid_star=" << r.t_valid_star << " t_hat=" << r.t_hat
            << " diverged=" << (r.diverged ? "true" : "false") << " layer=" << r.critical_layer
            << " moment=" << abe::to_string(r.critical_moment)
            << " score=" << abe::fmt::real(r.best_score) << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string report;
  std::string target_curve;
  std::string curve_kind = "maximize";
  std::optional<std::string> out;
};

int run_evaluate(const EvaluateArgs& a) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(abe::io::read_file(a.report));
  } catch (const nlohmann::json::parse_error& e) {
    throw abe::Error(abe::ErrorKind::invalid_argument, a.report + ": " + e.what());
  }
  const auto report = abe::report_from_json(j);
  const auto curve = abe::curve_csv::read(a.target_curve, parse_curve_kind(a.curve_kind));
  abe::EvalSummary summary;
  try {
    summary = abe::evaluate(report, curve);
  } catch (const abe::Error& e) {
    throw abe::Error(e.kind(), a.target_curve + ": " + e.what());
  }
  write_json(abe::to_json(summary), a.out);
  return 0;
}

int run_moments(const std::string& path) {
  const auto snap = abe::read_snapshot(path);
  std::string out = "layer,m1,m2,m3,m4\n";
  for (const auto& layer : snap.layers) {
    const auto m = abe::compute_moments(layer);
    out += std::to_string(layer.layer_id);
    for (abe::Moment k : abe::kMoments) out += "," + abe::fmt::real(m[k]);
    out += "\n";
  }
  std::cout << out;
  return 0;
}

abe::Moment parse_moment_flag(const std::string& s) {
  if (auto m = abe::parse_moment(s)) return *m;
  throw abe::Error(abe::ErrorKind::invalid_argument, "--planted-moment must be m1..m4, got " + s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Activation-based early stopping: detect when a network's target-domain "
               "activations stop tracking its source validation activations."};
  app.footer(kFormatsHelp);
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* cmd_analyze = app.add_subcommand("analyze", "Compute the stopping report for a recorded run");
  cmd_analyze->add_option("--manifest", analyze.manifest, "Run manifest JSON")->required();
  auto* opt_curve = cmd_analyze->add_option("--valid-curve", analyze.valid_curve,
                                            "Validation curve CSV; t_valid_star is its best checkpoint");
  auto* opt_tvalid = cmd_analyze->add_option("--t-valid", analyze.t_valid, "Explicit t_valid_star checkpoint");
  opt_curve->excludes(opt_tvalid);
  opt_tvalid->excludes(opt_curve);
  cmd_analyze->add_option("--interval-unit", analyze.interval_unit,
                          "Window length unit: rank (observed checkpoints) or raw (checkpoint index)")
      ->check(CLI::IsMember({"rank", "raw"}))
      ->capture_default_str();
  cmd_analyze->add_option("--curve-kind", analyze.curve_kind, "maximize (accuracy) or minimize (loss)")
      ->check(CLI::IsMember({"maximize", "minimize"}))
      ->capture_default_str();
  cmd_analyze->add_option("--out", analyze.out, "Report JSON path")->required();
  cmd_analyze->add_flag("--emit-trajectories", analyze.emit_trajectories,
                        "Also write <out>.source_valid.csv and <out>.target.csv");

  EvaluateArgs evaluate;
  auto* cmd_evaluate = app.add_subcommand("evaluate", "Score a report against a target curve");
  cmd_evaluate->add_option("--report", evaluate.report, "Report JSON from analyze")->required();
  cmd_evaluate->add_option("--target-curve", evaluate.target_curve, "Target curve CSV")->required();
  cmd_evaluate->add_option("--curve-kind", evaluate.curve_kind, "maximize (accuracy) or minimize (loss)")
      ->check(CLI::IsMember({"maximize", "minimize"}))
      ->capture_default_str();
  cmd_evaluate->add_option("--out", evaluate.out, "Summary JSON path (default: standard output)");

  std::string moments_path;
  auto* cmd_moments = app.add_subcommand("moments", "Print per-layer aggregated moments of a snapshot");
  cmd_moments->add_option("snapshot", moments_path, "ASNAP file")->required();

  auto* cmd_synth = app.add_subcommand("synth", "Generate synthetic runs");
  cmd_synth->require_subcommand(1);

  abe::synth::ScenarioSpec scenario;
  std::string scenario_dir;
  std::string planted_moment = "m1";
  bool no_divergence = false;
  auto* cmd_scenario = cmd_synth->add_subcommand("scenario", "Trajectory scenario with a planted divergence");
  cmd_scenario->add_option("--out-dir", scenario_dir, "Output directory")->required();
  cmd_scenario->add_option("--layers", scenario.layers, "Number of layers")->capture_default_str();
  cmd_scenario->add_option("--checkpoints", scenario.checkpoints, "Number of checkpoints T")->capture_default_str();
  cmd_scenario->add_option("--checkpoint-stride", scenario.checkpoint_stride, "Spacing of checkpoint indices")
      ->capture_default_str();
  cmd_scenario->add_option("--planted-layer", scenario.planted_layer, "Critical layer")->capture_default_str();
  cmd_scenario->add_option("--planted-moment", planted_moment, "Critical moment m1..m4")->capture_default_str();
  cmd_scenario->add_option("--breakpoint", scenario.breakpoint, "Checkpoint where the target turns")
      ->capture_default_str();
  cmd_scenario->add_option("--noise-sigma", scenario.noise_sigma, "Deviation of additive noise")
      ->capture_default_str();
  cmd_scenario->add_option("--drift-slope", scenario.drift_slope, "Minimum per-step drift")->capture_default_str();
  cmd_scenario->add_flag("--no-divergence", no_divergence, "Target is a positive affine copy of the source");
  cmd_scenario->add_option("--seed", scenario.seed, "Random seed")->capture_default_str();

  abe::synth::ToyTrainSpec toy;
  std::string toy_dir;
  auto* cmd_toy = cmd_synth->add_subcommand("toytrain", "Train a toy classifier and record its activations");
  cmd_toy->add_option("--out-dir", toy_dir, "Output directory")->required();
  cmd_toy->add_option("--seed", toy.seed, "Random seed")->required();
  cmd_toy->add_option("--input-dim", toy.input_dim, "Input dimension")->capture_default_str();
  cmd_toy->add_option("--hidden-dims", toy.hidden_dims, "Hidden layer widths, one layer each")
      ->delimiter(',')
      ->capture_default_str();
  cmd_toy->add_option("--n-classes", toy.n_classes, "Number of classes")->capture_default_str();
  cmd_toy->add_option("--shift", toy.shift, "Target blob translation")->capture_default_str();
  cmd_toy->add_option("--epochs", toy.epochs, "Training epochs")->capture_default_str();
  cmd_toy->add_option("--learning-rate", toy.learning_rate, "Step size")->capture_default_str();
  cmd_toy->add_option("--batch-size", toy.batch_size, "Mini-batch size")->capture_default_str();
  cmd_toy->add_option("--n-target-unlabelled", toy.n_target_unlabelled, "Recorded target inputs")
      ->capture_default_str();
  cmd_toy->add_option("--n-train", toy.n_train, "Training set size")->capture_default_str();
  cmd_toy->add_option("--n-source-valid", toy.n_source_valid, "Recorded source inputs")->capture_default_str();
  cmd_toy->add_option("--class-separation", toy.class_separation, "Deviation of class means")
      ->capture_default_str();
  cmd_toy->add_option("--blob-stddev", toy.blob_stddev, "Deviation within a class")->capture_default_str();
  cmd_toy->add_option("--weight-decay", toy.weight_decay, "L2 penalty on weights")->capture_default_str();
  cmd_toy->add_option("--eval-support", toy.eval_support, "Centroid support examples")->capture_default_str();
  cmd_toy->add_option("--eval-query", toy.eval_query, "Accuracy query examples")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (cmd_analyze->parsed()) {
      if (!analyze.valid_curve && !analyze.t_valid) {
        std::cerr << "analyze: one of --valid-curve or --t-valid is required\n";
        return kExitInput;
      }
      return run_analyze(analyze);
    }
    if (cmd_evaluate->parsed()) return run_evaluate(evaluate);
    if (cmd_moments->parsed()) return run_moments(moments_path);
    if (cmd_scenario->parsed()) {
      scenario.planted = !no_divergence;
      scenario.planted_moment = parse_moment_flag(planted_moment);
      const auto s = abe::synth::generate_scenario(scenario);
      const auto manifest = abe::synth::write_scenario(s, scenario_dir);
      std::cout << manifest.string() << "\n";
      return 0;
    }
    if (cmd_toy->parsed()) {
      const auto run = abe::synth::toy_train(toy);
      const auto manifest = abe::synth::write_toy_run(run, toy_dir);
      std::cout << manifest.string() << "\n";
      return 0;
    }
  } catch (const abe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
