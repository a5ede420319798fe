// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0
//
// A small fully-connected softplus classifier trained by mini-batch gradient
// descent on Gaussian class blobs, recording activation snapshots of every
// hidden layer after each epoch.
//
// Source blobs have class means drawn from N(0, separation^2 I) and
// isotropic deviation blob_stddev. The target blobs are the same classes,
// each translated by `shift` along its own random unit direction. Two fixed
// batches are recorded at every checkpoint: a held-out source batch
// (population source_valid) and n_target_unlabelled target inputs
// (population target), both stratified over classes.
//
// Both accuracy curves use a nearest-class-centroid readout on the last
// hidden layer: centroids come from a labelled support set, accuracy is
// measured on a disjoint query set. The target curve is an evaluation
// oracle and never reaches the divergence engine.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "abe/baselines.hpp"
#include "abe/error.hpp"
#include "abe/snapshot.hpp"
#include "abe/synth/rng.hpp"
#include "abe/synth/run_writer.hpp"

namespace abe::synth {

struct ToyTrainSpec {
  std::size_t input_dim = 16;
  std::vector<std::size_t> hidden_dims = {32, 32, 32};
  std::size_t n_classes = 5;
  double shift = 16.0;
  std::size_t epochs = 60;
  double learning_rate = 0.2;
  std::size_t batch_size = 400;
  std::size_t n_target_unlabelled = 5;
  std::uint64_t seed = 42;

  std::size_t n_train = 400;
  std::size_t n_source_valid = 5;
  double class_separation = 1.5;
  double blob_stddev = 1.0;
  double weight_decay = 0.005;
  std::size_t eval_support = 100;
  std::size_t eval_query = 1000;

  void validate() const {
    auto bad = [](const std::string& msg) { throw Error(ErrorKind::invalid_argument, msg); };
    auto positive = [&](std::size_t v, const char* name) {
      if (v == 0) bad(std::string(name) + " must be positive");
    };
    positive(input_dim, "input_dim");
    positive(n_classes, "n_classes");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    positive(n_target_unlabelled, "n_target_unlabelled");
    positive(n_train, "n_train");
    positive(n_source_valid, "n_source_valid");
    positive(eval_support, "eval_support");
    positive(eval_query, "eval_query");
    if (hidden_dims.empty()) bad("hidden_dims needs at least one layer");
    for (std::size_t h : hidden_dims) positive(h, "each hidden dim");
    if (n_classes < 2) bad("n_classes must be at least 2");
    auto finite_nonneg = [&](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) bad(std::string(name) + " must be finite and >= 0");
    };
    finite_nonneg(shift, "shift");
    finite_nonneg(weight_decay, "weight_decay");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
    if (!(class_separation > 0.0) || !std::isfinite(class_separation)) {
      bad("class_separation must be positive");
    }
    if (!(blob_stddev > 0.0) || !std::isfinite(blob_stddev)) bad("blob_stddev must be positive");
  }
};

/// Row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Softplus MLP with a linear softmax head.
class Mlp {
 public:
  /// Weights W_k of shape (in, out) drawn from N(0, 1/in); zero biases.
  Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden_dims, std::size_t n_classes,
      Rng& rng) {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(n_classes);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      Matrix w(dims[k], dims[k + 1]);
      const double sd = 1.0 / std::sqrt(static_cast<double>(dims[k]));
      for (double& v : w.data) v = rng.normal(0.0, sd);
      weights.push_back(std::move(w));
      biases.emplace_back(dims[k + 1], 0.0);
    }
  }

  std::size_t hidden_layers() const { return weights.size() - 1; }

  struct Forward {
    std::vector<Matrix> pre;  // pre-activations of every layer, head included
    std::vector<Matrix> act;  // act[0] = input, act[k] = softplus(pre[k-1])
  };

  Forward forward(const Matrix& x) const {
    Forward f;
    f.act.push_back(x);
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const Matrix& in = f.act.back();
      const Matrix& w = weights[k];
      Matrix z(in.rows, w.cols);
      for (std::size_t r = 0; r < in.rows; ++r) {
        for (std::size_t j = 0; j < w.cols; ++j) z(r, j) = biases[k][j];
        for (std::size_t i = 0; i < in.cols; ++i) {
          const double a = in(r, i);
          for (std::size_t j = 0; j < w.cols; ++j) z(r, j) += a * w(i, j);
        }
      }
      f.pre.push_back(z);
      if (k + 1 < weights.size()) {
        for (double& v : z.data) v = softplus(v);
        f.act.push_back(std::move(z));
      }
    }
    return f;
  }

  /// Hidden-layer activations only, one matrix per hidden layer.
  std::vector<Matrix> hidden(const Matrix& x) const {
    Forward f = forward(x);
    return {std::make_move_iterator(f.act.begin() + 1), std::make_move_iterator(f.act.end())};
  }

  struct Gradient {
    double loss = 0.0;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
  };

  /// Mean softmax cross-entropy over the batch plus (wd/2) * sum ||W||^2,
  /// with its gradient. Biases are not decayed.
  Gradient loss_and_gradient(const Matrix& x, const std::vector<std::size_t>& y, double wd) const {
    const Forward f = forward(x);
    const Matrix& logits = f.pre.back();
    const std::size_t n = x.rows;
    Gradient g;
    Matrix delta(n, logits.cols);
    for (std::size_t r = 0; r < n; ++r) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < logits.cols; ++c) mx = std::max(mx, logits(r, c));
      double sum = 0.0;
      for (std::size_t c = 0; c < logits.cols; ++c) sum += std::exp(logits(r, c) - mx);
      const double log_sum = mx + std::log(sum);
      g.loss += log_sum - logits(r, y[r]);
      for (std::size_t c = 0; c < logits.cols; ++c) {
        delta(r, c) = (std::exp(logits(r, c) - log_sum) - (c == y[r] ? 1.0 : 0.0)) / static_cast<double>(n);
      }
    }
    g.loss /= static_cast<double>(n);
    for (const auto& w : weights) {
      double sq = 0.0;
      for (double v : w.data) sq += v * v;
      g.loss += 0.5 * wd * sq;
    }
    g.weights.resize(weights.size());
    g.biases.resize(weights.size());
    for (std::size_t k = weights.size(); k-- > 0;) {
      const Matrix& in = f.act[k];
      const Matrix& w = weights[k];
      Matrix gw(w.rows, w.cols);
      std::vector<double> gb(w.cols, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < w.rows; ++i) {
          const double a = in(r, i);
          for (std::size_t j = 0; j < w.cols; ++j) gw(i, j) += a * delta(r, j);
        }
        for (std::size_t j = 0; j < w.cols; ++j) gb[j] += delta(r, j);
      }
      for (std::size_t q = 0; q < gw.data.size(); ++q) gw.data[q] += wd * w.data[q];
      if (k > 0) {
        Matrix back(n, w.rows);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t i = 0; i < w.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < w.cols; ++j) s += delta(r, j) * w(i, j);
            back(r, i) = s * sigmoid(f.pre[k - 1](r, i));
          }
        }
        delta = std::move(back);
      }
      g.weights[k] = std::move(gw);
      g.biases[k] = std::move(gb);
    }
    return g;
  }

  void step(const Gradient& g, double learning_rate) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      for (std::size_t q = 0; q < weights[k].data.size(); ++q) {
        weights[k].data[q] -= learning_rate * g.weights[k].data[q];
      }
      for (std::size_t j = 0; j < biases[k].size(); ++j) biases[k][j] -= learning_rate * g.biases[k][j];
    }
  }

  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

/// Largest relative error between analytic and central-difference gradients
/// over every parameter, |a - n| / max(|a|, |n|, floor).
inline double gradient_check(const Mlp& net, const Matrix& x, const std::vector<std::size_t>& y,
                             double wd, double step = 1e-6, double floor = 1e-8) {
  const Mlp::Gradient analytic = net.loss_and_gradient(x, y, wd);
  Mlp probe = net;
  double worst = 0.0;
  auto compare = [&](double& param, double grad) {
    const double saved = param;
    param = saved + step;
    const double up = probe.loss_and_gradient(x, y, wd).loss;
    param = saved - step;
    const double down = probe.loss_and_gradient(x, y, wd).loss;
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(grad), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(grad - numeric) / scale);
  };
  for (std::size_t k = 0; k < probe.weights.size(); ++k) {
    for (std::size_t q = 0; q < probe.weights[k].data.size(); ++q) {
      compare(probe.weights[k].data[q], analytic.weights[k].data[q]);
    }
    for (std::size_t j = 0; j < probe.biases[k].size(); ++j) {
      compare(probe.biases[k][j], analytic.biases[k][j]);
    }
  }
  return worst;
}

/// Snapshots and curves of one toy training run; checkpoint k is the state
/// after k epochs (0 = initialization).
struct ToyRun {
  ToyTrainSpec spec;
  std::vector<ActivationSnapshot> source_valid;
  std::vector<ActivationSnapshot> target;
  AccuracyCurve valid_curve;
  AccuracyCurve target_curve;
};

namespace detail {

struct Blobs {
  Matrix means;       // n_classes x input_dim
  Matrix directions;  // per-class unit shift directions
};

struct Sample {
  Matrix x;
  std::vector<std::size_t> y;
};

inline Sample draw(const ToyTrainSpec& spec, const Blobs& blobs, std::size_t n, double shift,
                   bool stratified, Rng& rng) {
  Sample s{Matrix(n, spec.input_dim), std::vector<std::size_t>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t c = stratified ? r % spec.n_classes : rng.below(spec.n_classes);
    s.y[r] = c;
    for (std::size_t i = 0; i < spec.input_dim; ++i) {
      s.x(r, i) = blobs.means(c, i) + spec.blob_stddev * rng.normal() + shift * blobs.directions(c, i);
    }
  }
  return s;
}

/// Nearest-centroid accuracy on the last hidden layer. Classes absent from
/// the support set get a zero centroid.
inline double centroid_accuracy(const Mlp& net, const Sample& support, const Sample& query,
                                std::size_t n_classes) {
  const Matrix fs = net.hidden(support.x).back();
  const Matrix fq = net.hidden(query.x).back();
  Matrix centroids(n_classes, fs.cols);
  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t r = 0; r < fs.rows; ++r) {
    ++counts[support.y[r]];
    for (std::size_t j = 0; j < fs.cols; ++j) centroids(support.y[r], j) += fs(r, j);
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (counts[c] == 0) continue;
    for (std::size_t j = 0; j < fs.cols; ++j) centroids(c, j) /= static_cast<double>(counts[c]);
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < fq.rows; ++r) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_classes; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < fq.cols; ++j) {
        const double diff = fq(r, j) - centroids(c, j);
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == query.y[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(fq.rows);
}

inline ActivationSnapshot record(const Mlp& net, const Matrix& batch, std::uint64_t checkpoint,
                                 const Population& population) {
  ActivationSnapshot snap{checkpoint, population.kind, {}};
  const auto layers = net.hidden(batch);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Matrix& a = layers[l];
    LayerActivations la{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(a.rows),
                        static_cast<std::uint32_t>(a.cols), std::vector<float>(a.data.size())};
    for (std::size_t q = 0; q < a.data.size(); ++q) la.values[q] = static_cast<float>(a.data[q]);
    snap.layers.push_back(std::move(la));
  }
  return snap;
}

}  // namespace detail

/// Trains one network and records it at every epoch. Deterministic for a
/// given spec. Throws training_diverged if the loss turns non-finite.
inline ToyRun toy_train(const ToyTrainSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  detail::Blobs blobs{Matrix(spec.n_classes, spec.input_dim), Matrix(spec.n_classes, spec.input_dim)};
  for (double& v : blobs.means.data) v = rng.normal(0.0, spec.class_separation);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    double norm = 0.0;
    for (std::size_t i = 0; i < spec.input_dim; ++i) {
      blobs.directions(c, i) = rng.normal();
      norm += blobs.directions(c, i) * blobs.directions(c, i);
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < spec.input_dim; ++i) blobs.directions(c, i) /= norm;
  }
  const auto train = detail::draw(spec, blobs, spec.n_train, 0.0, false, rng);
  const auto valid_query = detail::draw(spec, blobs, spec.eval_query, 0.0, false, rng);
  const auto valid_support = detail::draw(spec, blobs, spec.eval_support, 0.0, false, rng);
  const auto source_batch = detail::draw(spec, blobs, spec.n_source_valid, 0.0, true, rng);
  const auto target_batch = detail::draw(spec, blobs, spec.n_target_unlabelled, spec.shift, true, rng);
  const auto target_support = detail::draw(spec, blobs, spec.eval_support, spec.shift, false, rng);
  const auto target_query = detail::draw(spec, blobs, spec.eval_query, spec.shift, false, rng);

  Mlp net(spec.input_dim, spec.hidden_dims, spec.n_classes, rng);
  ToyRun run;
  run.spec = spec;
  run.valid_curve.kind = CurveKind::maximize;
  run.target_curve.kind = CurveKind::maximize;
  auto record = [&](std::uint64_t checkpoint) {
    run.source_valid.push_back(detail::record(net, source_batch.x, checkpoint, Population::source_valid()));
    run.target.push_back(detail::record(net, target_batch.x, checkpoint, Population::target()));
    run.valid_curve.checkpoints.push_back(checkpoint);
    run.valid_curve.values.push_back(
        detail::centroid_accuracy(net, valid_support, valid_query, spec.n_classes));
    run.target_curve.checkpoints.push_back(checkpoint);
    run.target_curve.values.push_back(
        detail::centroid_accuracy(net, target_support, target_query, spec.n_classes));
  };

  record(0);
  std::vector<std::size_t> order(spec.n_train);
  for (std::size_t epoch = 1; epoch <= spec.epochs; ++epoch) {
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t end = std::min(order.size(), start + spec.batch_size);
      Matrix x(end - start, spec.input_dim);
      std::vector<std::size_t> y(end - start);
      for (std::size_t r = start; r < end; ++r) {
        for (std::size_t i = 0; i < spec.input_dim; ++i) x(r - start, i) = train.x(order[r], i);
        y[r - start] = train.y[order[r]];
      }
      const auto g = net.loss_and_gradient(x, y, spec.weight_decay);
      if (!std::isfinite(g.loss)) {
        throw Error(ErrorKind::training_diverged, "non-finite loss in epoch " + std::to_string(epoch));
      }
      net.step(g, spec.learning_rate);
    }
    record(epoch);
  }
  return run;
}

inline nlohmann::ordered_json to_json(const ToyTrainSpec& s) {
  nlohmann::ordered_json j;
  j["generator"] = "toytrain";
  j["input_dim"] = s.input_dim;
  j["hidden_dims"] = s.hidden_dims;
  j["n_classes"] = s.n_classes;
  j["shift"] = s.shift;
  j["epochs"] = s.epochs;
  j["learning_rate"] = s.learning_rate;
  j["batch_size"] = s.batch_size;
  j["n_target_unlabelled"] = s.n_target_unlabelled;
  j["seed"] = s.seed;
  j["n_train"] = s.n_train;
  j["n_source_valid"] = s.n_source_valid;
  j["class_separation"] = s.class_separation;
  j["blob_stddev"] = s.blob_stddev;
  j["weight_decay"] = s.weight_decay;
  j["eval_support"] = s.eval_support;
  j["eval_query"] = s.eval_query;
  return j;
}

/// Writes snapshots, manifest.json, valid_curve.csv and target_curve.csv.
/// Returns the manifest path.
inline std::filesystem::path write_toy_run(const ToyRun& run, const std::filesystem::path& dir) {
  std::vector<std::uint32_t> dims;
  for (std::size_t h : run.spec.hidden_dims) dims.push_back(static_cast<std::uint32_t>(h));
  RunWriter writer(dir, "toytrain-" + std::to_string(run.spec.seed), dims);
  for (std::size_t t = 0; t < run.source_valid.size(); ++t) {
    writer.add(run.source_valid[t], Population::source_valid());
    writer.add(run.target[t], Population::target());
  }
  writer.set_meta(to_json(run.spec));
  const auto manifest_path = writer.finish();
  curve_csv::write(run.valid_curve, dir / "valid_curve.csv");
  curve_csv::write(run.target_curve, dir / "target_curve.csv");
  return manifest_path;
}

}  // namespace abe::synth
