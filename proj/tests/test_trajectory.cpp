// Copyright 2026 The ABE Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

#include "abe/manifest.hpp"
#include "abe/synth/scenario.hpp"
#include "abe/synth/toy_train.hpp"
#include "abe/trajectory.hpp"
#include "oracles.hpp"

namespace {

using abe::Moment;
using abe::Population;
using abe::Trajectory;

abe::synth::ToyTrainSpec tiny_toy(std::uint64_t seed) {
  abe::synth::ToyTrainSpec s;
  s.input_dim = 6;
  s.hidden_dims = {8, 5};
  s.n_classes = 3;
  s.epochs = 4;
  s.n_train = 60;
  s.batch_size = 20;
  s.eval_support = 15;
  s.eval_query = 30;
  s.seed = seed;
  return s;
}

TEST(Trajectory, BuiltFromFilesMatchesDirectRecomputation) {
  abe::testing::TempDir dir("traj");
  const auto run = abe::synth::toy_train(tiny_toy(3));
  const auto manifest = abe::synth::write_toy_run(run, dir.path());
  const auto loaded = abe::Run::load(manifest);
  const Trajectory src = abe::build_trajectory(loaded, Population::source_valid());
  const Trajectory tgt = abe::build_trajectory(loaded, Population::target());
  ASSERT_EQ(src.time_steps(), 5u);
  ASSERT_EQ(src.layers(), 2u);
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t l = 0; l < 2; ++l) {
      EXPECT_EQ(src.moments_at(t, l), abe::compute_moments(run.source_valid[t].layers[l]));
      EXPECT_EQ(tgt.moments_at(t, l), abe::compute_moments(run.target[t].layers[l]));
    }
  }
}

TEST(Trajectory, SliceOfPlantedDriftIsExactlyTheLine) {
  abe::synth::ScenarioSpec spec;
  spec.layers = 2;
  spec.checkpoints = 9;
  spec.breakpoint = 4;
  spec.seed = 99;
  const auto s = abe::synth::generate_scenario(spec);
  const auto series = abe::slice(s.source, 0, Moment::m1);
  ASSERT_EQ(series.size(), 9u);
  for (std::size_t t = 0; t < 9; ++t) {
    EXPECT_EQ(series.values[t], s.intercepts[0] + s.slopes[0] * static_cast<double>(t));
    EXPECT_EQ(series.checkpoints[t], t);
  }
}

TEST(Trajectory, ThreadCountDoesNotChangeResults) {
  abe::testing::TempDir dir("traj");
  const auto manifest = abe::synth::write_toy_run(abe::synth::toy_train(tiny_toy(8)), dir.path());
  const auto loaded = abe::Run::load(manifest);
  ::setenv("ABE_THREADS", "1", 1);
  const Trajectory one = abe::build_trajectory(loaded, Population::target());
  ::setenv("ABE_THREADS", "4", 1);
  const Trajectory four = abe::build_trajectory(loaded, Population::target());
  ::unsetenv("ABE_THREADS");
  EXPECT_EQ(one, four);
}

TEST(Trajectory, InvariantsEnforced) {
  EXPECT_THROW(Trajectory(Population::target(), {}, 1, {}), abe::Error);
  EXPECT_THROW(Trajectory(Population::target(), {1, 1}, 1, std::vector<double>(8)), abe::Error);
  EXPECT_THROW(Trajectory(Population::target(), {0, 1}, 1, std::vector<double>(7)), abe::Error);
  std::vector<double> v(8, 1.0);
  v[3] = std::nan("");
  EXPECT_THROW(Trajectory(Population::target(), {0, 1}, 1, v), abe::Error);
}

TEST(Trajectory, SliceAndPrefix) {
  std::vector<double> v(3 * 2 * 4);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = static_cast<double>(k);
  const Trajectory t(Population::source_valid(), {0, 5, 10}, 2, v);
  const auto s = abe::slice(t, 1, Moment::m3);
  EXPECT_EQ(s.values, (std::vector<double>{6, 14, 22}));
  EXPECT_EQ(t.prefix(2).checkpoints(), (std::vector<std::uint64_t>{0, 5}));
  EXPECT_EQ(t.prefix(2).at(1, 1, Moment::m4), 15.0);
  EXPECT_THROW(abe::slice(t, 2, Moment::m1), abe::Error);
  EXPECT_THROW(t.prefix(0), abe::Error);
  EXPECT_THROW(t.prefix(4), abe::Error);
}

TEST(Trajectory, CsvExport) {
  const Trajectory t(Population::source_valid(), {3, 7}, 1, {1, 2, 0.5, -4, 2, 2, 2, 2});
  EXPECT_EQ(abe::to_csv(t), "checkpoint,layer,m1,m2,m3,m4\n3,0,1,2,0.5,-4\n7,0,2,2,2,2\n");
}

TEST(Trajectory, MissingPopulationRejected) {
  abe::testing::TempDir dir("traj");
  const auto manifest = abe::synth::write_toy_run(abe::synth::toy_train(tiny_toy(1)), dir.path());
  const auto loaded = abe::Run::load(manifest);
  EXPECT_THROW(abe::build_trajectory(loaded, Population::other("ood")), abe::Error);
}

}  // namespace
