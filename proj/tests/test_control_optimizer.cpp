// Copyright 2026 The cwm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "cwm/control_optimizer.hpp"
#include "cwm/errors.hpp"

namespace cwm {
namespace {

PhysicsParams small_problem(double beta = 7.67) {
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(1), beta);
  p.duration = 4e-4;
  p.quadrature_points = 3;
  return p;
}

SearchConfig small_search() {
  SearchConfig cfg;
  cfg.grid_size = 8;
  cfg.knots = 6;
  cfg.max_sweeps = 4;
  return cfg;
}

TEST(DesignObjective, SpinVectorOnlyRankFloor) {
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(3), 0.0);
  p.gamma = 0.0;
  p.duration = 4e-4;
  std::mt19937_64 rng(4);
  const ControlWaveform w = ControlWaveform::random(10, p.duration, rng);
  const RVector eigs = information_spectrum(model_information(observable_history(w, p)).R);
  ASSERT_EQ(numerical_rank(eigs), 3);
  const double lmax = eigs.maxCoeff();
  double want = -45 * std::log(1e-9 * lmax);
  for (Eigen::Index j = 45; j < 48; ++j) want -= std::log(eigs(j) + 1e-9 * lmax);
  EXPECT_NEAR(design_objective(w, p), want, 1e-6 * std::abs(want));
}

TEST(DesignObjective, FixedAxisDriveLosesTransverseDirection) {
  // With phi = 0 the Fx part of Fz(t) is odd in the background shift, so it
  // cancels under the symmetric field average.
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(3), 0.0);
  p.gamma = 0.0;
  p.duration = 4e-4;
  const ControlWaveform flat = ControlWaveform::constant(10, p.duration, 0.0);
  const RVector eigs = information_spectrum(model_information(observable_history(flat, p)).R);
  EXPECT_EQ(numerical_rank(eigs), 2);
}

TEST(DesignObjective, PriorNeverHurts) {
  const PhysicsParams p = small_problem();
  std::mt19937_64 rng(1);
  const ControlWaveform w = ControlWaveform::random(6, p.duration, rng);
  const double alone = design_objective(w, p);
  for (int r = 0; r < 4; ++r) {
    const InformationMatrix prior =
        model_information(observable_history(ControlWaveform::random(6, p.duration, rng), p));
    EXPECT_LE(design_objective(w, p, &prior), alone + 1e-9);
  }
}

TEST(DesignObjective, RotationSymmetry) {
  PhysicsParams p = small_problem(0.0);
  std::mt19937_64 rng(2);
  const ControlWaveform w = ControlWaveform::random(6, p.duration, rng);
  EXPECT_NEAR(design_objective(w.rotated(1.1), p), design_objective(w, p), 1e-8);
  p.beta = 7.67;
  EXPECT_GT(std::abs(design_objective(w.rotated(1.1), p) - design_objective(w, p)), 1e-3);
}

TEST(CoordinateSearch, TraceAndBudget) {
  const PhysicsParams p = small_problem();
  const SearchConfig cfg = small_search();
  const DesignResult res = coordinate_search(initial_waveform(p, cfg), p, cfg);
  const RunDesign& run = res.runs.front();
  ASSERT_FALSE(run.entropy_trace.empty());
  EXPECT_LE(run.entropy_trace.front(), run.initial_entropy);
  for (std::size_t s = 1; s < run.entropy_trace.size(); ++s) {
    EXPECT_LE(run.entropy_trace[s], run.entropy_trace[s - 1]);
  }
  EXPECT_LE(run.evaluations, static_cast<long>(cfg.max_sweeps) * cfg.knots * cfg.grid_size);
  EXPECT_NEAR(res.final_entropy, design_objective(run.waveform, p), 1e-8);
  EXPECT_EQ(res.final_rank, 8);
}

TEST(CoordinateSearch, Deterministic) {
  const PhysicsParams p = small_problem();
  const SearchConfig cfg = small_search();
  const DesignResult a = coordinate_search(initial_waveform(p, cfg), p, cfg);
  const DesignResult b = coordinate_search(initial_waveform(p, cfg), p, cfg);
  SearchConfig threaded = cfg;
  threaded.threads = 3;
  const DesignResult c = coordinate_search(initial_waveform(p, cfg), p, threaded);
  for (const DesignResult* other : {&b, &c}) {
    EXPECT_EQ(a.final_entropy, other->final_entropy);
    for (int k = 0; k < cfg.knots; ++k) {
      EXPECT_EQ(a.runs[0].waveform.knot_angle(k), other->runs[0].waveform.knot_angle(k));
    }
  }
}

TEST(CoordinateSearch, StationaryStartStopsAfterOneSweep) {
  const PhysicsParams p = small_problem();
  SearchConfig cfg = small_search();
  cfg.max_sweeps = 30;
  cfg.tol = 1e-14;
  const DesignResult settled = coordinate_search(initial_waveform(p, cfg), p, cfg);
  ASSERT_TRUE(settled.runs[0].converged);
  const ControlWaveform& w = settled.runs[0].waveform;
  const DesignResult again = coordinate_search(w, p, cfg);
  EXPECT_EQ(again.runs[0].entropy_trace.size(), 1u);
  EXPECT_TRUE(again.runs[0].converged);
  for (int k = 0; k < cfg.knots; ++k) EXPECT_EQ(again.runs[0].waveform.knot_angle(k), w.knot_angle(k));
}

TEST(CoordinateSearch, RejectsCoarseGrid) {
  const PhysicsParams p = small_problem();
  SearchConfig cfg = small_search();
  cfg.grid_size = 4;
  EXPECT_THROW(coordinate_search(ControlWaveform::constant(6, p.duration), p, cfg), InvalidArgument);
}

TEST(GreedyMultirun, SingleRunEqualsCoordinateSearch) {
  const PhysicsParams p = small_problem();
  const SearchConfig cfg = small_search();
  const DesignResult greedy = greedy_multirun(1, p, cfg);
  const DesignResult direct = coordinate_search(initial_waveform(p, cfg), p, cfg);
  EXPECT_EQ(greedy.final_rank, direct.final_rank);
  EXPECT_NEAR(greedy.final_entropy, direct.final_entropy, 1e-9);
  for (int k = 0; k < cfg.knots; ++k) {
    EXPECT_EQ(greedy.runs[0].waveform.knot_angle(k), direct.runs[0].waveform.knot_angle(k));
  }
}

TEST(GreedyMultirun, CombinedRankNonDecreasing) {
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(2), 0.81);
  p.duration = 2e-4;
  p.quadrature_points = 1;
  SearchConfig cfg = small_search();
  cfg.max_sweeps = 2;
  const DesignResult res = greedy_multirun(3, p, cfg);
  ASSERT_EQ(res.runs.size(), 3u);
  InformationMatrix combined = InformationMatrix::zero(p.sys.basis_size());
  int last_rank = 0;
  double last_entropy = INFINITY;
  for (const RunDesign& run : res.runs) {
    combined += model_information(observable_history(run.waveform, p));
    const RVector eigs = information_spectrum(combined.R);
    EXPECT_GE(numerical_rank(eigs), last_rank);
    last_rank = numerical_rank(eigs);
    last_entropy = entropy_of_spectrum(eigs);
  }
  EXPECT_EQ(res.final_rank, last_rank);
  // The reference goes through the Gram eigensolver, which carries rounding at the floor.
  EXPECT_NEAR(res.final_entropy, last_entropy, 1e-8 * std::abs(last_entropy));
}

TEST(DesignLog, Format) {
  RunDesign run;
  run.initial_entropy = -10.5;
  run.initial_rank = 7;
  run.entropy_trace = {-12.0, -12.25};
  run.rank_trace = {8, 8};
  const auto path = std::filesystem::temp_directory_path() / "cwm_design_log.csv";
  write_design_log(path, run);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text, "sweep,entropy,rank\n0,-10.5,7\n1,-12,8\n2,-12.25,8\n");
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace cwm
