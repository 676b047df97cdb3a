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

#pragma once

// Control design: choose the knot angles of a planar control waveform to
// minimize the regularized entropy of the model information matrix, one
// angle at a time, each by exhaustive search over a uniform grid.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cwm/dynamics.hpp"
#include "cwm/estimator.hpp"
#include "cwm/waveform.hpp"

namespace cwm {

struct SearchConfig {
  int grid_size = 32;
  int max_sweeps = 20;
  double tol = 1e-3;  // nats per full sweep
  std::uint64_t seed = 1;
  double eps_rel = kDefaultEntropyEps;
  int knots = 50;
  int threads = 1;

  void validate() const;
};

struct RunDesign {
  ControlWaveform waveform;
  double initial_entropy = 0.0;
  int initial_rank = 0;
  std::vector<double> entropy_trace;  // after each sweep
  std::vector<int> rank_trace;
  long evaluations = 0;
  bool converged = false;
};

struct DesignResult {
  std::vector<RunDesign> runs;
  // Rank and entropy of the combined model information of all runs.
  int final_rank = 0;
  double final_entropy = 0.0;
};

// Regularized entropy of the sigma = 1 model information plus `prior`.
double design_objective(const ControlWaveform& w, const PhysicsParams& p,
                        const InformationMatrix* prior = nullptr,
                        double eps_rel = kDefaultEntropyEps);

// Seeded random initial waveform (uniform angles).
ControlWaveform initial_waveform(const PhysicsParams& p, const SearchConfig& cfg);

// Sweeps over a fixed seeded permutation of the knots. For each knot the G
// grid angles 2 pi g / G are scored and the lowest value replaces the
// incumbent only if strictly better (earliest grid angle wins ties). Stops
// once a sweep improves the entropy by less than tol, or after max_sweeps.
DesignResult coordinate_search(const ControlWaveform& init, const PhysicsParams& p,
                               const SearchConfig& cfg, const InformationMatrix* prior = nullptr);

// Run r (0-based) starts from initial_waveform with seed cfg.seed + r and is
// optimized against the accumulated model information of runs 0..r-1.
DesignResult greedy_multirun(int n_runs, const PhysicsParams& p, const SearchConfig& cfg);

// `sweep,entropy,rank` with sweep 0 the initial waveform.
void write_design_log(const std::filesystem::path& path, const RunDesign& run);

}  // namespace cwm
