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

#include "cwm/control_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "cwm/errors.hpp"

namespace cwm {

namespace {

struct Score {
  double entropy;
  int rank;
};

// Work with square-root factors: the spectrum of a Gram matrix is taken from
// the singular values of its rows, which keeps the null directions at the
// level of the regularization floor instead of at rounding of the product.

RMatrix stack(const RMatrix& top, const Eigen::Ref<const RMatrix>& bottom) {
  RMatrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

// Upper-triangular T with T^T T = rows^T rows.
RMatrix triangular_factor(const RMatrix& rows) {
  const auto n = rows.cols();
  RMatrix t = RMatrix::Zero(n, n);
  if (rows.rows() == 0) return t;
  const Eigen::HouseholderQR<RMatrix> qr(rows);
  const auto r = std::min(rows.rows(), n);
  t.topRows(r) = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  return t;
}

// Ascending eigenvalues of rows^T rows.
RVector gram_spectrum(const RMatrix& rows) {
  if (!rows.allFinite()) throw NumericalFailure("information rows have non-finite entries");
  const Eigen::JacobiSVD<RMatrix> svd(triangular_factor(rows));
  RVector s = svd.singularValues().cwiseAbs2();
  std::reverse(s.data(), s.data() + s.size());
  return s;
}

Score score(const RMatrix& rows, double eps_rel) {
  const RVector spectrum = gram_spectrum(rows);
  return {entropy_of_spectrum(spectrum, eps_rel), numerical_rank(spectrum)};
}

RMatrix prior_factor(const InformationMatrix* prior, int n) {
  if (prior == nullptr) return RMatrix(0, n);
  if (prior->size() != n) throw InvalidArgument("prior information does not match spin system");
  const Eigen::SelfAdjointEigenSolver<RMatrix> eig(prior->R);
  if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver failed on prior information");
  return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

DesignResult search_with_factor(const ControlWaveform& init, const PhysicsParams& p,
                                const SearchConfig& cfg, const RMatrix& prior_rows);

}  // namespace

void SearchConfig::validate() const {
  if (grid_size < 8) throw InvalidArgument("grid_size must be >= 8");
  if (max_sweeps < 1) throw InvalidArgument("max_sweeps must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!(eps_rel >= 0.0)) throw InvalidArgument("eps_rel must be >= 0");
  if (knots < 4) throw InvalidArgument("need at least 4 knots");
  if (threads < 1) throw InvalidArgument("threads must be >= 1");
}

double design_objective(const ControlWaveform& w, const PhysicsParams& p,
                        const InformationMatrix* prior, double eps_rel) {
  const ObservableHistory hist = observable_history(w, p);
  return score(stack(prior_factor(prior, p.sys.basis_size()), hist.coeffs()), eps_rel).entropy;
}

ControlWaveform initial_waveform(const PhysicsParams& p, const SearchConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return ControlWaveform::random(cfg.knots, p.duration, rng);
}

DesignResult coordinate_search(const ControlWaveform& init, const PhysicsParams& p,
                               const SearchConfig& cfg, const InformationMatrix* prior) {
  return search_with_factor(init, p, cfg, prior_factor(prior, p.sys.basis_size()));
}

namespace {

DesignResult search_with_factor(const ControlWaveform& init, const PhysicsParams& p,
                                const SearchConfig& cfg, const RMatrix& prior_rows) {
  cfg.validate();
  IncrementalHistory state(init, p);
  const int n = init.knot_count();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(order.begin(), order.end(), rng);

  RunDesign run;
  Score current = score(stack(prior_rows, state.coeffs()), cfg.eps_rel);
  run.initial_entropy = current.entropy;
  run.initial_rank = current.rank;

  const int grid = cfg.grid_size;
  const int workers = std::min(cfg.threads, grid);
  std::vector<RMatrix> scratch(static_cast<std::size_t>(workers));
  std::vector<double> values(static_cast<std::size_t>(grid));

  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    if (sweep > 0) state.refresh();
    const double sweep_start = current.entropy;
    for (int k : order) {
      const int first = state.first_affected_bin(k);
      const RMatrix fixed = triangular_factor(stack(prior_rows, state.coeffs().topRows(first)));

      const auto evaluate = [&](int worker) {
        RMatrix& rows = scratch[static_cast<std::size_t>(worker)];
        for (int g = worker; g < grid; g += workers) {
          const double angle = 2.0 * std::numbers::pi * g / grid;
          state.candidate(k, angle, rows);
          values[static_cast<std::size_t>(g)] = score(stack(fixed, rows.bottomRows(rows.rows() - first)), cfg.eps_rel).entropy;
        }
      };
      if (workers == 1) {
        evaluate(0);
      } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(evaluate, t);
      }
      run.evaluations += grid;

      int best = -1;
      double best_value = current.entropy - 1e-12 * std::max(1.0, std::abs(current.entropy));
      for (int g = 0; g < grid; ++g) {
        if (values[static_cast<std::size_t>(g)] < best_value) {
          best_value = values[static_cast<std::size_t>(g)];
          best = g;
        }
      }
      if (best >= 0) {
        state.commit(k, 2.0 * std::numbers::pi * best / grid);
        current = score(stack(prior_rows, state.coeffs()), cfg.eps_rel);
      }
    }
    run.entropy_trace.push_back(current.entropy);
    run.rank_trace.push_back(current.rank);
    if (sweep_start - current.entropy < cfg.tol) {
      run.converged = true;
      break;
    }
  }
  run.waveform = state.waveform();

  DesignResult result;
  result.final_rank = current.rank;
  result.final_entropy = current.entropy;
  result.runs.push_back(std::move(run));
  return result;
}

}  // namespace

DesignResult greedy_multirun(int n_runs, const PhysicsParams& p, const SearchConfig& cfg) {
  if (n_runs < 1) throw InvalidArgument("n_runs must be >= 1");
  DesignResult result;
  RMatrix combined(0, p.sys.basis_size());
  for (int r = 0; r < n_runs; ++r) {
    SearchConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(r);
    DesignResult single = search_with_factor(initial_waveform(p, run_cfg), p, run_cfg, combined);
    const ObservableHistory hist = observable_history(single.runs.front().waveform, p);
    combined = triangular_factor(stack(combined, hist.coeffs()));
    result.runs.push_back(std::move(single.runs.front()));
  }
  const RVector spectrum = gram_spectrum(combined);
  result.final_rank = numerical_rank(spectrum);
  result.final_entropy = entropy_of_spectrum(spectrum, cfg.eps_rel);
  return result;
}

void write_design_log(const std::filesystem::path& path, const RunDesign& run) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open design log for writing: " + path.string());
  out << "sweep,entropy,rank\n" << std::setprecision(12);
  out << 0 << ',' << run.initial_entropy << ',' << run.initial_rank << '\n';
  for (std::size_t s = 0; s < run.entropy_trace.size(); ++s) {
    out << s + 1 << ',' << run.entropy_trace[s] << ',' << run.rank_trace[s] << '\n';
  }
  if (!out) throw IoError("failed writing design log: " + path.string());
}

}  // namespace cwm
