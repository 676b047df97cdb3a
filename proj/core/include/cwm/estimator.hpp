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

// Linear-Gaussian state estimation on the traceless operator coordinates.
//
// With rho = I/d + sum_j c_j E_j, every sample obeys
//   M_i - Tr[O_i]/d = A_i . c + noise,
// where A_i are the traceless coordinates of O_i. The trace is fixed exactly
// by the parameterization, which is the zero-variance limit of a trace
// pseudo-measurement.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cwm/dynamics.hpp"
#include "cwm/measurement.hpp"
#include "cwm/operator_algebra.hpp"

namespace cwm {

inline constexpr double kDefaultRcond = 1e-10;
inline constexpr double kDefaultEntropyEps = 1e-9;

// R = sum_i A_i A_i^T / sigma^2 and b = sum_i (M_i - Tr[O_i]/d) A_i / sigma^2.
// A noiseless record (sigma = 0) is weighted as if sigma = 1.
struct InformationMatrix {
  RMatrix R;
  RVector b;
  long sample_count = 0;
  double sigma = 0.0;

  static InformationMatrix zero(int basis_size);
  int size() const { return static_cast<int>(R.rows()); }
  InformationMatrix& operator+=(const InformationMatrix& other);
};

// `hist` must already carry the record's filter (see apply_filter).
InformationMatrix accumulate(const ObservableHistory& hist, const MeasurementRecord& rec);
InformationMatrix accumulate(const ObservableHistory& hist, const MeasurementRecord& rec,
                             const InformationMatrix& prior);

// R for a history at a given noise level, with b = 0.
InformationMatrix model_information(const ObservableHistory& hist, double sigma = 1.0);

// Pseudo-inverse least squares: directions with eigenvalue below
// rcond * lambda_max keep the maximally mixed value. Throws NoInformation
// when R is zero.
HermitianOperator estimate(const InformationMatrix& info, const SpinSystem& sys,
                           double rcond = kDefaultRcond);

// S = -sum_j log(lambda_j + eps_rel * lambda_max) over all eigenvalues of R.
double entropy(const InformationMatrix& info, double eps_rel = kDefaultEntropyEps);
double entropy_of_spectrum(const RVector& eigenvalues, double eps_rel = kDefaultEntropyEps);

RVector information_spectrum(const RMatrix& R);
int numerical_rank(const RVector& eigenvalues, double rcond = kDefaultRcond);

struct RunData {
  ObservableHistory history;  // unfiltered model history of the run
  MeasurementRecord record;
};

struct ReconstructionResult {
  HermitianOperator rho_hat;
  HermitianOperator rho_pos;
  double entropy = 0.0;
  int rank = 0;
  std::optional<double> fidelity;
  RVector eigenvalues;
};

// Filters each history with its record's window, accumulates every run,
// estimates, projects onto density matrices and scores against `reference`.
ReconstructionResult reconstruct(std::span<const RunData> runs,
                                 const std::optional<CVector>& reference = std::nullopt,
                                 double rcond = kDefaultRcond,
                                 double eps_rel = kDefaultEntropyEps);

struct ResultRow {
  int run_id = 0;
  double snr = 0.0;
  int rank = 0;
  double entropy = 0.0;
  double fidelity = 0.0;
};

// `run_id,snr,rank,entropy,fidelity`.
void write_result_summary(const std::filesystem::path& path, std::span<const ResultRow> rows);
// One row per matrix row, `re,im` pairs with 12 significant digits.
void write_density_matrix(const std::filesystem::path& path, const HermitianOperator& rho);
HermitianOperator read_density_matrix(const std::filesystem::path& path);

}  // namespace cwm
