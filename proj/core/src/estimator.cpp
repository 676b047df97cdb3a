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

#include "cwm/estimator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cwm/errors.hpp"

namespace cwm {

namespace {

double noise_weight(double sigma) { return sigma > 0.0 ? 1.0 / (sigma * sigma) : 1.0; }

Eigen::SelfAdjointEigenSolver<RMatrix> eigensolve(const RMatrix& R) {
  if (!R.allFinite()) throw NumericalFailure("information matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(R);
  if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver failed on information matrix");
  return eig;
}

std::string format_number(double x) {
  std::ostringstream s;
  s << std::setprecision(12) << x;
  return s.str();
}

}  // namespace

InformationMatrix InformationMatrix::zero(int basis_size) {
  InformationMatrix info;
  info.R = RMatrix::Zero(basis_size, basis_size);
  info.b = RVector::Zero(basis_size);
  return info;
}

InformationMatrix& InformationMatrix::operator+=(const InformationMatrix& other) {
  if (other.size() != size()) throw InvalidArgument("information matrices differ in size");
  R += other.R;
  b += other.b;
  sample_count += other.sample_count;
  if (sigma == 0.0) sigma = other.sigma;
  return *this;
}

InformationMatrix accumulate(const ObservableHistory& hist, const MeasurementRecord& rec) {
  if (rec.size() != hist.size()) {
    throw InvalidArgument("accumulate: record length " + std::to_string(rec.size()) +
                          " does not match history length " + std::to_string(hist.size()));
  }
  const double weight = noise_weight(rec.sigma);
  const RMatrix& a = hist.coeffs();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(hist.system().dim()));
  // Tr[O_i]/d = trace_part_i / sqrt(d).
  const RVector residual = rec.values - hist.trace_parts() * inv_sqrt_d;

  InformationMatrix info;
  info.R = RMatrix::Zero(a.cols(), a.cols());
  info.R.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), weight);
  info.R.triangularView<Eigen::StrictlyUpper>() = info.R.transpose();
  info.b = weight * (a.transpose() * residual);
  info.sample_count = rec.size();
  info.sigma = rec.sigma;
  return info;
}

InformationMatrix accumulate(const ObservableHistory& hist, const MeasurementRecord& rec,
                             const InformationMatrix& prior) {
  InformationMatrix info = prior;
  info += accumulate(hist, rec);
  return info;
}

InformationMatrix model_information(const ObservableHistory& hist, double sigma) {
  const RMatrix& a = hist.coeffs();
  InformationMatrix info = InformationMatrix::zero(static_cast<int>(a.cols()));
  info.R.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose(), noise_weight(sigma));
  info.R.triangularView<Eigen::StrictlyUpper>() = info.R.transpose();
  info.sample_count = hist.size();
  info.sigma = sigma;
  return info;
}

RVector information_spectrum(const RMatrix& R) {
  if (!R.allFinite()) throw NumericalFailure("information matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(R, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver failed on information matrix");
  return eig.eigenvalues();
}

int numerical_rank(const RVector& eigenvalues, double rcond) {
  if (eigenvalues.size() == 0) return 0;
  const double top = eigenvalues.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<int>((eigenvalues.array() > rcond * top).count());
}

HermitianOperator estimate(const InformationMatrix& info, const SpinSystem& sys, double rcond) {
  if (info.size() != sys.basis_size() || info.b.size() != info.size()) {
    throw InvalidArgument("estimate: information matrix does not match spin system");
  }
  const auto eig = eigensolve(info.R);
  const RVector& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) throw NoInformation("information matrix is zero");

  const RMatrix& v = eig.eigenvectors();
  const RVector projected = v.transpose() * info.b;
  RVector scaled = RVector::Zero(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) >= rcond * top) scaled(k) = projected(k) / lambda(k);
  }
  OperatorVector c{1.0 / std::sqrt(static_cast<double>(sys.dim())), v * scaled};
  return devectorize(c, sys);
}

double entropy_of_spectrum(const RVector& eigenvalues, double eps_rel) {
  const RVector clipped = eigenvalues.cwiseMax(0.0);
  const double top = std::max(clipped.size() ? clipped.maxCoeff() : 0.0,
                              std::numeric_limits<double>::epsilon());
  const double floor = eps_rel * top;
  double s = 0.0;
  for (Eigen::Index j = 0; j < clipped.size(); ++j) s -= std::log(clipped(j) + floor);
  return s;
}

double entropy(const InformationMatrix& info, double eps_rel) {
  return entropy_of_spectrum(information_spectrum(info.R), eps_rel);
}

ReconstructionResult reconstruct(std::span<const RunData> runs,
                                 const std::optional<CVector>& reference, double rcond,
                                 double eps_rel) {
  if (runs.empty()) throw InvalidArgument("reconstruct needs at least one run");
  const SpinSystem& sys = runs.front().history.system();
  InformationMatrix info = InformationMatrix::zero(sys.basis_size());
  for (const RunData& run : runs) {
    if (!(run.history.system() == sys)) throw InvalidArgument("runs use different spin systems");
    info += accumulate(apply_filter(run.history, run.record.filter_window), run.record);
  }

  ReconstructionResult result;
  result.rho_hat = estimate(info, sys, rcond);
  result.rho_pos = project_positive(result.rho_hat);
  result.eigenvalues = information_spectrum(info.R);
  result.entropy = entropy_of_spectrum(result.eigenvalues, eps_rel);
  result.rank = numerical_rank(result.eigenvalues, rcond);
  if (reference) result.fidelity = fidelity(*reference, result.rho_pos);
  return result;
}

void write_result_summary(const std::filesystem::path& path, std::span<const ResultRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open result file for writing: " + path.string());
  out << "run_id,snr,rank,entropy,fidelity\n";
  for (const ResultRow& r : rows) {
    out << r.run_id << ',' << format_number(r.snr) << ',' << r.rank << ','
        << format_number(r.entropy) << ',' << format_number(r.fidelity) << '\n';
  }
  if (!out) throw IoError("failed writing result file: " + path.string());
}

void write_density_matrix(const std::filesystem::path& path, const HermitianOperator& rho) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open matrix file for writing: " + path.string());
  const CMatrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_number(m(r, c).real()) << ',' << format_number(m(r, c).imag());
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing matrix file: " + path.string());
}

HermitianOperator read_density_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file: " + path.string());
  std::vector<std::vector<Complex>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> numbers;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        numbers.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("malformed matrix entry in " + path.string());
      }
    }
    if (numbers.size() % 2 != 0) throw ConfigError("matrix row needs re,im pairs: " + path.string());
    std::vector<Complex> row;
    for (std::size_t k = 0; k < numbers.size(); k += 2) row.emplace_back(numbers[k], numbers[k + 1]);
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  CMatrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != n) {
      throw ConfigError("matrix file is not square: " + path.string());
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  // 12 significant digits: accept Hermiticity at that precision, then symmetrize.
  if ((m - m.adjoint()).norm() > 1e-9 * std::max(1.0, m.norm())) {
    throw InvalidArgument("matrix file is not Hermitian: " + path.string());
  }
  return HermitianOperator::symmetrized(m);
}

}  // namespace cwm
