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

#include "cwm/operator_algebra.hpp"

#include <cmath>
#include <string>

#include "cwm/errors.hpp"

namespace cwm {

namespace {

void check_same_dim(int a, int b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

SpinSystem SpinSystem::make(double spin) {
  const double twice = 2.0 * spin;
  const long two_f = std::lround(twice);
  if (!std::isfinite(spin) || std::abs(twice - static_cast<double>(two_f)) > 1e-9 || two_f < 1) {
    throw InvalidArgument("spin must be a positive half-integer, got " + std::to_string(spin));
  }
  const int d = static_cast<int>(two_f) + 1;
  if (d > 100) {
    throw InvalidArgument("spin dimension 2F+1 must not exceed 100");
  }

  auto data = std::make_shared<Data>();
  data->two_f = static_cast<int>(two_f);
  data->spin = 0.5 * static_cast<double>(two_f);
  data->dim = d;
  const double f = data->spin;

  // Index a carries m = F - a. F+ |m> = sqrt(F(F+1) - m(m+1)) |m+1>.
  CMatrix raise = CMatrix::Zero(d, d);
  data->fz = CMatrix::Zero(d, d);
  for (int a = 0; a < d; ++a) {
    const double m = f - a;
    data->fz(a, a) = m;
    if (a > 0) raise(a - 1, a) = std::sqrt(f * (f + 1.0) - m * (m + 1.0));
  }
  const CMatrix lower = raise.adjoint();
  data->fx = 0.5 * (raise + lower);
  data->fy = Complex(0.0, -0.5) * (raise - lower);

  // Generalized Gell-Mann: symmetric, antisymmetric, then diagonal.
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  data->basis.reserve(static_cast<std::size_t>(d * d - 1));
  for (int j = 0; j < d; ++j) {
    for (int k = j + 1; k < d; ++k) {
      CMatrix e = CMatrix::Zero(d, d);
      e(j, k) = inv_sqrt2;
      e(k, j) = inv_sqrt2;
      data->basis.push_back(std::move(e));
    }
  }
  for (int j = 0; j < d; ++j) {
    for (int k = j + 1; k < d; ++k) {
      CMatrix e = CMatrix::Zero(d, d);
      e(j, k) = Complex(0.0, -inv_sqrt2);
      e(k, j) = Complex(0.0, inv_sqrt2);
      data->basis.push_back(std::move(e));
    }
  }
  for (int l = 1; l < d; ++l) {
    CMatrix e = CMatrix::Zero(d, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l) * (l + 1));
    for (int a = 0; a < l; ++a) e(a, a) = norm;
    e(l, l) = -static_cast<double>(l) * norm;
    data->basis.push_back(std::move(e));
  }
  rebuild_analysis(*data);
  return SpinSystem(std::move(data));
}

void SpinSystem::rebuild_analysis(Data& data) {
  const int d = data.dim;
  const int dd = d * d;
  data.analysis.resize(dd - 1, 2 * dd);
  for (int j = 0; j < dd - 1; ++j) {
    const CMatrix& e = data.basis[static_cast<std::size_t>(j)];
    data.analysis.row(j).head(dd) = e.real().reshaped().transpose();
    data.analysis.row(j).tail(dd) = e.imag().reshaped().transpose();
  }
}

void SpinSystem::traceless_coords(const Eigen::Ref<const CMatrix>& a, RVectorRef out) const {
  const int dd = dim() * dim();
  const auto& analysis = data_->analysis;
  out.noalias() = analysis.leftCols(dd) * a.real().reshaped();
  out.noalias() += analysis.rightCols(dd) * a.imag().reshaped();
}

RVector SpinSystem::traceless_coords(const CMatrix& a) const {
  RVector out(basis_size());
  traceless_coords(a, out);
  return out;
}

SpinSystem SpinSystem::with_replaced_basis_element(int j, const CMatrix& element) const {
  if (j < 0 || j >= basis_size()) throw InvalidArgument("basis index out of range");
  check_same_dim(static_cast<int>(element.rows()), dim(), "with_replaced_basis_element");
  auto data = std::make_shared<Data>(*data_);
  data->basis[static_cast<std::size_t>(j)] = element;
  rebuild_analysis(*data);
  return SpinSystem(std::move(data));
}

bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).norm() <= tol * m.norm();
}

HermitianOperator::HermitianOperator(CMatrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw InvalidArgument("operator must be square");
  if (!matrix_.allFinite()) throw InvalidArgument("operator has non-finite entries");
  if (!is_hermitian(matrix_)) throw InvalidArgument("operator is not Hermitian");
}

HermitianOperator HermitianOperator::symmetrized(const CMatrix& matrix) {
  if (matrix.rows() != matrix.cols()) throw InvalidArgument("operator must be square");
  return HermitianOperator(CMatrix(0.5 * (matrix + matrix.adjoint())), Unchecked{});
}

RVector OperatorVector::full() const {
  RVector out(coeffs.size() + 1);
  out(0) = trace_part;
  out.tail(coeffs.size()) = coeffs;
  return out;
}

OperatorVector OperatorVector::from_full(const RVector& full) {
  if (full.size() < 1) throw InvalidArgument("empty operator vector");
  return OperatorVector{full(0), full.tail(full.size() - 1)};
}

double hs_inner(const HermitianOperator& a, const HermitianOperator& b) {
  check_same_dim(a.dim(), b.dim(), "hs_inner");
  // Tr[AB] = sum_ab A_ab B_ba = sum_ab A_ab conj(B_ab) for Hermitian B.
  return (a.matrix().array() * b.matrix().conjugate().array()).sum().real();
}

OperatorVector vectorize(const HermitianOperator& a, const SpinSystem& sys) {
  check_same_dim(a.dim(), sys.dim(), "vectorize");
  return OperatorVector{a.trace() / std::sqrt(static_cast<double>(sys.dim())),
                        sys.traceless_coords(a.matrix())};
}

OperatorVector vectorize(const CMatrix& a, const SpinSystem& sys) {
  return vectorize(HermitianOperator(a), sys);
}

HermitianOperator devectorize(const OperatorVector& v, const SpinSystem& sys) {
  if (v.coeffs.size() != sys.basis_size()) {
    throw InvalidArgument("devectorize: coefficient count does not match spin system");
  }
  const int d = sys.dim();
  CMatrix a = CMatrix::Identity(d, d) * (v.trace_part / std::sqrt(static_cast<double>(d)));
  for (int j = 0; j < sys.basis_size(); ++j) {
    if (v.coeffs(j) != 0.0) a += v.coeffs(j) * sys.basis_element(j);
  }
  return HermitianOperator::symmetrized(a);
}

HermitianOperator project_positive(const HermitianOperator& rho_hat) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho_hat.matrix());
  if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver failed in project_positive");
  RVector clipped = eig.eigenvalues().cwiseMax(0.0);
  const double total = clipped.sum();
  if (!(total > 0.0)) {
    throw DegenerateEstimate("estimate has no positive eigenvalue");
  }
  clipped /= total;
  const CMatrix& v = eig.eigenvectors();
  return HermitianOperator::symmetrized(v * clipped.cast<Complex>().asDiagonal() * v.adjoint());
}

double fidelity(const CVector& psi, const HermitianOperator& rho) {
  check_same_dim(static_cast<int>(psi.size()), rho.dim(), "fidelity");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw InvalidArgument("fidelity: state is not normalized");
  const double f = psi.dot(rho.matrix() * psi).real();
  return std::clamp(f, 0.0, 1.0);
}

bool is_density_matrix(const HermitianOperator& rho, double tol) {
  if (!is_hermitian(rho.matrix())) return false;
  if (std::abs(rho.trace() - 1.0) > tol) return false;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.matrix(), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -tol;
}

HermitianOperator pure_state(const CVector& psi) {
  return HermitianOperator::symmetrized(psi * psi.adjoint());
}

CVector cat_state(const SpinSystem& sys) {
  CVector psi = CVector::Zero(sys.dim());
  psi(0) = 1.0 / std::sqrt(2.0);
  psi(sys.dim() - 1) = 1.0 / std::sqrt(2.0);
  return psi;
}

CVector basis_state(const SpinSystem& sys, double m) {
  const double index = sys.spin() - m;
  const long a = std::lround(index);
  if (std::abs(index - static_cast<double>(a)) > 1e-9 || a < 0 || a >= sys.dim()) {
    throw InvalidArgument("magnetic quantum number out of range");
  }
  CVector psi = CVector::Zero(sys.dim());
  psi(a) = 1.0;
  return psi;
}

}  // namespace cwm
