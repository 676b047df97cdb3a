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

// Hermitian operator algebra for a single spin-F system.
//
// States are ordered |F,m> with m descending, so Fz = diag(F, F-1, ..., -F).
// Operators are expanded on the orthonormal Hermitian basis
// {I/sqrt(d), E_1, ..., E_{d^2-1}} where the E_j are generalized Gell-Mann
// matrices normalized to Tr[E_j E_k] = delta_jk. hbar = 1 throughout.

#include <complex>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace cwm {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
// Writable view of a vector or a matrix row.
using RVectorRef = Eigen::Ref<RVector, 0, Eigen::InnerStride<>>;

inline constexpr double kHermitianTol = 1e-12;

class SpinSystem {
 public:
  // Throws InvalidArgument unless 2F is a positive integer and 2F+1 <= 100.
  static SpinSystem make(double spin);

  double spin() const { return data_->spin; }
  int two_f() const { return data_->two_f; }
  int dim() const { return data_->dim; }
  // Number of traceless basis elements, d^2 - 1.
  int basis_size() const { return data_->dim * data_->dim - 1; }

  const CMatrix& fx() const { return data_->fx; }
  const CMatrix& fy() const { return data_->fy; }
  const CMatrix& fz() const { return data_->fz; }
  const std::vector<CMatrix>& basis() const { return data_->basis; }
  const CMatrix& basis_element(int j) const { return data_->basis.at(j); }

  // Coefficients Tr[E_j A] for every basis element. No Hermiticity check;
  // for hot loops that already hold Hermitian matrices.
  void traceless_coords(const Eigen::Ref<const CMatrix>& a, RVectorRef out) const;
  RVector traceless_coords(const CMatrix& a) const;

  // Copy with basis element j replaced. Only for exercising validation
  // against a deliberately broken basis.
  SpinSystem with_replaced_basis_element(int j, const CMatrix& element) const;

  friend bool operator==(const SpinSystem& a, const SpinSystem& b) {
    return a.two_f() == b.two_f();
  }

 private:
  struct Data {
    double spin = 0.0;
    int two_f = 0;
    int dim = 0;
    CMatrix fx, fy, fz;
    std::vector<CMatrix> basis;
    // Row j is [vec(Re E_j), vec(Im E_j)]; coords = analysis * [vec(Re A); vec(Im A)].
    RMatrix analysis;
  };
  static void rebuild_analysis(Data& data);

  explicit SpinSystem(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  std::shared_ptr<const Data> data_;
};

inline SpinSystem make_spin_system(double spin) { return SpinSystem::make(spin); }

// Hermitian matrix, validated on construction to kHermitianTol relative to
// its Frobenius norm.
class HermitianOperator {
 public:
  HermitianOperator() = default;
  explicit HermitianOperator(CMatrix matrix);

  // Returns (m + m^dagger)/2 without validation.
  static HermitianOperator symmetrized(const CMatrix& matrix);

  const CMatrix& matrix() const { return matrix_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  double trace() const { return matrix_.trace().real(); }

 private:
  struct Unchecked {};
  HermitianOperator(CMatrix matrix, Unchecked) : matrix_(std::move(matrix)) {}
  CMatrix matrix_;
};

// Coordinates of a Hermitian operator: A = trace_part * I/sqrt(d) + sum_j coeffs_j E_j.
struct OperatorVector {
  double trace_part = 0.0;
  RVector coeffs;

  // [trace_part, coeffs...], length d^2.
  RVector full() const;
  static OperatorVector from_full(const RVector& full);
};

bool is_hermitian(const CMatrix& m, double tol = kHermitianTol);

// Tr[A B] for Hermitian A, B.
double hs_inner(const HermitianOperator& a, const HermitianOperator& b);

OperatorVector vectorize(const HermitianOperator& a, const SpinSystem& sys);
OperatorVector vectorize(const CMatrix& a, const SpinSystem& sys);
HermitianOperator devectorize(const OperatorVector& v, const SpinSystem& sys);

// Clips negative eigenvalues and renormalizes to unit trace.
// Throws DegenerateEstimate when no eigenvalue is positive.
HermitianOperator project_positive(const HermitianOperator& rho_hat);

// <psi|rho|psi>. psi must be normalized to 1e-10.
double fidelity(const CVector& psi, const HermitianOperator& rho);

// PSD to -tol, unit trace to tol, Hermitian.
bool is_density_matrix(const HermitianOperator& rho, double tol = 1e-10);

HermitianOperator pure_state(const CVector& psi);

// (|F,F> + |F,-F>)/sqrt(2).
CVector cat_state(const SpinSystem& sys);
// |F, m> for a given magnetic quantum number m.
CVector basis_state(const SpinSystem& sys, double m);

}  // namespace cwm
