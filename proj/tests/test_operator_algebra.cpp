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
#include <random>

#include <gtest/gtest.h>

#include "cwm/errors.hpp"
#include "cwm/operator_algebra.hpp"
#include "cwm/validation.hpp"

namespace cwm {
namespace {

using namespace std::complex_literals;

class SpinSizes : public ::testing::TestWithParam<double> {};

TEST_P(SpinSizes, CommutationRelations) {
  const SpinSystem sys = SpinSystem::make(GetParam());
  const CMatrix &x = sys.fx(), &y = sys.fy(), &z = sys.fz();
  EXPECT_LT((x * y - y * x - 1i * z).norm(), 1e-12);
  EXPECT_LT((y * z - z * y - 1i * x).norm(), 1e-12);
  EXPECT_LT((z * x - x * z - 1i * y).norm(), 1e-12);
}

TEST_P(SpinSizes, CasimirAndFzDiagonal) {
  const double f = GetParam();
  const SpinSystem sys = SpinSystem::make(f);
  const CMatrix c = sys.fx() * sys.fx() + sys.fy() * sys.fy() + sys.fz() * sys.fz();
  EXPECT_LT((c - f * (f + 1) * CMatrix::Identity(sys.dim(), sys.dim())).norm(), 1e-12);
  for (int i = 0; i < sys.dim(); ++i) {
    EXPECT_DOUBLE_EQ(sys.fz()(i, i).real(), f - i);
  }
  EXPECT_DOUBLE_EQ((sys.fz() - CMatrix(sys.fz().diagonal().asDiagonal())).norm(), 0.0);
}

TEST_P(SpinSizes, BasisIsOrthonormalAndTraceless) {
  const SpinSystem sys = SpinSystem::make(GetParam());
  ASSERT_EQ(static_cast<int>(sys.basis().size()), sys.dim() * sys.dim() - 1);
  for (int j = 0; j < sys.basis_size(); ++j) {
    EXPECT_LT(std::abs(sys.basis_element(j).trace()), 1e-14);
    EXPECT_TRUE(is_hermitian(sys.basis_element(j)));
    for (int k = 0; k < sys.basis_size(); ++k) {
      const double g = (sys.basis_element(j) * sys.basis_element(k)).trace().real();
      EXPECT_NEAR(g, j == k ? 1.0 : 0.0, 1e-13);
    }
  }
}

TEST_P(SpinSizes, VectorizeRoundTrip) {
  const SpinSystem sys = SpinSystem::make(GetParam());
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 5; ++trial) {
    CMatrix g(sys.dim(), sys.dim());
    for (auto& v : g.reshaped()) v = Complex(normal(rng), normal(rng));
    const HermitianOperator a = HermitianOperator::symmetrized(g);
    const HermitianOperator back = devectorize(vectorize(a, sys), sys);
    EXPECT_LT((back.matrix() - a.matrix()).norm(), 1e-12 * a.matrix().norm());
  }
}

INSTANTIATE_TEST_SUITE_P(Spins, SpinSizes, ::testing::Values(0.5, 1.0, 1.5, 3.0, 4.0));

TEST(SpinSystem, Dimensions) {
  const SpinSystem half = SpinSystem::make(0.5);
  EXPECT_EQ(half.dim(), 2);
  EXPECT_DOUBLE_EQ(half.fz()(0, 0).real(), 0.5);
  EXPECT_DOUBLE_EQ(half.fz()(1, 1).real(), -0.5);
  EXPECT_EQ(SpinSystem::make(3).basis_size(), 48);
  EXPECT_EQ(SpinSystem::make(4).basis_size(), 80);
}

TEST(SpinSystem, RejectsBadSpin) {
  EXPECT_THROW(SpinSystem::make(0.0), InvalidArgument);
  EXPECT_THROW(SpinSystem::make(0.3), InvalidArgument);
  EXPECT_THROW(SpinSystem::make(-1.0), InvalidArgument);
  EXPECT_THROW(SpinSystem::make(50.0), InvalidArgument);
}

TEST(HsInner, KnownValues) {
  const SpinSystem half = SpinSystem::make(0.5);
  const HermitianOperator zh(half.fz());
  EXPECT_NEAR(hs_inner(zh, zh), 0.5, 1e-15);
  const SpinSystem three = SpinSystem::make(3);
  const HermitianOperator z3(three.fz());
  EXPECT_NEAR(hs_inner(z3, z3), 28.0, 1e-12);
  const HermitianOperator e2(three.basis_element(2)), e5(three.basis_element(5));
  EXPECT_NEAR(hs_inner(e2, e2), 1.0, 1e-14);
  EXPECT_NEAR(hs_inner(e2, e5), 0.0, 1e-14);
}

TEST(Vectorize, IdentityAndBasisElement) {
  const SpinSystem sys = SpinSystem::make(1.5);
  const int d = sys.dim();
  const OperatorVector mixed = vectorize(CMatrix(CMatrix::Identity(d, d) / d), sys);
  EXPECT_NEAR(mixed.trace_part, 1.0 / std::sqrt(d), 1e-15);
  EXPECT_LT(mixed.coeffs.norm(), 1e-15);
  const OperatorVector e5 = vectorize(sys.basis_element(5), sys);
  EXPECT_NEAR(e5.trace_part, 0.0, 1e-15);
  RVector unit = RVector::Zero(sys.basis_size());
  unit(5) = 1.0;
  EXPECT_LT((e5.coeffs - unit).norm(), 1e-14);
}

TEST(HermitianOperator, RejectsNonHermitian) {
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 1) = 1e-6;
  EXPECT_THROW(HermitianOperator{m}, InvalidArgument);
  CMatrix nonsquare(2, 3);
  nonsquare.setZero();
  EXPECT_THROW(HermitianOperator{nonsquare}, InvalidArgument);
}

TEST(ProjectPositive, Examples) {
  const HermitianOperator valid(CMatrix(Eigen::Vector2cd(0.5, 0.5).asDiagonal()));
  EXPECT_LT((project_positive(valid).matrix() - valid.matrix()).norm(), 1e-15);

  const HermitianOperator neg(CMatrix(Eigen::Vector3cd(0.6, 0.6, -0.2).asDiagonal()));
  const CMatrix expected = Eigen::Vector3cd(0.5, 0.5, 0.0).asDiagonal();
  EXPECT_LT((project_positive(neg).matrix() - expected).norm(), 1e-14);

  const HermitianOperator bad(CMatrix(Eigen::Vector2cd(-1.0, -1.0).asDiagonal()));
  EXPECT_THROW(project_positive(bad), DegenerateEstimate);
}

TEST(ProjectPositive, AlwaysDensityMatrix) {
  const SpinSystem sys = SpinSystem::make(3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    CMatrix g(sys.dim(), sys.dim());
    for (auto& v : g.reshaped()) v = Complex(normal(rng), normal(rng));
    CMatrix h = 0.5 * (g + g.adjoint());
    h += CMatrix::Identity(sys.dim(), sys.dim()) * (1.0 - h.trace().real()) / sys.dim();
    EXPECT_TRUE(is_density_matrix(project_positive(HermitianOperator::symmetrized(h))));
  }
}

TEST(Fidelity, Examples) {
  const SpinSystem sys = SpinSystem::make(3);
  const CVector cat = cat_state(sys);
  EXPECT_NEAR(cat.norm(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(cat(0)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(cat(6)), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(fidelity(cat, pure_state(cat)), 1.0, 1e-14);
  const HermitianOperator mixed(CMatrix(CMatrix::Identity(7, 7) / 7.0));
  EXPECT_NEAR(fidelity(cat, mixed), 1.0 / 7.0, 1e-14);
  EXPECT_NEAR(fidelity(basis_state(sys, 3), pure_state(basis_state(sys, -3))), 0.0, 1e-15);
  EXPECT_THROW(fidelity(2.0 * cat, mixed), InvalidArgument);
}

TEST(DensityMatrix, RandomIsValid) {
  std::mt19937_64 rng(11);
  const SpinSystem sys = SpinSystem::make(2);
  for (int i = 0; i < 10; ++i) EXPECT_TRUE(is_density_matrix(random_density_matrix(sys, rng)));
}

}  // namespace
}  // namespace cwm
