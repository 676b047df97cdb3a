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
#include <random>

#include <gtest/gtest.h>

#include "cwm/errors.hpp"
#include "cwm/estimator.hpp"
#include "cwm/validation.hpp"
#include "test_support.hpp"

namespace cwm {
namespace {

std::vector<CMatrix> random_ops(const SpinSystem& sys, int count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<CMatrix> ops;
  for (int i = 0; i < count; ++i) {
    CMatrix g(sys.dim(), sys.dim());
    for (auto& v : g.reshaped()) v = Complex(normal(rng), normal(rng));
    ops.push_back(0.5 * (g + g.adjoint()));
  }
  return ops;
}

MeasurementRecord noiseless(const HermitianOperator& rho, const ObservableHistory& h) {
  return simulate_record(rho, h, SnrSpec::noiseless(), 0, 1);
}

TEST(Accumulate, SingleBasisSample) {
  const SpinSystem sys = SpinSystem::make(1);
  const ObservableHistory h = support::history_of(sys, {sys.basis_element(1)});
  MeasurementRecord rec;
  rec.values = RVector::Constant(1, 0.3);
  rec.times = h.times();
  rec.sigma = 1.0;
  const InformationMatrix info = accumulate(h, rec);
  RMatrix want = RMatrix::Zero(8, 8);
  want(1, 1) = 1.0;
  EXPECT_LT((info.R - want).norm(), 1e-15);
  EXPECT_EQ(numerical_rank(information_spectrum(info.R)), 1);
  EXPECT_NEAR(info.b(1), 0.3, 1e-15);
}

TEST(Accumulate, SelfConcatenationDoubles) {
  const SpinSystem sys = SpinSystem::make(1.5);
  std::mt19937_64 rng(1);
  auto ops = random_ops(sys, 30, rng);
  const ObservableHistory h = support::history_of(sys, ops);
  const HermitianOperator rho = random_density_matrix(sys, rng);
  const MeasurementRecord rec = simulate_record(rho, h, SnrSpec{5}, 3, 1);

  auto doubled_ops = ops;
  doubled_ops.insert(doubled_ops.end(), ops.begin(), ops.end());
  const ObservableHistory h2 = support::history_of(sys, doubled_ops);
  MeasurementRecord rec2 = rec;
  rec2.values = RVector(60);
  rec2.values << rec.values, rec.values;
  rec2.times = h2.times();

  const InformationMatrix once = accumulate(h, rec);
  const InformationMatrix twice = accumulate(h2, rec2);
  EXPECT_LT((twice.R - 2 * once.R).norm(), 1e-10 * once.R.norm());
  EXPECT_LT((twice.b - 2 * once.b).norm(), 1e-10 * once.b.norm());
  const InformationMatrix chained = accumulate(h, rec, once);
  EXPECT_LT((chained.R - twice.R).norm(), 1e-10 * once.R.norm());
  EXPECT_EQ(chained.sample_count, 60);
}

TEST(Accumulate, SpinHalfCartesianHistory) {
  const SpinSystem sys = SpinSystem::make(0.5);
  const ObservableHistory h = support::history_of(sys, {sys.fx(), sys.fy(), sys.fz()});
  const InformationMatrix info = model_information(h, 1.0);
  EXPECT_LT((info.R - 0.5 * RMatrix::Identity(3, 3)).norm(), 1e-15);
}

TEST(Accumulate, LengthMismatch) {
  const SpinSystem sys = SpinSystem::make(1);
  const ObservableHistory h = support::repeat_history(sys, sys.fz(), 5);
  MeasurementRecord rec;
  rec.values = RVector::Zero(4);
  EXPECT_THROW(accumulate(h, rec), InvalidArgument);
}

TEST(Information, WeylMonotonicity) {
  const SpinSystem sys = SpinSystem::make(1.5);
  std::mt19937_64 rng(2);
  const auto ops = random_ops(sys, 40, rng);
  const ObservableHistory h = support::history_of(sys, ops);
  const HermitianOperator rho = random_density_matrix(sys, rng);
  const MeasurementRecord rec = simulate_record(rho, h, SnrSpec{10}, 5, 1);
  std::uniform_int_distribution<int> cut(1, 39);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = cut(rng);
    const std::vector<CMatrix> head(ops.begin(), ops.begin() + k);
    const std::vector<CMatrix> tail(ops.begin() + k, ops.end());
    MeasurementRecord rh = rec, rt = rec;
    rh.values = rec.values.head(k);
    rt.values = rec.values.tail(40 - k);
    const InformationMatrix before = accumulate(support::history_of(sys, head), rh);
    const InformationMatrix after = accumulate(support::history_of(sys, tail), rt, before);
    const RVector lb = information_spectrum(before.R), la = information_spectrum(after.R);
    for (Eigen::Index j = 0; j < lb.size(); ++j) EXPECT_GE(la(j), lb(j) - 1e-10 * la.maxCoeff());
  }
}

TEST(Information, NoiseScaleShift) {
  const SpinSystem sys = SpinSystem::make(1);
  std::mt19937_64 rng(3);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 20, rng));
  const InformationMatrix unit = model_information(h, 1.0);
  const InformationMatrix scaled = model_information(h, 4.0);
  EXPECT_LT((scaled.R * 16.0 - unit.R).norm(), 1e-12 * unit.R.norm());
  const double shift = entropy(scaled, 0.0) - entropy(unit, 0.0);
  EXPECT_NEAR(shift, 8 * 2 * std::log(4.0), 1e-9);
  Eigen::SelfAdjointEigenSolver<RMatrix> a(unit.R), b(scaled.R);
  EXPECT_LT((a.eigenvectors().cwiseAbs() - b.eigenvectors().cwiseAbs()).norm(), 1e-8);
}

TEST(Estimate, NoiselessExactAtFullRank) {
  const SpinSystem sys = SpinSystem::make(3);
  std::mt19937_64 rng(4);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 120, rng));
  for (int trial = 0; trial < 5; ++trial) {
    const HermitianOperator rho = random_density_matrix(sys, rng);
    const HermitianOperator got = estimate(accumulate(h, noiseless(rho, h)), sys);
    EXPECT_LT((got.matrix() - rho.matrix()).norm(), 1e-8);
    EXPECT_NEAR(got.trace(), 1.0, 1e-13);
  }
}

TEST(Estimate, UnmeasuredDirectionsStayMixed) {
  const SpinSystem sys = SpinSystem::make(2);
  const ObservableHistory h = support::repeat_history(sys, sys.fz(), 10);
  const HermitianOperator mixed(CMatrix(CMatrix::Identity(5, 5) / 5.0));
  const HermitianOperator got = estimate(accumulate(h, noiseless(mixed, h)), sys);
  EXPECT_LT((got.matrix() - mixed.matrix()).norm(), 1e-13);
}

TEST(Estimate, NoInformationThrows) {
  const SpinSystem sys = SpinSystem::make(1);
  const ObservableHistory h = support::repeat_history(sys, CMatrix::Identity(3, 3), 4);
  const HermitianOperator mixed(CMatrix(CMatrix::Identity(3, 3) / 3.0));
  EXPECT_THROW(estimate(accumulate(h, noiseless(mixed, h)), sys), NoInformation);
}

TEST(Estimate, UnbiasedAtFiniteSnr) {
  const SpinSystem sys = SpinSystem::make(1);
  std::mt19937_64 rng(5);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 60, rng));
  const HermitianOperator rho = random_density_matrix(sys, rng);
  const int n = 500;
  CMatrix sum = CMatrix::Zero(3, 3);
  Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(3, 3), sq_im = Eigen::MatrixXd::Zero(3, 3);
  for (int r = 0; r < n; ++r) {
    const MeasurementRecord rec = simulate_record(rho, h, SnrSpec{2}, 1000 + r, 1);
    const CMatrix e = estimate(accumulate(h, rec), sys).matrix() - rho.matrix();
    sum += e;
    sq_re += e.real().cwiseAbs2();
    sq_im += e.imag().cwiseAbs2();
  }
  const CMatrix mean = sum / n;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double se_re = std::sqrt((sq_re(i, j) / n - std::norm(mean(i, j).real())) / n);
      const double se_im = std::sqrt((sq_im(i, j) / n - std::norm(mean(i, j).imag())) / n);
      EXPECT_LE(std::abs(mean(i, j).real()), 3 * se_re + 1e-15);
      EXPECT_LE(std::abs(mean(i, j).imag()), 3 * se_im + 1e-15);
    }
  }
}

TEST(Entropy, Examples) {
  RVector two(2);
  two << std::exp(1.0), std::exp(2.0);
  EXPECT_NEAR(entropy_of_spectrum(two, 0.0), -3.0, 1e-14);

  const SpinSystem sys = SpinSystem::make(1);
  std::mt19937_64 rng(6);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 20, rng));
  InformationMatrix info = model_information(h);
  InformationMatrix doubled = info;
  doubled.R *= 2.0;
  EXPECT_NEAR(entropy(info, 0.0) - entropy(doubled, 0.0), 8 * std::log(2.0), 1e-10);

  RVector deficient(4);
  deficient << 0.0, 0.0, 2.0, 5.0;
  const double floor = 1e-9 * 5.0;
  const double want = -2 * std::log(floor) - std::log(2.0 + floor) - std::log(5.0 + floor);
  EXPECT_NEAR(entropy_of_spectrum(deficient, 1e-9), want, 1e-12);
  RVector clipped = deficient;
  clipped(0) = -1e-17;
  EXPECT_NEAR(entropy_of_spectrum(clipped, 1e-9), want, 1e-12);
}

TEST(Reconstruct, PositivityAndFidelity) {
  const SpinSystem sys = SpinSystem::make(2);
  std::mt19937_64 rng(7);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 200, rng));
  const CVector psi = cat_state(sys);
  const HermitianOperator rho = pure_state(psi);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<RunData> runs{RunData{h, simulate_record(rho, h, SnrSpec{3}, seed, 3)}};
    const ReconstructionResult res = reconstruct(runs, psi);
    EXPECT_TRUE(is_density_matrix(res.rho_pos));
    ASSERT_TRUE(res.fidelity.has_value());
    EXPECT_GT(*res.fidelity, 0.0);
    EXPECT_LE(*res.fidelity, 1.0);
    EXPECT_EQ(res.rank, 24);
  }
  const std::vector<RunData> exact{RunData{h, noiseless(rho, h)}};
  EXPECT_GT(*reconstruct(exact, psi).fidelity, 0.999);
}

TEST(Reconstruct, TwoRunsMatchOneRunAtSqrtTwoSnr) {
  const SpinSystem sys = SpinSystem::make(2);
  std::mt19937_64 rng(8);
  const ObservableHistory h = support::history_of(sys, random_ops(sys, 100, rng));
  const CVector psi = cat_state(sys);
  const HermitianOperator rho = pure_state(psi);
  const double snr = 2.0;
  const int n = 200;
  double two = 0.0, one = 0.0;
  for (int r = 0; r < n; ++r) {
    const std::vector<RunData> pair{RunData{h, simulate_record(rho, h, SnrSpec{snr}, 2 * r, 1)},
                                    RunData{h, simulate_record(rho, h, SnrSpec{snr}, 2 * r + 1, 1)}};
    const std::vector<RunData> single{
        RunData{h, simulate_record(rho, h, SnrSpec{snr * std::sqrt(2.0)}, 100000 + r, 1)}};
    two += *reconstruct(pair, psi).fidelity;
    one += *reconstruct(single, psi).fidelity;
  }
  EXPECT_LT(two / n, 0.97);
  EXPECT_NEAR(two / n, one / n, 0.03);
}

TEST(ResultFiles, SummaryAndMatrix) {
  const auto dir = std::filesystem::temp_directory_path() / "cwm_result_test";
  std::filesystem::create_directories(dir);
  const std::vector<ResultRow> rows{ResultRow{0, 30.0, 48, -88.5, 0.95}};
  write_result_summary(dir / "result.csv", rows);
  std::ifstream in(dir / "result.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, "run_id,snr,rank,entropy,fidelity");
  EXPECT_EQ(line, "0,30,48,-88.5,0.95");

  std::mt19937_64 rng(9);
  const HermitianOperator rho = random_density_matrix(SpinSystem::make(3), rng);
  write_density_matrix(dir / "rho.txt", rho);
  const HermitianOperator back = read_density_matrix(dir / "rho.txt");
  EXPECT_LT((back.matrix() - rho.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace cwm
