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

#include "cwm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>

#include "cwm/detail/magnus.hpp"
#include "cwm/errors.hpp"
#include "cwm/estimator.hpp"
#include "cwm/expm.hpp"
#include "cwm/measurement.hpp"

namespace cwm {

namespace {

using namespace std::complex_literals;

// vec(A X B) = (B^T kron A) vec(X), column stacking.
CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix schrodinger_liouvillian(const CMatrix& h, const PhysicsParams& p) {
  const SpinSystem& sys = p.sys;
  const Eigen::Index d = sys.dim();
  const CMatrix id = CMatrix::Identity(d, d);
  CMatrix l = -1i * (kron(id, h) - kron(h.transpose(), id));
  if (p.gamma != 0.0) {
    const double f = sys.spin();
    const double scale = 2.0 * p.pumping_branching / (f * (f + 1.0));
    CMatrix pump = CMatrix::Zero(d * d, d * d);
    for (const CMatrix* op : {&sys.fx(), &sys.fy(), &sys.fz()}) pump += kron(op->transpose(), *op);
    l += -0.5 * p.gamma * (2.0 * CMatrix::Identity(d * d, d * d) - scale * pump);
  }
  return l;
}

ControlWaveform random_waveform(const PhysicsParams& p, std::mt19937_64& rng, int knots = 20) {
  return ControlWaveform::random(knots, p.duration, rng);
}

PhysicsParams small_physics(double spin, double beta, double gamma, double duration) {
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(spin), beta);
  p.gamma = gamma;
  p.duration = duration;
  return p;
}

// A check that throws counts as failed with an infinite value.
template <typename Fn>
ValidationCheck make_check(std::string name, double tol, Fn&& measure) {
  double value = std::numeric_limits<double>::infinity();
  try {
    value = measure();
  } catch (const std::exception&) {
  }
  return ValidationCheck{std::move(name), std::isfinite(value) && value <= tol, value, tol};
}

double basis_gram_error(const SpinSystem& sys) {
  double worst = 0.0;
  const auto& basis = sys.basis();
  for (std::size_t j = 0; j < basis.size(); ++j) {
    for (std::size_t k = 0; k < basis.size(); ++k) {
      const double g = (basis[j] * basis[k]).trace().real();
      worst = std::max(worst, std::abs(g - (j == k ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double adjoint_error(const SpinSystem& sys, double gamma, DissipatorModel model,
                     std::mt19937_64& rng) {
  PhysicsParams p = small_physics(sys.spin(), 7.67, gamma, 2e-4);
  p.sys = sys;
  p.dissipator = model;
  double worst = 0.0;
  std::uniform_real_distribution<double> shift(-400.0, 400.0);
  for (int trial = 0; trial < 3; ++trial) {
    const HermitianOperator rho = random_density_matrix(sys, rng);
    const ControlWaveform w = random_waveform(p, rng, 6);
    const double b0 = shift(rng);
    const HermitianOperator o = propagate_observable(w, p, b0, p.duration);
    const double heis = hs_inner(o, rho);
    const double schr = schrodinger_expectation(rho, w, p, b0, p.duration);
    worst = std::max(worst, std::abs(heis - schr));
  }
  return worst;
}

double monotonicity_violation(const ObservableHistory& hist, std::mt19937_64& rng) {
  const RMatrix& a = hist.coeffs();
  std::uniform_int_distribution<int> cut(1, hist.size() - 1);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int k = cut(rng);
    const RMatrix before = a.topRows(k).transpose() * a.topRows(k);
    const RMatrix after = a.transpose() * a;
    const RVector lb = information_spectrum(before);
    const RVector la = information_spectrum(after);
    const double scale = std::max(1.0, la.maxCoeff());
    worst = std::max(worst, ((lb - la).cwiseMax(0.0) / scale).maxCoeff());
  }
  return worst;
}

double filter_error(const ObservableHistory& hist, const HermitianOperator& rho, int w) {
  const ObservableHistory filtered = apply_filter(hist, w);
  const RVector direct = moving_average(expected_signal(rho, hist), w);
  return (expected_signal(rho, filtered) - direct).cwiseAbs().maxCoeff();
}

double noiseless_error(const PhysicsParams& p, const ControlWaveform& w, std::mt19937_64& rng,
                       int trials) {
  const ObservableHistory hist = observable_history(w, p);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const HermitianOperator rho = random_density_matrix(p.sys, rng);
    const MeasurementRecord rec = simulate_record(rho, hist, SnrSpec::noiseless(), 0, 1);
    const std::vector<RunData> runs{RunData{hist, rec}};
    const ReconstructionResult res = reconstruct(runs);
    worst = std::max(worst, (res.rho_hat.matrix() - rho.matrix()).norm());
  }
  return worst;
}

double expm_error(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 4 + 8 * trial;
    CMatrix h(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) h(i, j) = Complex(normal(rng), normal(rng));
    }
    h = (0.5 * (h + h.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
    const CVector phases = (-1i * eig.eigenvalues().cast<Complex>()).array().exp();
    const CMatrix oracle = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
    const CMatrix got = expm(CMatrix(-1i * h));
    worst = std::max(worst, (got - oracle).norm() / oracle.norm());
  }
  return worst;
}

}  // namespace

HermitianOperator random_density_matrix(const SpinSystem& sys, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(sys.dim(), sys.dim());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = Complex(normal(rng), normal(rng));
  }
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return HermitianOperator(0.5 * (rho + rho.adjoint()));
}

double schrodinger_expectation(const HermitianOperator& rho0, const ControlWaveform& w,
                               const PhysicsParams& p, double b0_shift, double t) {
  p.validate();
  const SpinSystem& sys = p.sys;
  if (rho0.dim() != sys.dim()) throw InvalidArgument("schrodinger_expectation: dimension mismatch");
  const int steps = static_cast<int>(std::lround(t / p.dt_fine));
  if (steps < 0 || std::abs(steps * p.dt_fine - t) > 1e-9 * p.dt_fine || t > p.duration * (1 + 1e-12)) {
    throw InvalidArgument("schrodinger_expectation: t must be a multiple of dt_fine in [0, T]");
  }
  const bool unitary = p.gamma == 0.0 || p.dissipator == DissipatorModel::LossOnly;
  const Eigen::Index d = sys.dim();

  // Flow generator at time s: -iH for the state vector, the Liouvillian on vec(rho).
  const auto generator = [&](double s) -> CMatrix {
    const CMatrix h = build_hamiltonian(s, w, b0_shift, p).matrix();
    return unitary ? CMatrix(-1i * h) : schrodinger_liouvillian(h, p);
  };
  CMatrix flow = CMatrix::Identity(unitary ? d : d * d, unitary ? d : d * d);
  const auto step = [&](double a, double b) {
    const double h = b - a;
    const auto& nodes = detail::kMagnusNodes;
    const CMatrix omega = detail::magnus6_exponent<CMatrix>(
        generator(a + nodes[0] * h), generator(a + nodes[1] * h), generator(a + nodes[2] * h), h);
    flow = (expm(omega) * flow).eval();
  };
  for (int j = 0; j < steps; ++j) {
    double a = j * p.dt_fine;
    const double b = std::min((j + 1) * p.dt_fine, p.duration);
    for (double knot : w.knot_times_between(a, b)) {
      step(a, knot);
      a = knot;
    }
    step(a, b);
  }
  if (unitary) {
    const CMatrix rho = flow * rho0.matrix() * flow.adjoint();
    return std::exp(-p.gamma * t) * (rho * sys.fz()).trace().real();
  }
  const CVector v = flow * rho0.matrix().reshaped();
  const CMatrix rho = v.reshaped(d, d);
  return (rho * sys.fz()).trace().real();
}

std::vector<ValidationCheck> run_validation(const ValidationOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  SpinSystem sys = SpinSystem::make(1.0);
  if (opts.corrupt_basis) {
    const CMatrix skewed = sys.basis()[0] + 0.5 * sys.basis()[1];
    sys = sys.with_replaced_basis_element(0, skewed);
  }

  std::vector<ValidationCheck> checks;
  checks.push_back(make_check("basis_orthonormality", 1e-12, [&] { return basis_gram_error(sys); }));
  checks.push_back(make_check("expm_oracle", 1e-10, [&] { return expm_error(rng); }));
  checks.push_back(make_check("adjoint_consistency_unitary", 1e-8, [&] { return adjoint_error(sys, 0.0, DissipatorModel::LossOnly, rng); }));
  checks.push_back(make_check("adjoint_consistency_loss", 1e-6, [&] {
    return adjoint_error(sys, 1e3, DissipatorModel::LossOnly, rng);
  }));
  checks.push_back(make_check("adjoint_consistency_pumping", 1e-6, [&] {
    return adjoint_error(sys, 1e3, DissipatorModel::IsotropicPumping, rng);
  }));

  PhysicsParams p = small_physics(1.0, 7.67, 1e3, 1e-3);
  p.sys = sys;
  const ControlWaveform w = random_waveform(p, rng, 20);
  checks.push_back(make_check("information_monotonicity", 1e-10, [&] {
    return monotonicity_violation(observable_history(w, p), rng);
  }));
  checks.push_back(make_check("filter_consistency", 1e-12, [&] {
    return filter_error(observable_history(w, p), random_density_matrix(sys, rng), 5);
  }));
  checks.push_back(make_check("noiseless_exactness", 1e-6, [&] { return noiseless_error(p, w, rng, 5); }));

  PhysicsParams pl = p;
  pl.duration = 4e-4;
  const ControlWaveform wl = random_waveform(pl, rng, 8);
  checks.push_back(make_check("engine_agreement", 1e-9, [&] {
    const RMatrix hilbert = observable_history(wl, pl, PropagationEngine::Hilbert).coeffs();
    const RMatrix liouville = observable_history(wl, pl, PropagationEngine::Liouville).coeffs();
    return (hilbert - liouville).cwiseAbs().maxCoeff();
  }));
  checks.push_back(make_check("incremental_agreement", 1e-9, [&] {
    IncrementalHistory inc(wl, pl);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    RMatrix cand;
    double worst = 0.0;
    for (int k = 0; k < wl.knot_count(); k += 3) {
      const double a = angle(rng);
      inc.candidate(k, a, cand);
      const RMatrix full = observable_history(wl.with_knot(k, a), pl).coeffs();
      worst = std::max(worst, (cand - full).cwiseAbs().maxCoeff());
    }
    return worst;
  }));
  return checks;
}

void write_validation_table(std::ostream& out, const std::vector<ValidationCheck>& checks) {
  out << "check,result,value,tolerance\n";
  for (const ValidationCheck& c : checks) {
    out << c.name << ',' << (c.passed ? "pass" : "fail") << ',' << std::setprecision(6) << c.value
        << ',' << c.tolerance << '\n';
  }
}

bool all_passed(const std::vector<ValidationCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

}  // namespace cwm
