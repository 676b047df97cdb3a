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

// Heisenberg-picture dynamics of the measured observable Fz under a planar
// control field, a background Larmor shift along z, the Fx^2 nonlinearity and
// scattering-induced dissipation.
//
// Time ordering: with state steps rho -> P_j rho, the measured operator at the
// end of step j is O(t_j) = P_1^dag ... P_j^dag [Fz]. Both engines accumulate
// the running product forward in time (U_j = u_j ... u_1 in Hilbert space,
// Q_j = Q_{j-1} P_j^dag in Liouville space) and read O(t_j) off it, so a full
// history costs one pass regardless of the number of bins.

#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cwm/operator_algebra.hpp"
#include "cwm/waveform.hpp"

namespace cwm {

enum class DissipatorModel {
  // D^dag[A] = 2A: every scattering event removes the atom from the manifold.
  LossOnly,
  // D^dag[A] = 2A - (2r / F(F+1)) sum_q F_q A F_q: a fraction r of scattering
  // events randomizes the spin isotropically inside the manifold.
  IsotropicPumping,
};

enum class PropagationEngine {
  Auto,       // Hilbert when the dissipator allows it, Liouville otherwise
  Hilbert,    // d x d unitaries with a scalar decay; LossOnly (or gamma = 0) only
  Liouville,  // d^2 x d^2 real superoperators; any dissipator
};

const char* to_string(DissipatorModel model);
DissipatorModel dissipator_from_string(const std::string& name);

struct PhysicsParams {
  explicit PhysicsParams(SpinSystem system) : sys(std::move(system)) {}

  // F, beta, gamma = 1e3 /s, |Omega| = 2 pi 15 kHz, 60 Hz background std,
  // T = 4 ms, bins of 4 us, steps of 1 us, LossOnly, 7 quadrature nodes.
  static PhysicsParams standard(const SpinSystem& sys, double beta);

  SpinSystem sys;
  double beta = 0.0;
  double gamma = 1e3;                                   // 1/s
  double larmor_omega = 2.0 * std::numbers::pi * 15e3;  // rad/s
  double background_std_hz = 60.0;
  double duration = 4e-3;   // s
  double dt_coarse = 4e-6;  // s
  double dt_fine = 1e-6;    // s
  DissipatorModel dissipator = DissipatorModel::LossOnly;
  double pumping_branching = 0.5;
  int quadrature_points = 7;

  // Throws InvalidArgument on any broken invariant.
  void validate() const;

  int steps_per_bin() const;
  int bin_count() const;
  int step_count() const { return steps_per_bin() * bin_count(); }
  double background_std_rad() const { return 2.0 * std::numbers::pi * background_std_hz; }
};

struct QuadratureNode {
  double shift;  // Larmor shift along z, rad/s
  double weight;
};

// Gauss-Hermite nodes for a zero-mean Gaussian with the background std.
// Collapses to a single node at zero when the std is zero.
std::vector<QuadratureNode> background_quadrature(const PhysicsParams& p);

// Probabilists' Gauss-Hermite rule: nodes x_q and weights w_q with
// sum_q w_q f(x_q) ~ E[f(X)], X ~ N(0, 1).
std::vector<QuadratureNode> gauss_hermite_standard(int points);

// H(t) = |Omega| (cos phi Fx + sin phi Fy) + b0 Fz + beta gamma Fx^2.
HermitianOperator build_hamiltonian(double t, const ControlWaveform& w, double b0_shift,
                                    const PhysicsParams& p);

// Adjoint generator on [trace_part, coeffs] coordinates: dv/dt = G v for the
// observable A(t), with L^dag[A] = i[H, A] - (gamma/2) D^dag[A].
struct Generator {
  RMatrix matrix;
};

Generator build_generator(const HermitianOperator& h, const PhysicsParams& p);

// exp(G dt).
RMatrix step_propagator(const Generator& g, double dt);

// Coarse-grained observable series O_i, one per detector bin.
class ObservableHistory {
 public:
  ObservableHistory(SpinSystem sys, RVector trace_parts, RMatrix coeffs, std::vector<double> times,
                    std::string params_digest);

  int size() const { return static_cast<int>(coeffs_.rows()); }
  const SpinSystem& system() const { return sys_; }
  OperatorVector op(int i) const;
  // Row i holds the traceless coordinates of O_i.
  const RMatrix& coeffs() const { return coeffs_; }
  // Tr[O_i] / sqrt(d).
  const RVector& trace_parts() const { return trace_parts_; }
  const std::vector<double>& times() const { return times_; }
  const std::string& params_digest() const { return digest_; }

 private:
  SpinSystem sys_;
  RVector trace_parts_;
  RMatrix coeffs_;
  std::vector<double> times_;
  std::string digest_;
};

ObservableHistory observable_history(const ControlWaveform& w, const PhysicsParams& p,
                                     PropagationEngine engine = PropagationEngine::Auto);

// O(t) for a single background shift, t a multiple of dt_fine.
HermitianOperator propagate_observable(const ControlWaveform& w, const PhysicsParams& p,
                                       double b0_shift, double t,
                                       PropagationEngine engine = PropagationEngine::Auto);

// Stable hex digest of (waveform, params).
std::string params_digest(const ControlWaveform& w, const PhysicsParams& p);

// Observable history that can be re-evaluated cheaply after changing one
// knot. Bins before the knot's interpolation support are reused; bins inside
// it are re-propagated; bins after it are mapped through the change of the
// running propagator at the end of the support.
class IncrementalHistory {
 public:
  IncrementalHistory(ControlWaveform w, PhysicsParams p,
                     PropagationEngine engine = PropagationEngine::Auto);
  ~IncrementalHistory();
  IncrementalHistory(IncrementalHistory&&) noexcept;
  IncrementalHistory& operator=(IncrementalHistory&&) noexcept;

  const ControlWaveform& waveform() const;
  const PhysicsParams& params() const;
  // Traceless coordinates of the current history, K x (d^2 - 1).
  const RMatrix& coeffs() const;

  // First bin whose coordinates depend on knot k.
  int first_affected_bin(int k) const;

  // Coordinates with knot k set to angle; rows before first_affected_bin(k)
  // are copied from coeffs(). Leaves the state untouched.
  void candidate(int k, double angle, RMatrix& out) const;
  void commit(int k, double angle);
  // Recomputes everything from scratch, dropping accumulated round-off.
  void refresh();

  ObservableHistory history() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace cwm
