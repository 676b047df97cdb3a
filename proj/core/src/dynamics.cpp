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

#include "cwm/dynamics.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <algorithm>
#include <iomanip>
#include <sstream>

#include "cwm/errors.hpp"
#include "cwm/detail/expm_impl.hpp"
#include "cwm/detail/magnus.hpp"
#include "cwm/expm.hpp"

namespace cwm {

namespace {

bool is_multiple(double big, double small) {
  const double ratio = big / small;
  return ratio >= 1.0 - 1e-9 && std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio;
}

CMatrix hamiltonian_matrix(double phi, double shift, const PhysicsParams& p) {
  const SpinSystem& sys = p.sys;
  CMatrix h = (p.larmor_omega * std::cos(phi)) * sys.fx() + (p.larmor_omega * std::sin(phi)) * sys.fy();
  if (shift != 0.0) h += shift * sys.fz();
  if (p.beta != 0.0 && p.gamma != 0.0) h += (p.beta * p.gamma) * (sys.fx() * sys.fx());
  return h;
}

CMatrix adjoint_dissipator(const CMatrix& a, const PhysicsParams& p) {
  if (p.dissipator == DissipatorModel::LossOnly) return 2.0 * a;
  const SpinSystem& sys = p.sys;
  const double f = sys.spin();
  const double scale = 2.0 * p.pumping_branching / (f * (f + 1.0));
  return 2.0 * a - scale * (sys.fx() * a * sys.fx() + sys.fy() * a * sys.fy() +
                            sys.fz() * a * sys.fz());
}

// Full coordinates [Tr A / sqrt(d), Tr E_j A] of a Hermitian matrix.
void full_coords(const SpinSystem& sys, const CMatrix& a, RVectorRef out) {
  out(0) = a.trace().real() / std::sqrt(static_cast<double>(sys.dim()));
  sys.traceless_coords(a, out.tail(sys.basis_size()));
}

CMatrix full_basis_element(const SpinSystem& sys, int k) {
  if (k == 0) {
    return CMatrix::Identity(sys.dim(), sys.dim()) / std::sqrt(static_cast<double>(sys.dim()));
  }
  return sys.basis_element(k - 1);
}

// Matrix of a Hermiticity-preserving linear map on full coordinates.
template <typename Map>
RMatrix superoperator(const SpinSystem& sys, Map&& map) {
  const int n = sys.dim() * sys.dim();
  RMatrix g(n, n);
  for (int k = 0; k < n; ++k) full_coords(sys, map(full_basis_element(sys, k)), g.col(k));
  return g;
}

RMatrix commutator_superoperator(const SpinSystem& sys, const CMatrix& h) {
  const Complex i(0.0, 1.0);
  return superoperator(sys, [&](const CMatrix& a) { return CMatrix(i * (h * a - a * h)); });
}

bool hilbert_allowed(const PhysicsParams& p) {
  return p.dissipator == DissipatorModel::LossOnly || p.gamma == 0.0;
}

PropagationEngine resolve(PropagationEngine engine, const PhysicsParams& p) {
  if (engine == PropagationEngine::Auto) {
    return hilbert_allowed(p) ? PropagationEngine::Hilbert : PropagationEngine::Liouville;
  }
  if (engine == PropagationEngine::Hilbert && !hilbert_allowed(p)) {
    throw InvalidArgument("Hilbert-space propagation requires the LossOnly dissipator");
  }
  return engine;
}

void check_waveform(const ControlWaveform& w, const PhysicsParams& p) {
  if (std::abs(w.duration() - p.duration) > 1e-12 * p.duration) {
    throw InvalidArgument("waveform duration does not match the physics duration");
  }
}

// ---------------------------------------------------------------------------
// Propagation policies.
//
// Cum   running propagator after some number of steps
// Obs   observable representation accumulated into bins
// Xform change of running propagator used to remap later bins

// D is the compile-time Hilbert dimension, or Eigen::Dynamic.
template <int D>
class HilbertPolicy {
 public:
  using Cum = Eigen::Matrix<Complex, D, D>;
  using Obs = Cum;
  using Xform = Cum;

  explicit HilbertPolicy(const PhysicsParams& p)
      : p_(p),
        fx_(p.sys.fx()),
        fy_(p.sys.fy()),
        fz_(p.sys.fz()),
        fz_diag_(p.sys.fz().diagonal()),
        nonlinear_((p.beta * p.gamma) * (p.sys.fx() * p.sys.fx())) {}

  Cum identity() const { return Cum::Identity(p_.sys.dim(), p_.sys.dim()); }
  Obs zero() const { return Obs::Zero(p_.sys.dim(), p_.sys.dim()); }

  // U <- exp(Omega) U with Omega the Magnus exponent of -iH over the step.
  void advance(Cum& u, const std::array<double, 3>& phi, double h, double shift) const {
    const Complex mi(0.0, -1.0);
    const Cum omega = detail::magnus6_exponent<Cum>(mi * hamiltonian(phi[0], shift),
                                                    mi * hamiltonian(phi[1], shift),
                                                    mi * hamiltonian(phi[2], shift), h);
    const Cum step = detail::expm_impl(omega);
    u = step * u;
  }

  // acc += weight * e^{-gamma t} U^dag Fz U
  void accumulate(Obs& acc, const Cum& u, double t, double weight) const {
    const double scale = weight * std::exp(-p_.gamma * t);
    const Cum fz_u = fz_diag_.asDiagonal() * u;
    acc.noalias() += scale * (u.adjoint() * fz_u);
  }

  Xform relative(const Cum& fresh, const Cum& stale) const { return stale.adjoint() * fresh; }

  void transform(const Xform& v, const Obs& in, Obs& out) const {
    const Cum tmp = in * v;
    out.noalias() = v.adjoint() * tmp;
  }

  // U_j -> U_j V
  void remap(Cum& u, const Xform& v) const { u = u * v; }

  void coords(const Obs& o, double& trace_part, RVectorRef coeffs) const {
    trace_part = o.trace().real() / std::sqrt(static_cast<double>(p_.sys.dim()));
    p_.sys.traceless_coords(o, coeffs);
  }

  HermitianOperator to_operator(const Obs& o) const { return HermitianOperator::symmetrized(o); }

 private:
  Cum hamiltonian(double phi, double shift) const {
    Cum h = nonlinear_;
    h += (p_.larmor_omega * std::cos(phi)) * fx_;
    h += (p_.larmor_omega * std::sin(phi)) * fy_;
    if (shift != 0.0) h += shift * fz_;
    return h;
  }

  const PhysicsParams& p_;
  Cum fx_, fy_, fz_;
  Eigen::Matrix<Complex, D, 1> fz_diag_;
  Cum nonlinear_;
};

// Calls f.template operator()<Policy>() with the Hilbert policy specialised
// to the system dimension when one is compiled in.
template <typename F>
decltype(auto) with_hilbert_policy(int dim, F&& f) {
  switch (dim) {
    case 2: return f.template operator()<HilbertPolicy<2>>();
    case 3: return f.template operator()<HilbertPolicy<3>>();
    case 4: return f.template operator()<HilbertPolicy<4>>();
    case 5: return f.template operator()<HilbertPolicy<5>>();
    case 6: return f.template operator()<HilbertPolicy<6>>();
    case 7: return f.template operator()<HilbertPolicy<7>>();
    case 8: return f.template operator()<HilbertPolicy<8>>();
    case 9: return f.template operator()<HilbertPolicy<9>>();
    default: return f.template operator()<HilbertPolicy<Eigen::Dynamic>>();
  }
}

class LiouvillePolicy {
 public:
  using Cum = RMatrix;
  using Obs = RVector;
  using Xform = RMatrix;

  explicit LiouvillePolicy(const PhysicsParams& p) : p_(p) {
    const SpinSystem& sys = p.sys;
    gen_x_ = commutator_superoperator(sys, sys.fx());
    gen_y_ = commutator_superoperator(sys, sys.fy());
    gen_z_ = commutator_superoperator(sys, sys.fz());
    gen_static_ = RMatrix::Zero(gen_x_.rows(), gen_x_.cols());
    if (p.beta != 0.0 && p.gamma != 0.0) {
      gen_static_ += (p.beta * p.gamma) * commutator_superoperator(sys, sys.fx() * sys.fx());
    }
    if (p.gamma != 0.0) {
      gen_static_ += superoperator(sys, [&](const CMatrix& a) {
        return CMatrix(-0.5 * p.gamma * adjoint_dissipator(a, p));
      });
    }
    observed_ = RVector(gen_x_.rows());
    full_coords(sys, sys.fz(), observed_);
  }

  Cum identity() const { return RMatrix::Identity(gen_x_.rows(), gen_x_.cols()); }
  Obs zero() const { return RVector::Zero(gen_x_.rows()); }

  // Q <- Q exp(Omega) for dQ/dt = Q G(t); the Magnus exponent is taken for
  // the transposed flow d(Q^T)/dt = G^T Q^T.
  void advance(Cum& q, const std::array<double, 3>& phi, double h, double shift) const {
    const RMatrix omega_t = detail::magnus6_exponent<RMatrix>(
        generator(phi[0], shift).transpose(), generator(phi[1], shift).transpose(),
        generator(phi[2], shift).transpose(), h);
    q = q * expm(RMatrix(omega_t.transpose()));
  }

  void accumulate(Obs& acc, const Cum& q, double, double weight) const {
    acc.noalias() += weight * (q * observed_);
  }

  Xform relative(const Cum& fresh, const Cum& stale) const {
    return stale.transpose().partialPivLu().solve(fresh.transpose()).transpose();
  }

  void transform(const Xform& v, const Obs& in, Obs& out) const { out.noalias() = v * in; }

  // Q_j -> V Q_j
  void remap(Cum& q, const Xform& v) const { q = v * q; }

  void coords(const Obs& o, double& trace_part, RVectorRef coeffs) const {
    trace_part = o(0);
    coeffs = o.tail(o.size() - 1);
  }

  HermitianOperator to_operator(const Obs& o) const {
    return devectorize(OperatorVector::from_full(o), p_.sys);
  }

 private:
  RMatrix generator(double phi, double shift) const {
    RMatrix g = gen_static_;
    g += (p_.larmor_omega * std::cos(phi)) * gen_x_;
    g += (p_.larmor_omega * std::sin(phi)) * gen_y_;
    if (shift != 0.0) g += shift * gen_z_;
    return g;
  }

  const PhysicsParams& p_;
  RMatrix gen_x_, gen_y_, gen_z_, gen_static_;
  RVector observed_;
};

// Advances the running propagator over [t0, t1], splitting at knot times so
// each Magnus step sees a single cubic of the interpolant.
template <typename Policy>
void advance_interval(const Policy& policy, typename Policy::Cum& cum, const ControlWaveform& w,
                      double t0, double t1, double shift) {
  double a = t0;
  const auto piece = [&](double b) {
    const double h = b - a;
    std::array<double, 3> phi;
    for (std::size_t n = 0; n < 3; ++n) phi[n] = w.angle(a + detail::kMagnusNodes[n] * h);
    policy.advance(cum, phi, h, shift);
    a = b;
  };
  for (double knot : w.knot_times_between(t0, t1)) piece(knot);
  piece(t1);
}

// Sample times of one detector bin and the weights that average over it.
struct BinRule {
  std::vector<double> times;
  std::vector<double> weights;
};

// The observable is only C2 across a knot, so the bin is split at interior
// knots and each piece gets composite Boole on a uniform grid no coarser than
// dt_fine.
BinRule bin_rule(const PhysicsParams& p, const ControlWaveform& w, int bin) {
  static constexpr std::array<double, 5> kBoole{7.0, 32.0, 12.0, 32.0, 7.0};
  const double t_a = bin * p.dt_coarse;
  const double t_b = std::min((bin + 1) * p.dt_coarse, p.duration);
  std::vector<double> breaks{t_a};
  for (double knot : w.knot_times_between(t_a, t_b)) {
    if (knot - breaks.back() > 1e-9 * p.dt_fine && t_b - knot > 1e-9 * p.dt_fine) breaks.push_back(knot);
  }
  breaks.push_back(t_b);
  BinRule rule;
  rule.times.push_back(t_a);
  rule.weights.push_back(0.0);
  for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
    const double len = breaks[b + 1] - breaks[b];
    const int panels = std::max(1, static_cast<int>(std::ceil(len / (4.0 * p.dt_fine) - 1e-9)));
    const double h = len / (4.0 * panels);
    for (int q = 0; q < panels; ++q) {
      rule.weights.back() += kBoole[0] * h / 22.5;
      for (int s = 1; s <= 4; ++s) {
        const int k = 4 * q + s;
        rule.times.push_back(k == 4 * panels ? breaks[b + 1] : breaks[b] + k * h);
        rule.weights.push_back(kBoole[static_cast<std::size_t>(s)] * h / 22.5);
      }
    }
  }
  for (double& x : rule.weights) x /= t_b - t_a;
  return rule;
}

// Propagates bins [first, last) from the running propagator at the start of
// `first`. Writes bin averages into bins[i - first] and, if cums is non-null,
// the running propagator at the end of bin i into (*cums)[i - first].
template <typename Policy>
typename Policy::Cum propagate_bins(const Policy& policy, const PhysicsParams& p,
                                    const ControlWaveform& w, double shift, int first, int last,
                                    typename Policy::Cum cum, typename Policy::Obs* bins,
                                    typename Policy::Cum* cums) {
  for (int i = first; i < last; ++i) {
    const BinRule rule = bin_rule(p, w, i);
    typename Policy::Obs& acc = bins[i - first];
    acc = policy.zero();
    policy.accumulate(acc, cum, rule.times[0], rule.weights[0]);
    for (std::size_t k = 1; k < rule.times.size(); ++k) {
      advance_interval(policy, cum, w, rule.times[k - 1], rule.times[k], shift);
      policy.accumulate(acc, cum, rule.times[k], rule.weights[k]);
    }
    if (cums != nullptr) cums[i - first] = cum;
  }
  return cum;
}

std::vector<double> bin_centers(const PhysicsParams& p) {
  std::vector<double> times(static_cast<std::size_t>(p.bin_count()));
  for (std::size_t i = 0; i < times.size(); ++i) times[i] = (i + 0.5) * p.dt_coarse;
  return times;
}

template <typename Policy>
ObservableHistory full_history(const ControlWaveform& w, const PhysicsParams& p) {
  const Policy policy(p);
  const int k_bins = p.bin_count();
  const int n = p.sys.basis_size();
  RVector trace_parts = RVector::Zero(k_bins);
  RMatrix coeffs = RMatrix::Zero(k_bins, n);
  std::vector<typename Policy::Obs> combined(static_cast<std::size_t>(k_bins), policy.zero());
  std::vector<typename Policy::Obs> bins(static_cast<std::size_t>(k_bins));
  for (const QuadratureNode& node : background_quadrature(p)) {
    propagate_bins(policy, p, w, node.shift, 0, k_bins, policy.identity(), bins.data(), nullptr);
    for (int i = 0; i < k_bins; ++i) combined[static_cast<std::size_t>(i)] += node.weight * bins[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < k_bins; ++i) {
    policy.coords(combined[static_cast<std::size_t>(i)], trace_parts(i), coeffs.row(i).transpose());
  }
  return ObservableHistory(p.sys, std::move(trace_parts), std::move(coeffs), bin_centers(p),
                           params_digest(w, p));
}

template <typename Policy>
HermitianOperator single_observable(const ControlWaveform& w, const PhysicsParams& p,
                                    double shift, int steps) {
  const Policy policy(p);
  typename Policy::Cum cum = policy.identity();
  for (int j = 0; j < steps; ++j) {
    advance_interval(policy, cum, w, j * p.dt_fine, std::min((j + 1) * p.dt_fine, p.duration), shift);
  }
  typename Policy::Obs o = policy.zero();
  policy.accumulate(o, cum, steps * p.dt_fine, 1.0);
  return policy.to_operator(o);
}

void fnv1a(std::uint64_t& h, const std::string& text) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
}

}  // namespace

const char* to_string(DissipatorModel model) {
  switch (model) {
    case DissipatorModel::LossOnly:
      return "loss_only";
    case DissipatorModel::IsotropicPumping:
      return "isotropic_pumping";
  }
  return "unknown";
}

DissipatorModel dissipator_from_string(const std::string& name) {
  if (name == "loss_only") return DissipatorModel::LossOnly;
  if (name == "isotropic_pumping") return DissipatorModel::IsotropicPumping;
  throw ConfigError("unknown dissipator model: " + name);
}

PhysicsParams PhysicsParams::standard(const SpinSystem& sys, double beta) {
  PhysicsParams p(sys);
  p.beta = beta;
  return p;
}

void PhysicsParams::validate() const {
  const auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be >= 0");
  if (!std::isfinite(larmor_omega)) throw InvalidArgument("larmor_omega must be finite");
  if (!(background_std_hz >= 0.0)) throw InvalidArgument("background std must be >= 0");
  if (!positive(duration) || !positive(dt_coarse) || !positive(dt_fine)) {
    throw InvalidArgument("durations and time steps must be positive");
  }
  if (!is_multiple(dt_coarse, dt_fine)) throw InvalidArgument("dt_fine must divide dt_coarse");
  if (!is_multiple(duration, dt_coarse)) throw InvalidArgument("dt_coarse must divide T");
  if (quadrature_points < 1 || quadrature_points % 2 == 0) {
    throw InvalidArgument("quadrature_points must be an odd integer >= 1");
  }
  if (!(pumping_branching >= 0.0 && pumping_branching <= 1.0)) {
    throw InvalidArgument("pumping branching fraction must lie in [0, 1]");
  }
}

int PhysicsParams::steps_per_bin() const {
  return static_cast<int>(std::lround(dt_coarse / dt_fine));
}

int PhysicsParams::bin_count() const { return static_cast<int>(std::lround(duration / dt_coarse)); }

std::vector<QuadratureNode> gauss_hermite_standard(int points) {
  if (points < 1) throw InvalidArgument("need at least one quadrature point");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  RMatrix jacobi = RMatrix::Zero(points, points);
  for (int k = 1; k < points; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(jacobi);
  std::vector<QuadratureNode> nodes(static_cast<std::size_t>(points));
  for (int q = 0; q < points; ++q) {
    const double v0 = eig.eigenvectors()(0, q);
    nodes[static_cast<std::size_t>(q)] = {eig.eigenvalues()(q), v0 * v0};
  }
  if (points % 2 == 1) nodes[static_cast<std::size_t>(points / 2)].shift = 0.0;
  return nodes;
}

std::vector<QuadratureNode> background_quadrature(const PhysicsParams& p) {
  const double std_rad = p.background_std_rad();
  if (std_rad == 0.0 || p.quadrature_points == 1) return {{0.0, 1.0}};
  std::vector<QuadratureNode> nodes = gauss_hermite_standard(p.quadrature_points);
  for (QuadratureNode& node : nodes) node.shift *= std_rad;
  return nodes;
}

HermitianOperator build_hamiltonian(double t, const ControlWaveform& w, double b0_shift,
                                    const PhysicsParams& p) {
  if (!(t >= 0.0 && t <= p.duration)) throw InvalidArgument("build_hamiltonian: t outside [0, T]");
  return HermitianOperator::symmetrized(hamiltonian_matrix(w.angle(t), b0_shift, p));
}

Generator build_generator(const HermitianOperator& h, const PhysicsParams& p) {
  if (h.dim() != p.sys.dim()) throw InvalidArgument("build_generator: dimension mismatch");
  const Complex i(0.0, 1.0);
  const CMatrix& hm = h.matrix();
  return Generator{superoperator(p.sys, [&](const CMatrix& a) {
    CMatrix out = i * (hm * a - a * hm);
    if (p.gamma != 0.0) out -= 0.5 * p.gamma * adjoint_dissipator(a, p);
    return out;
  })};
}

RMatrix step_propagator(const Generator& g, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("step_propagator: dt must be positive");
  return expm(RMatrix(g.matrix * dt));
}

ObservableHistory::ObservableHistory(SpinSystem sys, RVector trace_parts, RMatrix coeffs,
                                     std::vector<double> times, std::string params_digest)
    : sys_(std::move(sys)),
      trace_parts_(std::move(trace_parts)),
      coeffs_(std::move(coeffs)),
      times_(std::move(times)),
      digest_(std::move(params_digest)) {
  if (coeffs_.cols() != sys_.basis_size() || trace_parts_.size() != coeffs_.rows() ||
      static_cast<Eigen::Index>(times_.size()) != coeffs_.rows()) {
    throw InvalidArgument("observable history: inconsistent sizes");
  }
}

OperatorVector ObservableHistory::op(int i) const {
  return OperatorVector{trace_parts_(i), coeffs_.row(i).transpose()};
}

ObservableHistory observable_history(const ControlWaveform& w, const PhysicsParams& p,
                                     PropagationEngine engine) {
  p.validate();
  check_waveform(w, p);
  if (resolve(engine, p) == PropagationEngine::Hilbert) {
    return with_hilbert_policy(p.sys.dim(), [&]<typename Policy>() { return full_history<Policy>(w, p); });
  }
  return full_history<LiouvillePolicy>(w, p);
}

HermitianOperator propagate_observable(const ControlWaveform& w, const PhysicsParams& p,
                                       double b0_shift, double t, PropagationEngine engine) {
  p.validate();
  check_waveform(w, p);
  if (!(t >= 0.0 && t <= p.duration + 1e-15) || !is_multiple(std::max(t, p.dt_fine), p.dt_fine)) {
    if (t != 0.0) throw InvalidArgument("propagate_observable: t must be a multiple of dt_fine in [0, T]");
  }
  const int steps = static_cast<int>(std::lround(t / p.dt_fine));
  if (resolve(engine, p) == PropagationEngine::Hilbert) {
    return with_hilbert_policy(p.sys.dim(), [&]<typename Policy>() {
      return single_observable<Policy>(w, p, b0_shift, steps);
    });
  }
  return single_observable<LiouvillePolicy>(w, p, b0_shift, steps);
}

std::string params_digest(const ControlWaveform& w, const PhysicsParams& p) {
  std::ostringstream text;
  text << std::setprecision(17) << "F2=" << p.sys.two_f() << ";beta=" << p.beta
       << ";gamma=" << p.gamma << ";omega=" << p.larmor_omega << ";bg=" << p.background_std_hz
       << ";T=" << p.duration << ";dtc=" << p.dt_coarse << ";dtf=" << p.dt_fine
       << ";diss=" << to_string(p.dissipator) << ";r=" << p.pumping_branching
       << ";nq=" << p.quadrature_points << ";wT=" << w.duration() << ";knots=";
  for (double a : w.knot_angles()) text << a << ',';
  std::uint64_t h = 14695981039346656037ULL;
  fnv1a(h, text.str());
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

// ---------------------------------------------------------------------------

struct IncrementalHistory::Impl {
  virtual ~Impl() = default;
  virtual const ControlWaveform& waveform() const = 0;
  virtual const PhysicsParams& params() const = 0;
  virtual const RMatrix& coeffs() const = 0;
  virtual int first_affected_bin(int k) const = 0;
  virtual void candidate(int k, double angle, RMatrix& out) const = 0;
  virtual void commit(int k, double angle) = 0;
  virtual void refresh() = 0;
  virtual ObservableHistory history() const = 0;
};

namespace {

template <typename Policy>
class IncrementalImpl final : public IncrementalHistory::Impl {
  using Cum = typename Policy::Cum;
  using Obs = typename Policy::Obs;

 public:
  IncrementalImpl(ControlWaveform w, PhysicsParams p)
      : w_(std::move(w)), p_(std::move(p)), policy_(p_), nodes_(background_quadrature(p_)) {
    k_bins_ = p_.bin_count();
    tracks_.resize(nodes_.size());
    refresh();
  }

  const ControlWaveform& waveform() const override { return w_; }
  const PhysicsParams& params() const override { return p_; }
  const RMatrix& coeffs() const override { return coeffs_; }

  int first_affected_bin(int k) const override { return window(k).first; }

  void candidate(int k, double angle, RMatrix& out) const override {
    const ControlWaveform trial = w_.with_knot(k, angle);
    const auto [first, last] = window(k);
    out.resize(coeffs_.rows(), coeffs_.cols());
    out.topRows(first) = coeffs_.topRows(first);

    std::vector<Obs> combined(static_cast<std::size_t>(k_bins_ - first), policy_.zero());
    std::vector<Obs> fresh(static_cast<std::size_t>(last - first));
    Obs mapped = policy_.zero();
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const Track& track = tracks_[q];
      const Cum end = propagate_bins(policy_, p_, trial, nodes_[q].shift, first, last,
                                     track.cums[static_cast<std::size_t>(first)], fresh.data(), nullptr);
      const double wq = nodes_[q].weight;
      for (int i = first; i < last; ++i) combined[static_cast<std::size_t>(i - first)] += wq * fresh[static_cast<std::size_t>(i - first)];
      if (last < k_bins_) {
        const auto v = policy_.relative(end, track.cums[static_cast<std::size_t>(last)]);
        for (int i = last; i < k_bins_; ++i) {
          policy_.transform(v, track.bins[static_cast<std::size_t>(i)], mapped);
          combined[static_cast<std::size_t>(i - first)] += wq * mapped;
        }
      }
    }
    double trace_part = 0.0;
    for (int i = first; i < k_bins_; ++i) {
      policy_.coords(combined[static_cast<std::size_t>(i - first)], trace_part, out.row(i).transpose());
    }
  }

  void commit(int k, double angle) override {
    const ControlWaveform trial = w_.with_knot(k, angle);
    const auto [first, last] = window(k);
    const auto f = static_cast<std::size_t>(first);
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      Track& track = tracks_[q];
      const Cum stale_end = track.cums[static_cast<std::size_t>(last)];
      propagate_bins(policy_, p_, trial, nodes_[q].shift, first, last, track.cums[f],
                     track.bins.data() + f, track.cums.data() + f + 1);
      if (last < k_bins_) {
        const auto v = policy_.relative(track.cums[static_cast<std::size_t>(last)], stale_end);
        Obs mapped = policy_.zero();
        for (int i = last; i < k_bins_; ++i) {
          policy_.transform(v, track.bins[static_cast<std::size_t>(i)], mapped);
          track.bins[static_cast<std::size_t>(i)] = mapped;
        }
        for (int i = last + 1; i <= k_bins_; ++i) policy_.remap(track.cums[static_cast<std::size_t>(i)], v);
      }
    }
    w_ = trial;
    rebuild_coeffs(first);
  }

  void refresh() override {
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      Track& track = tracks_[q];
      track.cums.assign(static_cast<std::size_t>(k_bins_ + 1), policy_.identity());
      track.bins.assign(static_cast<std::size_t>(k_bins_), policy_.zero());
      propagate_bins(policy_, p_, w_, nodes_[q].shift, 0, k_bins_, policy_.identity(),
                     track.bins.data(), track.cums.data() + 1);
    }
    rebuild_coeffs(0);
  }

  ObservableHistory history() const override {
    RVector trace_parts = trace_parts_;
    return ObservableHistory(p_.sys, std::move(trace_parts), coeffs_, bin_centers(p_),
                             params_digest(w_, p_));
  }

 private:
  struct Track {
    std::vector<Cum> cums;  // running propagator at bin boundaries, K + 1
    std::vector<Obs> bins;  // per-node bin averages, K
  };

  // Bins [first, last) whose fine steps sample the support of knot k.
  std::pair<int, int> window(int k) const {
    const auto [s_lo, s_hi] = w_.support_segments(k);
    const double t_lo = w_.knot_time(s_lo);
    const double t_hi = w_.knot_time(s_hi + 1);
    const int steps = p_.step_count();
    const int m = p_.steps_per_bin();
    const int j_lo = std::max(0, static_cast<int>(std::floor(t_lo / p_.dt_fine - 0.5)) - 1);
    const int j_hi = std::min(steps, static_cast<int>(std::ceil(t_hi / p_.dt_fine)) + 1);
    const int first = j_lo / m;
    const int last = std::min(k_bins_, (j_hi + m - 1) / m);
    return {first, last};
  }

  void rebuild_coeffs(int first) {
    if (coeffs_.rows() != k_bins_) {
      coeffs_ = RMatrix::Zero(k_bins_, p_.sys.basis_size());
      trace_parts_ = RVector::Zero(k_bins_);
    }
    for (int i = first; i < k_bins_; ++i) {
      Obs combined = policy_.zero();
      for (std::size_t q = 0; q < nodes_.size(); ++q) {
        combined += nodes_[q].weight * tracks_[q].bins[static_cast<std::size_t>(i)];
      }
      policy_.coords(combined, trace_parts_(i), coeffs_.row(i).transpose());
    }
  }

  ControlWaveform w_;
  PhysicsParams p_;
  Policy policy_;
  std::vector<QuadratureNode> nodes_;
  int k_bins_ = 0;
  std::vector<Track> tracks_;
  RMatrix coeffs_;
  RVector trace_parts_;
};

}  // namespace

IncrementalHistory::IncrementalHistory(ControlWaveform w, PhysicsParams p, PropagationEngine engine) {
  p.validate();
  check_waveform(w, p);
  if (resolve(engine, p) == PropagationEngine::Hilbert) {
    impl_ = with_hilbert_policy(p.sys.dim(), [&]<typename Policy>() -> std::unique_ptr<Impl> {
      return std::make_unique<IncrementalImpl<Policy>>(std::move(w), std::move(p));
    });
  } else {
    impl_ = std::make_unique<IncrementalImpl<LiouvillePolicy>>(std::move(w), std::move(p));
  }
}

IncrementalHistory::~IncrementalHistory() = default;
IncrementalHistory::IncrementalHistory(IncrementalHistory&&) noexcept = default;
IncrementalHistory& IncrementalHistory::operator=(IncrementalHistory&&) noexcept = default;

const ControlWaveform& IncrementalHistory::waveform() const { return impl_->waveform(); }
const PhysicsParams& IncrementalHistory::params() const { return impl_->params(); }
const RMatrix& IncrementalHistory::coeffs() const { return impl_->coeffs(); }
int IncrementalHistory::first_affected_bin(int k) const { return impl_->first_affected_bin(k); }
void IncrementalHistory::candidate(int k, double angle, RMatrix& out) const {
  impl_->candidate(k, angle, out);
}
void IncrementalHistory::commit(int k, double angle) { impl_->commit(k, angle); }
void IncrementalHistory::refresh() { impl_->refresh(); }
ObservableHistory IncrementalHistory::history() const { return impl_->history(); }

}  // namespace cwm
