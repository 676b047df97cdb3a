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

#include "cwm/waveform.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

#include "cwm/errors.hpp"

namespace cwm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_angle(double x) {
  double r = std::fmod(x, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace

double wrap_angle(double x) {
  double r = std::fmod(x + std::numbers::pi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - std::numbers::pi;
}

ControlWaveform::ControlWaveform(std::vector<double> knot_angles, double duration)
    : knots_(std::move(knot_angles)), duration_(duration) {
  if (knots_.size() < 4) throw InvalidArgument("control waveform needs at least 4 knots");
  if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
    throw InvalidArgument("control waveform duration must be positive");
  }
  for (double& a : knots_) {
    if (!std::isfinite(a)) throw InvalidArgument("control waveform has a non-finite knot angle");
    a = reduce_angle(a);
  }
}

ControlWaveform ControlWaveform::constant(int n, double duration, double angle) {
  return ControlWaveform(std::vector<double>(static_cast<std::size_t>(std::max(n, 0)), angle),
                         duration);
}

ControlWaveform ControlWaveform::random(int n, double duration, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
  std::vector<double> knots(static_cast<std::size_t>(std::max(n, 0)));
  for (double& a : knots) a = uniform(rng);
  return ControlWaveform(std::move(knots), duration);
}

double ControlWaveform::knot_time(int k) const {
  if (k == knot_count() - 1) return duration_;
  return k * knot_spacing();
}

std::vector<double> ControlWaveform::knot_times_between(double t0, double t1) const {
  std::vector<double> out;
  const int last = knot_count() - 1;
  for (int k = std::max(1, static_cast<int>(std::floor(t0 / knot_spacing()))); k < last; ++k) {
    const double t = knot_time(k);
    if (t >= t1) break;
    if (t > t0) out.push_back(t);
  }
  return out;
}

ControlWaveform::Local ControlWaveform::local(double t) const {
  if (!(t >= 0.0 && t <= duration_)) throw InvalidArgument("time outside the waveform duration");
  const int n = knot_count();
  const double h = knot_spacing();
  const int s = std::min(n - 2, static_cast<int>(std::floor(t / h)));
  const auto theta = [this](int k) { return knots_[static_cast<std::size_t>(k)]; };

  Local l;
  l.u = std::clamp((t - s * h) / h, 0.0, 1.0);
  l.p0 = theta(s);
  l.p1 = l.p0 + wrap_angle(theta(s + 1) - theta(s));
  l.p_prev = s > 0 ? l.p0 - wrap_angle(theta(s) - theta(s - 1)) : 2.0 * l.p0 - l.p1;
  l.p_next = s + 2 <= n - 1 ? l.p1 + wrap_angle(theta(s + 2) - theta(s + 1)) : 2.0 * l.p1 - l.p0;
  return l;
}

double ControlWaveform::angle(double t) const {
  const Local l = local(t);
  const double u = l.u;
  return 0.5 * (2.0 * l.p0 + (l.p1 - l.p_prev) * u +
                (2.0 * l.p_prev - 5.0 * l.p0 + 4.0 * l.p1 - l.p_next) * u * u +
                (-l.p_prev + 3.0 * l.p0 - 3.0 * l.p1 + l.p_next) * u * u * u);
}

double ControlWaveform::angle_derivative(double t) const {
  const Local l = local(t);
  const double u = l.u;
  const double du = 0.5 * ((l.p1 - l.p_prev) +
                           2.0 * (2.0 * l.p_prev - 5.0 * l.p0 + 4.0 * l.p1 - l.p_next) * u +
                           3.0 * (-l.p_prev + 3.0 * l.p0 - 3.0 * l.p1 + l.p_next) * u * u);
  return du / knot_spacing();
}

ControlWaveform ControlWaveform::with_knot(int k, double angle) const {
  if (k < 0 || k >= knot_count()) throw InvalidArgument("knot index out of range");
  ControlWaveform out = *this;
  if (!std::isfinite(angle)) throw InvalidArgument("knot angle must be finite");
  out.knots_[static_cast<std::size_t>(k)] = reduce_angle(angle);
  return out;
}

ControlWaveform ControlWaveform::rotated(double offset) const {
  std::vector<double> knots = knots_;
  for (double& a : knots) a += offset;
  return ControlWaveform(std::move(knots), duration_);
}

std::pair<int, int> ControlWaveform::support_segments(int k) const {
  if (k < 0 || k >= knot_count()) throw InvalidArgument("knot index out of range");
  return {std::max(0, k - 2), std::min(knot_count() - 2, k + 1)};
}

void write_waveform(const std::filesystem::path& path, const ControlWaveform& w) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open waveform file for writing: " + path.string());
  out << std::setprecision(17);
  out << w.knot_count() << ' ' << w.duration() << '\n';
  for (double a : w.knot_angles()) out << a << '\n';
  if (!out) throw IoError("failed writing waveform file: " + path.string());
}

ControlWaveform read_waveform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open waveform file: " + path.string());
  long n = 0;
  double duration = 0.0;
  if (!(in >> n >> duration) || n < 4) {
    throw ConfigError("malformed waveform header in " + path.string());
  }
  std::vector<double> knots(static_cast<std::size_t>(n));
  for (double& a : knots) {
    if (!(in >> a)) throw ConfigError("waveform file truncated: " + path.string());
  }
  std::string extra;
  if (in >> extra) throw ConfigError("trailing data in waveform file: " + path.string());
  return ControlWaveform(std::move(knots), duration);
}

}  // namespace cwm
