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

#include <filesystem>
#include <random>
#include <span>
#include <vector>

namespace cwm {

// Planar control field direction, specified by n knot angles at
// t_k = k T / (n - 1) and interpolated in between.
//
// The angle is interpolated with a uniform Catmull-Rom spline on locally
// unwrapped knot values (neighbour differences taken in (-pi, pi]), with
// linearly extrapolated ghost knots at both ends. The result is C1 on
// [0, T], passes through every knot, and on segment s depends only on knots
// s-1 .. s+2.
class ControlWaveform {
 public:
  ControlWaveform() = default;
  // Angles are reduced into [0, 2 pi). Throws InvalidArgument for n < 4,
  // non-finite angles or duration <= 0.
  ControlWaveform(std::vector<double> knot_angles, double duration);

  static ControlWaveform constant(int n, double duration, double angle = 0.0);
  // Angles i.i.d. uniform in [0, 2 pi).
  static ControlWaveform random(int n, double duration, std::mt19937_64& rng);

  int knot_count() const { return static_cast<int>(knots_.size()); }
  double duration() const { return duration_; }
  std::span<const double> knot_angles() const { return knots_; }
  double knot_angle(int k) const { return knots_.at(static_cast<std::size_t>(k)); }
  double knot_time(int k) const;
  double knot_spacing() const { return duration_ / (knot_count() - 1); }

  // Interpolated angle at t in [0, T]; not reduced mod 2 pi.
  double angle(double t) const;
  double angle_derivative(double t) const;

  ControlWaveform with_knot(int k, double angle) const;
  // Rotates every knot by the same offset.
  ControlWaveform rotated(double offset) const;

  // Knot times strictly inside (t0, t1), ascending. The interpolant is a
  // single cubic between consecutive entries.
  std::vector<double> knot_times_between(double t0, double t1) const;

  // Segments whose interpolant depends on knot k: [first, last].
  std::pair<int, int> support_segments(int k) const;

 private:
  struct Local {
    double p_prev, p0, p1, p_next, u;
  };
  Local local(double t) const;

  std::vector<double> knots_;
  double duration_ = 0.0;
};

// Plain text: "n T" on the first line then one angle (radians) per line,
// written with 17 significant digits.
void write_waveform(const std::filesystem::path& path, const ControlWaveform& w);
ControlWaveform read_waveform(const std::filesystem::path& path);

// Reduces x into (-pi, pi].
double wrap_angle(double x);

}  // namespace cwm
