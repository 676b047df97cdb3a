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
#include "cwm/waveform.hpp"

namespace cwm {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(Waveform, PassesThroughKnots) {
  std::mt19937_64 rng(1);
  const ControlWaveform w = ControlWaveform::random(12, 4e-3, rng);
  for (int k = 0; k < w.knot_count(); ++k) {
    EXPECT_NEAR(wrap_angle(w.angle(w.knot_time(k)) - w.knot_angle(k)), 0.0, 1e-12);
  }
}

TEST(Waveform, ContinuousAcrossKnotsWithSlope) {
  std::mt19937_64 rng(2);
  const ControlWaveform w = ControlWaveform::random(10, 1.0, rng);
  const double h = 1e-9;
  for (int k = 1; k + 1 < w.knot_count(); ++k) {
    const double t = w.knot_time(k);
    EXPECT_NEAR(std::remainder(w.angle(t - h) - w.angle(t + h), 2 * kPi), 0.0, 1e-6);
    EXPECT_NEAR(w.angle_derivative(t - h), w.angle_derivative(t + h), 1e-5);
  }
}

TEST(Waveform, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(3);
  const ControlWaveform w = ControlWaveform::random(8, 2.0, rng);
  for (double t : {0.1, 0.37, 1.01, 1.9}) {
    const double h = 1e-6;
    EXPECT_NEAR(w.angle_derivative(t), (w.angle(t + h) - w.angle(t - h)) / (2 * h), 1e-5);
  }
}

TEST(Waveform, AntipodalNeighboursStaySmooth) {
  const ControlWaveform w({0.0, kPi, 0.0, kPi, 0.0}, 1.0);
  for (double t = 0.0; t <= 1.0; t += 0.01) EXPECT_TRUE(std::isfinite(w.angle_derivative(t)));
}

TEST(Waveform, ConstantIsFlat) {
  const ControlWaveform w = ControlWaveform::constant(6, 1.0, 0.4);
  for (double t : {0.0, 0.3, 0.77, 1.0}) {
    EXPECT_NEAR(w.angle(t), 0.4, 1e-15);
    EXPECT_NEAR(w.angle_derivative(t), 0.0, 1e-12);
  }
}

TEST(Waveform, SupportIsLocal) {
  std::mt19937_64 rng(4);
  const ControlWaveform w = ControlWaveform::random(12, 1.0, rng);
  const int k = 6;
  const auto [first, last] = w.support_segments(k);
  const ControlWaveform moved = w.with_knot(k, w.knot_angle(k) + 1.0);
  const double dt = w.knot_spacing();
  for (int s = 0; s < w.knot_count() - 1; ++s) {
    const double t = (s + 0.5) * dt;
    if (s < first || s > last) {
      EXPECT_DOUBLE_EQ(w.angle(t), moved.angle(t)) << "segment " << s;
    } else {
      EXPECT_NE(w.angle(t), moved.angle(t)) << "segment " << s;
    }
  }
  EXPECT_EQ(w.support_segments(0).first, 0);
  EXPECT_EQ(w.support_segments(11).second, 10);
}

TEST(Waveform, RotationShiftsAngle) {
  std::mt19937_64 rng(5);
  const ControlWaveform w = ControlWaveform::random(7, 1.0, rng);
  const ControlWaveform r = w.rotated(0.9);
  for (double t : {0.05, 0.5, 0.93}) EXPECT_NEAR(wrap_angle(r.angle(t) - w.angle(t) - 0.9), 0.0, 1e-12);
}

TEST(Waveform, RejectsBadInput) {
  EXPECT_THROW(ControlWaveform({0.0, 1.0, 2.0}, 1.0), InvalidArgument);
  EXPECT_THROW(ControlWaveform({0.0, 1.0, 2.0, 3.0}, 0.0), InvalidArgument);
  EXPECT_THROW(ControlWaveform({0.0, NAN, 2.0, 3.0}, 1.0), InvalidArgument);
}

TEST(Waveform, FileRoundTrip) {
  std::mt19937_64 rng(6);
  const ControlWaveform w = ControlWaveform::random(50, 4e-3, rng);
  const auto path = std::filesystem::temp_directory_path() / "cwm_waveform_roundtrip.txt";
  write_waveform(path, w);
  const ControlWaveform back = read_waveform(path);
  ASSERT_EQ(back.knot_count(), 50);
  EXPECT_DOUBLE_EQ(back.duration(), w.duration());
  for (int k = 0; k < 50; ++k) EXPECT_DOUBLE_EQ(back.knot_angle(k), w.knot_angle(k));
  std::ifstream in(path);
  int n = 0;
  double t = 0.0;
  in >> n >> t;
  EXPECT_EQ(n, 50);
  std::filesystem::remove(path);
  EXPECT_THROW(read_waveform(path), IoError);
}

TEST(WrapAngle, Range) {
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(-kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5), 0.5, 1e-15);
}

}  // namespace
}  // namespace cwm
