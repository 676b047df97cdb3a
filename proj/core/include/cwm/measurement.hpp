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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "cwm/dynamics.hpp"
#include "cwm/operator_algebra.hpp"

namespace cwm {

// Signal-to-noise ratio per coarse-grained sample, SNR = F / sigma.
struct SnrSpec {
  double snr = std::numeric_limits<double>::infinity();

  static SnrSpec noiseless() { return SnrSpec{}; }
  bool is_noiseless() const { return snr == std::numeric_limits<double>::infinity(); }
};

// sigma = F / snr, zero for infinite snr. Throws InvalidArgument for snr <= 0.
double sigma_from_snr(SnrSpec s, const SpinSystem& sys);

// Per-atom record: values are O(F) and sigma is the per-sample noise std
// before filtering.
struct MeasurementRecord {
  std::vector<double> times;
  RVector values;
  double sigma = 0.0;
  double snr = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  int filter_window = 1;
  std::string params_digest;

  int size() const { return static_cast<int>(values.size()); }
};

// <O_i, rho0> for every bin.
RVector expected_signal(const HermitianOperator& rho0, const ObservableHistory& hist);

// Centered moving average over w (odd) samples, truncated at the edges.
RVector moving_average(const RVector& x, int w);

// raw_i = <O_i, rho0> + sigma W_i with W_i ~ N(0, 1) drawn from
// std::mt19937_64(seed); values = moving_average(raw, w).
MeasurementRecord simulate_record(const HermitianOperator& rho0, const ObservableHistory& hist,
                                  SnrSpec s, std::uint64_t seed, int filter_window);

// The same moving average applied to the model side.
ObservableHistory apply_filter(const ObservableHistory& hist, int w);

// CSV `time_s,value` plus a JSON sidecar with the same basename.
void write_record(const std::filesystem::path& csv_path, const MeasurementRecord& rec);
MeasurementRecord read_record(const std::filesystem::path& csv_path);
std::filesystem::path record_sidecar_path(const std::filesystem::path& csv_path);

}  // namespace cwm
