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

// Configuration-driven experiments: control design, record simulation,
// reconstruction, SNR sweeps and control-error sensitivity.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cwm/control_optimizer.hpp"
#include "cwm/dynamics.hpp"
#include "cwm/estimator.hpp"
#include "cwm/measurement.hpp"

namespace cwm {

struct StatePrep {
  std::string name = "cat";  // cat | stretched | stretched_down | matrix
  std::filesystem::path matrix_file;
};

struct ExperimentConfig {
  explicit ExperimentConfig(PhysicsParams p) : physics(std::move(p)) {}

  PhysicsParams physics;
  StatePrep state_prep;
  std::vector<double> snr_list{30.0};
  int n_realizations = 50;
  int n_runs = 1;
  int filter_window = 3;
  SearchConfig search;
  std::vector<std::filesystem::path> waveform_files;
  std::vector<double> control_error_pct{0.0};
  std::filesystem::path output_dir = "out";
  std::uint64_t base_seed = 1;
  int threads = 1;

  void validate() const;
};

// Parses the JSON config. Unknown keys anywhere are a ConfigError; relative
// paths resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = ".");

// beta presets: "d1" -> 7.67, "d2" -> 0.81.
double beta_preset(const std::string& name);

struct PreparedState {
  HermitianOperator rho;
  CVector psi;
};
PreparedState prepare_state(const StatePrep& prep, const SpinSystem& sys);

struct SweepRow {
  double snr = 0.0;
  int n_runs = 0;
  double mean_fidelity = 0.0;
  double stderr_fidelity = 0.0;
  double mean_entropy = 0.0;
  int rank = 0;
  int excluded = 0;
};

struct SensitivityRow {
  double control_error_pct = 0.0;
  double mean_fidelity = 0.0;
  double stderr_fidelity = 0.0;
  int excluded = 0;
};

// Designs n_runs waveforms; writes waveform_run<r>.txt and design_log_run<r>.csv.
DesignResult cmd_design(const ExperimentConfig& cfg);

// Waveforms from control.waveform_files, else from the design outputs.
std::vector<ControlWaveform> load_waveforms(const ExperimentConfig& cfg);

// Rows sorted by (snr, n_runs); writes sweep.csv.
std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg);
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::vector<ControlWaveform>& waveforms);

// Fidelity at snr_list[0] for every control error level; writes sensitivity.csv.
std::vector<SensitivityRow> cmd_sensitivity(const ExperimentConfig& cfg);
std::vector<SensitivityRow> run_sensitivity(const ExperimentConfig& cfg,
                                            const std::vector<ControlWaveform>& waveforms);

// One realization at snr_list[0]: record_run<r>.csv (+ sidecar) and the
// prepared state as rho_true.txt.
void cmd_simulate(const ExperimentConfig& cfg);

// Reads the records written by cmd_simulate; writes result.csv, rho_pos.txt
// and rho_hat.txt.
ReconstructionResult cmd_reconstruct(const ExperimentConfig& cfg);

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_sensitivity_csv(const std::filesystem::path& path,
                           const std::vector<SensitivityRow>& rows);

// Noise seed for run `run` of realization `realization`.
std::uint64_t record_seed(std::uint64_t base_seed, int realization, int n_runs, int run);

}  // namespace cwm
