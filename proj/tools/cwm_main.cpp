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

// cwm: control waveform design, simulation and reconstruction driver.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cwm/errors.hpp"
#include "cwm/experiment.hpp"
#include "cwm/validation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitValidation = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config) {
  auto* opt = cmd->add_option("--config", flags.config, "JSON experiment config");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Base seed (overrides base_seed and control.seed)");
  cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
  cmd->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
}

cwm::ExperimentConfig load(const CommonFlags& flags) {
  cwm::ExperimentConfig cfg = cwm::load_config(flags.config);
  if (flags.seed) {
    cfg.base_seed = *flags.seed;
    cfg.search.seed = *flags.seed;
  }
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  if (flags.threads) {
    cfg.threads = *flags.threads;
    cfg.search.threads = *flags.threads;
  }
  return cfg;
}

void report_excluded(int excluded, const std::string& what) {
  if (excluded > 0) std::cerr << what << ": excluded " << excluded << " realization(s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous weak measurement tomography with designed control waveforms"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool inject_basis_fault = false;

  auto* design = app.add_subcommand("design", "Design control waveforms");
  auto* sweep = app.add_subcommand("sweep", "Mean fidelity versus SNR and number of runs");
  auto* sensitivity = app.add_subcommand("sensitivity", "Mean fidelity versus control amplitude error");
  auto* simulate = app.add_subcommand("simulate", "Write one noisy record per run");
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct the state from written records");
  auto* validate = app.add_subcommand("validate", "Run the self-check suite");
  for (auto* cmd : {design, sweep, sensitivity, simulate, reconstruct}) add_common(cmd, flags, true);
  add_common(validate, flags, false);
  validate->add_flag("--inject-basis-fault", inject_basis_fault)->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      cwm::ValidationOptions opts;
      opts.seed = flags.seed.value_or(1);
      opts.corrupt_basis = inject_basis_fault;
      const auto checks = cwm::run_validation(opts);
      cwm::write_validation_table(std::cout, checks);
      return cwm::all_passed(checks) ? kExitOk : kExitValidation;
    }

    const cwm::ExperimentConfig cfg = load(flags);
    if (design->parsed()) {
      const cwm::DesignResult res = cwm::cmd_design(cfg);
      std::cout << "runs=" << res.runs.size() << " rank=" << res.final_rank
                << " entropy=" << res.final_entropy << '\n';
    } else if (sweep->parsed()) {
      int excluded = 0;
      for (const auto& row : cwm::cmd_sweep(cfg)) excluded += row.excluded;
      report_excluded(excluded, "sweep");
      std::cout << "wrote " << (cfg.output_dir / "sweep.csv").string() << '\n';
    } else if (sensitivity->parsed()) {
      int excluded = 0;
      for (const auto& row : cwm::cmd_sensitivity(cfg)) excluded += row.excluded;
      report_excluded(excluded, "sensitivity");
      std::cout << "wrote " << (cfg.output_dir / "sensitivity.csv").string() << '\n';
    } else if (simulate->parsed()) {
      cwm::cmd_simulate(cfg);
      std::cout << "wrote " << cfg.n_runs << " record(s) to " << cfg.output_dir.string() << '\n';
    } else if (reconstruct->parsed()) {
      const cwm::ReconstructionResult res = cwm::cmd_reconstruct(cfg);
      std::cout << "rank=" << res.rank << " entropy=" << res.entropy;
      if (res.fidelity) std::cout << " fidelity=" << *res.fidelity;
      std::cout << '\n';
    }
  } catch (const cwm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cwm::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cwm::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
