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

#include "cwm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "cwm/errors.hpp"

namespace cwm {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.contains(item.key())) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

double number_or_inf(const json& v) {
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number or \"inf\", got \"" + s + "\"");
  }
  if (!v.is_number()) throw ConfigError("expected a number");
  return v.get<double>();
}

std::vector<double> number_list(const json& v, const char* what) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const json& x : v) out.push_back(number_or_inf(x));
  } else {
    out.push_back(number_or_inf(v));
  }
  if (out.empty()) throw ConfigError(std::string(what) + " must not be empty");
  return out;
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

PhysicsParams parse_physics(const json& j) {
  require_object(j, "physics");
  reject_unknown(j,
                 {"F", "beta", "gamma", "larmor_omega", "background_std_hz", "T", "dt_coarse",
                  "dt_fine", "dissipator_model", "quadrature_points", "pumping_branching"},
                 "physics");
  if (!j.contains("F")) throw ConfigError("physics.F is required");
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(get_or(j, "F", 0.0)), 0.0);
  if (j.contains("beta")) {
    const json& beta = j.at("beta");
    if (beta.is_string()) {
      p.beta = beta_preset(beta.get<std::string>());
    } else if (beta.is_number()) {
      p.beta = beta.get<double>();
    } else {
      throw ConfigError("physics.beta must be a number or a preset name");
    }
  }
  p.gamma = get_or(j, "gamma", p.gamma);
  p.larmor_omega = get_or(j, "larmor_omega", p.larmor_omega);
  p.background_std_hz = get_or(j, "background_std_hz", p.background_std_hz);
  p.duration = get_or(j, "T", p.duration);
  p.dt_coarse = get_or(j, "dt_coarse", p.dt_coarse);
  p.dt_fine = get_or(j, "dt_fine", p.dt_fine);
  if (j.contains("dissipator_model")) {
    p.dissipator = dissipator_from_string(get_or<std::string>(j, "dissipator_model", ""));
  }
  p.quadrature_points = get_or(j, "quadrature_points", p.quadrature_points);
  p.pumping_branching = get_or(j, "pumping_branching", p.pumping_branching);
  return p;
}

void parse_control(const json& j, ExperimentConfig& cfg, const std::filesystem::path& base_dir) {
  require_object(j, "control");
  reject_unknown(j,
                 {"grid_size", "max_sweeps", "tol", "seed", "eps_rel", "knots", "waveform_file",
                  "waveform_files"},
                 "control");
  SearchConfig& s = cfg.search;
  s.grid_size = get_or(j, "grid_size", s.grid_size);
  s.max_sweeps = get_or(j, "max_sweeps", s.max_sweeps);
  s.tol = get_or(j, "tol", s.tol);
  s.seed = get_or(j, "seed", s.seed);
  s.eps_rel = get_or(j, "eps_rel", s.eps_rel);
  s.knots = get_or(j, "knots", s.knots);
  if (j.contains("waveform_file")) {
    cfg.waveform_files.push_back(resolve_path(base_dir, get_or<std::string>(j, "waveform_file", "")));
  }
  if (j.contains("waveform_files")) {
    for (const auto& f : get_or<std::vector<std::string>>(j, "waveform_files", {})) {
      cfg.waveform_files.push_back(resolve_path(base_dir, f));
    }
  }
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Trial {
  bool ok = false;
  double fidelity = 0.0;
  double entropy = 0.0;
  int rank = 0;
};

struct Stats {
  double mean = 0.0;
  double stderr_ = 0.0;
  int count = 0;
};

Stats fidelity_stats(const std::vector<Trial>& trials) {
  Stats s;
  double sum = 0.0;
  for (const Trial& t : trials) {
    if (!t.ok) continue;
    sum += t.fidelity;
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = sum / s.count;
  double ss = 0.0;
  for (const Trial& t : trials) {
    if (t.ok) ss += (t.fidelity - s.mean) * (t.fidelity - s.mean);
  }
  s.stderr_ = s.count > 1 ? std::sqrt(ss / (s.count - 1)) / std::sqrt(static_cast<double>(s.count)) : 0.0;
  return s;
}

std::vector<ObservableHistory> model_histories(const ExperimentConfig& cfg,
                                               const std::vector<ControlWaveform>& waveforms,
                                               const PhysicsParams& p) {
  std::vector<ObservableHistory> out;
  for (int r = 0; r < cfg.n_runs; ++r) out.push_back(observable_history(waveforms.at(static_cast<std::size_t>(r)), p));
  return out;
}

Trial reconstruct_trial(const std::vector<ObservableHistory>& truth,
                        const std::vector<ObservableHistory>& model, int runs,
                        const PreparedState& state, double snr, const ExperimentConfig& cfg,
                        int realization) {
  Trial trial;
  try {
    std::vector<RunData> data;
    for (int r = 0; r < runs; ++r) {
      const auto idx = static_cast<std::size_t>(r);
      MeasurementRecord rec = simulate_record(state.rho, truth[idx], SnrSpec{snr},
                                              record_seed(cfg.base_seed, realization, cfg.n_runs, r),
                                              cfg.filter_window);
      data.push_back(RunData{model[idx], std::move(rec)});
    }
    const ReconstructionResult res = reconstruct(data, state.psi);
    trial.ok = true;
    trial.fidelity = *res.fidelity;
    trial.entropy = res.entropy;
    trial.rank = res.rank;
  } catch (const std::runtime_error& e) {
    std::cerr << "warning: realization " << realization << " (snr " << snr << ", runs " << runs
              << ") excluded: " << e.what() << '\n';
  }
  return trial;
}

std::filesystem::path waveform_path(const ExperimentConfig& cfg, int r) {
  return cfg.output_dir / ("waveform_run" + std::to_string(r) + ".txt");
}

std::filesystem::path record_path(const ExperimentConfig& cfg, int r) {
  return cfg.output_dir / ("record_run" + std::to_string(r) + ".csv");
}

void ensure_output_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.output_dir.string() + ": " + ec.message());
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(12) << x;
  return s.str();
}

}  // namespace

double beta_preset(const std::string& name) {
  if (name == "d1") return 7.67;
  if (name == "d2") return 0.81;
  throw ConfigError("unknown beta preset: " + name);
}

void ExperimentConfig::validate() const {
  try {
    physics.validate();
    search.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (snr_list.empty()) throw ConfigError("snr_list must not be empty");
  for (double s : snr_list) {
    if (!(s > 0.0)) throw ConfigError("snr values must be positive");
  }
  if (n_realizations < 1) throw ConfigError("n_realizations must be >= 1");
  if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
  if (filter_window < 1 || filter_window % 2 == 0) throw ConfigError("filter_window must be odd and >= 1");
  for (double e : control_error_pct) {
    if (!(e >= 0.0)) throw ConfigError("control_error_pct must be >= 0");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  for (const auto& f : waveform_files) {
    if (!std::filesystem::exists(f)) throw ConfigError("waveform file does not exist: " + f.string());
  }
  if (state_prep.name == "matrix" && !std::filesystem::exists(state_prep.matrix_file)) {
    throw ConfigError("state matrix file does not exist: " + state_prep.matrix_file.string());
  }
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_object(j, "config");
  reject_unknown(j,
                 {"physics", "state_prep", "snr_list", "n_realizations", "n_runs", "filter_window",
                  "control", "control_error_pct", "output_dir", "base_seed", "threads"},
                 "config");
  if (!j.contains("physics")) throw ConfigError("config.physics is required");

  PhysicsParams physics = [&] {
    try {
      return parse_physics(j.at("physics"));
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }();
  ExperimentConfig cfg(std::move(physics));

  if (j.contains("state_prep")) {
    const json& s = j.at("state_prep");
    if (s.is_string()) {
      cfg.state_prep.name = s.get<std::string>();
      if (cfg.state_prep.name != "cat" && cfg.state_prep.name != "stretched" &&
          cfg.state_prep.name != "stretched_down") {
        throw ConfigError("unknown state_prep: " + cfg.state_prep.name);
      }
    } else {
      require_object(s, "state_prep");
      reject_unknown(s, {"matrix_file"}, "state_prep");
      cfg.state_prep.name = "matrix";
      cfg.state_prep.matrix_file = resolve_path(base_dir, get_or<std::string>(s, "matrix_file", ""));
    }
  }
  if (j.contains("snr_list")) cfg.snr_list = number_list(j.at("snr_list"), "snr_list");
  cfg.n_realizations = get_or(j, "n_realizations", cfg.n_realizations);
  cfg.n_runs = get_or(j, "n_runs", cfg.n_runs);
  cfg.filter_window = get_or(j, "filter_window", cfg.filter_window);
  if (j.contains("control")) parse_control(j.at("control"), cfg, base_dir);
  if (j.contains("control_error_pct")) {
    cfg.control_error_pct = number_list(j.at("control_error_pct"), "control_error_pct");
  }
  if (j.contains("output_dir")) cfg.output_dir = resolve_path(base_dir, get_or<std::string>(j, "output_dir", ""));
  cfg.base_seed = get_or(j, "base_seed", cfg.base_seed);
  cfg.threads = get_or(j, "threads", cfg.threads);
  cfg.search.threads = cfg.threads;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path().empty() ? "." : path.parent_path());
}

PreparedState prepare_state(const StatePrep& prep, const SpinSystem& sys) {
  CVector psi;
  if (prep.name == "cat") {
    psi = cat_state(sys);
  } else if (prep.name == "stretched") {
    psi = basis_state(sys, sys.spin());
  } else if (prep.name == "stretched_down") {
    psi = basis_state(sys, -sys.spin());
  } else if (prep.name == "matrix") {
    const HermitianOperator rho = read_density_matrix(prep.matrix_file);
    if (rho.dim() != sys.dim()) throw ConfigError("state matrix has the wrong dimension");
    if (!is_density_matrix(rho, 1e-8)) throw ConfigError("state matrix is not a density matrix");
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho.matrix());
    const Eigen::Index top = sys.dim() - 1;
    if (eig.eigenvalues()(top) < 1.0 - 1e-8) {
      throw ConfigError("fidelity scoring needs a pure state matrix");
    }
    psi = eig.eigenvectors().col(top);
    return PreparedState{rho, psi};
  } else {
    throw ConfigError("unknown state_prep: " + prep.name);
  }
  return PreparedState{pure_state(psi), psi};
}

std::uint64_t record_seed(std::uint64_t base_seed, int realization, int n_runs, int run) {
  return base_seed + static_cast<std::uint64_t>(realization) * static_cast<std::uint64_t>(n_runs) +
         static_cast<std::uint64_t>(run);
}

DesignResult cmd_design(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const DesignResult result = greedy_multirun(cfg.n_runs, cfg.physics, cfg.search);
  for (int r = 0; r < cfg.n_runs; ++r) {
    const RunDesign& run = result.runs[static_cast<std::size_t>(r)];
    write_waveform(waveform_path(cfg, r), run.waveform);
    write_design_log(cfg.output_dir / ("design_log_run" + std::to_string(r) + ".csv"), run);
  }
  return result;
}

std::vector<ControlWaveform> load_waveforms(const ExperimentConfig& cfg) {
  std::vector<ControlWaveform> out;
  for (int r = 0; r < cfg.n_runs; ++r) {
    std::filesystem::path path = static_cast<std::size_t>(r) < cfg.waveform_files.size()
                                     ? cfg.waveform_files[static_cast<std::size_t>(r)]
                                     : waveform_path(cfg, r);
    if (!std::filesystem::exists(path)) {
      throw ConfigError("missing waveform for run " + std::to_string(r) + ": " + path.string() +
                        " (run `design` first or list control.waveform_files)");
    }
    ControlWaveform w = read_waveform(path);
    if (std::abs(w.duration() - cfg.physics.duration) > 1e-12 * cfg.physics.duration) {
      throw ConfigError("waveform duration does not match physics.T: " + path.string());
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::vector<ControlWaveform>& waveforms) {
  const PreparedState state = prepare_state(cfg.state_prep, cfg.physics.sys);
  const std::vector<ObservableHistory> hists = model_histories(cfg, waveforms, cfg.physics);

  std::vector<double> snrs = cfg.snr_list;
  std::sort(snrs.begin(), snrs.end());
  std::vector<SweepRow> rows;
  for (double snr : snrs) {
    for (int runs = 1; runs <= cfg.n_runs; ++runs) {
      std::vector<Trial> trials(static_cast<std::size_t>(cfg.n_realizations));
      parallel_for(cfg.n_realizations, cfg.threads, [&](int i) {
        trials[static_cast<std::size_t>(i)] = reconstruct_trial(hists, hists, runs, state, snr, cfg, i);
      });
      const Stats s = fidelity_stats(trials);
      SweepRow row;
      row.snr = snr;
      row.n_runs = runs;
      row.mean_fidelity = s.mean;
      row.stderr_fidelity = s.stderr_;
      row.excluded = cfg.n_realizations - s.count;
      double entropy_sum = 0.0;
      for (const Trial& t : trials) {
        if (!t.ok) continue;
        entropy_sum += t.entropy;
        row.rank = t.rank;
      }
      row.mean_entropy = s.count > 0 ? entropy_sum / s.count : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SweepRow> cmd_sweep(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const std::vector<SweepRow> rows = run_sweep(cfg, load_waveforms(cfg));
  write_sweep_csv(cfg.output_dir / "sweep.csv", rows);
  return rows;
}

std::vector<SensitivityRow> run_sensitivity(const ExperimentConfig& cfg,
                                            const std::vector<ControlWaveform>& waveforms) {
  const PreparedState state = prepare_state(cfg.state_prep, cfg.physics.sys);
  const std::vector<ObservableHistory> model = model_histories(cfg, waveforms, cfg.physics);
  const double snr = cfg.snr_list.front();

  std::vector<SensitivityRow> rows;
  for (double pct : cfg.control_error_pct) {
    std::vector<Trial> trials(static_cast<std::size_t>(cfg.n_realizations));
    parallel_for(cfg.n_realizations, cfg.threads, [&](int i) {
      if (pct == 0.0) {
        trials[static_cast<std::size_t>(i)] = reconstruct_trial(model, model, cfg.n_runs, state, snr, cfg, i);
        return;
      }
      // Amplitude error drawn once per realization, shared by all its runs.
      std::mt19937_64 rng(splitmix64(cfg.base_seed + static_cast<std::uint64_t>(i)));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double g = normal(rng);
      PhysicsParams perturbed = cfg.physics;
      perturbed.larmor_omega *= 1.0 + 0.01 * pct * g;
      const std::vector<ObservableHistory> truth = model_histories(cfg, waveforms, perturbed);
      trials[static_cast<std::size_t>(i)] = reconstruct_trial(truth, model, cfg.n_runs, state, snr, cfg, i);
    });
    const Stats s = fidelity_stats(trials);
    rows.push_back(SensitivityRow{pct, s.mean, s.stderr_, cfg.n_realizations - s.count});
  }
  return rows;
}

std::vector<SensitivityRow> cmd_sensitivity(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const std::vector<SensitivityRow> rows = run_sensitivity(cfg, load_waveforms(cfg));
  write_sensitivity_csv(cfg.output_dir / "sensitivity.csv", rows);
  return rows;
}

void cmd_simulate(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const std::vector<ControlWaveform> waveforms = load_waveforms(cfg);
  const PreparedState state = prepare_state(cfg.state_prep, cfg.physics.sys);
  const std::vector<ObservableHistory> hists = model_histories(cfg, waveforms, cfg.physics);
  for (int r = 0; r < cfg.n_runs; ++r) {
    const MeasurementRecord rec =
        simulate_record(state.rho, hists[static_cast<std::size_t>(r)], SnrSpec{cfg.snr_list.front()},
                        record_seed(cfg.base_seed, 0, cfg.n_runs, r), cfg.filter_window);
    write_record(record_path(cfg, r), rec);
  }
  write_density_matrix(cfg.output_dir / "rho_true.txt", state.rho);
}

ReconstructionResult cmd_reconstruct(const ExperimentConfig& cfg) {
  ensure_output_dir(cfg);
  const std::vector<ControlWaveform> waveforms = load_waveforms(cfg);
  const PreparedState state = prepare_state(cfg.state_prep, cfg.physics.sys);
  const std::vector<ObservableHistory> hists = model_histories(cfg, waveforms, cfg.physics);
  std::vector<RunData> data;
  for (int r = 0; r < cfg.n_runs; ++r) {
    MeasurementRecord rec = read_record(record_path(cfg, r));
    if (rec.size() != hists[static_cast<std::size_t>(r)].size()) {
      throw ConfigError("record length does not match the configured physics: " + record_path(cfg, r).string());
    }
    data.push_back(RunData{hists[static_cast<std::size_t>(r)], std::move(rec)});
  }
  ReconstructionResult res = reconstruct(data, state.psi);
  const std::vector<ResultRow> rows{
      ResultRow{0, data.front().record.snr, res.rank, res.entropy, res.fidelity.value_or(0.0)}};
  write_result_summary(cfg.output_dir / "result.csv", rows);
  write_density_matrix(cfg.output_dir / "rho_pos.txt", res.rho_pos);
  write_density_matrix(cfg.output_dir / "rho_hat.txt", res.rho_hat);
  return res;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open sweep output for writing: " + path.string());
  out << "snr,n_runs,mean_fidelity,stderr_fidelity,mean_entropy,rank\n";
  for (const SweepRow& r : rows) {
    out << fmt(r.snr) << ',' << r.n_runs << ',' << fmt(r.mean_fidelity) << ','
        << fmt(r.stderr_fidelity) << ',' << fmt(r.mean_entropy) << ',' << r.rank << '\n';
  }
  if (!out) throw IoError("failed writing sweep output: " + path.string());
}

void write_sensitivity_csv(const std::filesystem::path& path,
                           const std::vector<SensitivityRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open sensitivity output for writing: " + path.string());
  out << "control_error_pct,mean_fidelity\n";
  for (const SensitivityRow& r : rows) out << fmt(r.control_error_pct) << ',' << fmt(r.mean_fidelity) << '\n';
  if (!out) throw IoError("failed writing sensitivity output: " + path.string());
}

}  // namespace cwm
