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

#include "cwm/measurement.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "json.hpp"

#include "cwm/errors.hpp"

namespace cwm {

namespace {

void check_window(int w) {
  if (w < 1 || w % 2 == 0) throw InvalidArgument("filter window must be an odd integer >= 1");
}

}  // namespace

double sigma_from_snr(SnrSpec s, const SpinSystem& sys) {
  if (std::isnan(s.snr) || s.snr <= 0.0) throw InvalidArgument("snr must be positive");
  if (s.is_noiseless()) return 0.0;
  return sys.spin() / s.snr;
}

RVector expected_signal(const HermitianOperator& rho0, const ObservableHistory& hist) {
  const SpinSystem& sys = hist.system();
  if (rho0.dim() != sys.dim()) throw InvalidArgument("expected_signal: dimension mismatch");
  const OperatorVector v = vectorize(rho0, sys);
  RVector out = hist.coeffs() * v.coeffs;
  out += hist.trace_parts() * v.trace_part;
  return out;
}

RVector moving_average(const RVector& x, int w) {
  check_window(w);
  if (w == 1) return x;
  const Eigen::Index n = x.size();
  const Eigen::Index half = w / 2;
  RVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + half);
    out(i) = x.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

MeasurementRecord simulate_record(const HermitianOperator& rho0, const ObservableHistory& hist,
                                  SnrSpec s, std::uint64_t seed, int filter_window) {
  check_window(filter_window);
  MeasurementRecord rec;
  rec.sigma = sigma_from_snr(s, hist.system());
  rec.snr = s.snr;
  rec.seed = seed;
  rec.filter_window = filter_window;
  rec.times = hist.times();
  rec.params_digest = hist.params_digest();

  RVector raw = expected_signal(rho0, hist);
  if (rec.sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) += rec.sigma * normal(rng);
  }
  rec.values = moving_average(raw, filter_window);
  return rec;
}

ObservableHistory apply_filter(const ObservableHistory& hist, int w) {
  check_window(w);
  if (w == 1) return hist;
  const Eigen::Index n = hist.size();
  const Eigen::Index half = w / 2;
  RMatrix coeffs(n, hist.coeffs().cols());
  RVector trace_parts(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - half);
    const Eigen::Index len = std::min<Eigen::Index>(n - 1, i + half) - lo + 1;
    coeffs.row(i) = hist.coeffs().middleRows(lo, len).colwise().mean();
    trace_parts(i) = hist.trace_parts().segment(lo, len).mean();
  }
  return ObservableHistory(hist.system(), std::move(trace_parts), std::move(coeffs), hist.times(),
                           hist.params_digest() + "+w" + std::to_string(w));
}

std::filesystem::path record_sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

void write_record(const std::filesystem::path& csv_path, const MeasurementRecord& rec) {
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open record file for writing: " + csv_path.string());
  out << "time_s,value\n" << std::setprecision(17);
  for (int i = 0; i < rec.size(); ++i) {
    out << rec.times[static_cast<std::size_t>(i)] << ',' << rec.values(i) << '\n';
  }
  if (!out) throw IoError("failed writing record file: " + csv_path.string());

  nlohmann::json meta;
  meta["seed"] = rec.seed;
  meta["snr"] = std::isinf(rec.snr) ? nlohmann::json("inf") : nlohmann::json(rec.snr);
  meta["sigma"] = rec.sigma;
  meta["filter_window"] = rec.filter_window;
  meta["params_digest"] = rec.params_digest;
  meta["samples"] = rec.size();
  std::ofstream side(record_sidecar_path(csv_path));
  if (!side) throw IoError("cannot write record sidecar for " + csv_path.string());
  side << std::setw(2) << meta << '\n';
}

MeasurementRecord read_record(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open record file: " + csv_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "time_s,value") {
    throw ConfigError("record file must start with header time_s,value: " + csv_path.string());
  }
  MeasurementRecord rec;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double t = 0.0, v = 0.0;
    char comma = 0;
    if (!(row >> t >> comma >> v) || comma != ',') {
      throw ConfigError("malformed record row in " + csv_path.string() + ": " + line);
    }
    rec.times.push_back(t);
    values.push_back(v);
  }
  rec.values = Eigen::Map<const RVector>(values.data(), static_cast<Eigen::Index>(values.size()));

  std::ifstream side(record_sidecar_path(csv_path));
  if (!side) throw IoError("missing record sidecar for " + csv_path.string());
  nlohmann::json meta;
  try {
    side >> meta;
    rec.seed = meta.at("seed").get<std::uint64_t>();
    const auto& snr = meta.at("snr");
    rec.snr = snr.is_string() ? std::numeric_limits<double>::infinity() : snr.get<double>();
    rec.sigma = meta.at("sigma").get<double>();
    rec.filter_window = meta.at("filter_window").get<int>();
    rec.params_digest = meta.at("params_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad record sidecar for " + csv_path.string() + ": " + e.what());
  }
  return rec;
}

}  // namespace cwm
