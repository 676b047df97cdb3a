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


#include <random>

#include <benchmark/benchmark.h>

#include "cwm/dynamics.hpp"
#include "cwm/estimator.hpp"
#include "cwm/expm.hpp"
#include "cwm/measurement.hpp"

namespace {

using cwm::ControlWaveform;
using cwm::PhysicsParams;
using cwm::SpinSystem;

void BM_Expm(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  a *= 1.0 / a.norm();
  for (auto _ : state) benchmark::DoNotOptimize(cwm::expm(a));
}
BENCHMARK(BM_Expm)->Arg(3)->Arg(9)->Arg(48)->Arg(80);

PhysicsParams params(int twice_f) {
  PhysicsParams p = PhysicsParams::standard(SpinSystem::make(twice_f / 2.0), twice_f == 6 ? 7.67 : 0.81);
  p.duration = 4e-4;
  return p;
}

void BM_ObservableHistory(benchmark::State& state) {
  const PhysicsParams p = params(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(2);
  const ControlWaveform w = ControlWaveform::random(10, p.duration, rng);
  for (auto _ : state) benchmark::DoNotOptimize(cwm::observable_history(w, p));
  state.SetItemsProcessed(state.iterations() * p.bin_count());
}
BENCHMARK(BM_ObservableHistory)->Arg(2)->Arg(6)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Candidate(benchmark::State& state) {
  const PhysicsParams p = params(6);
  std::mt19937_64 rng(3);
  cwm::IncrementalHistory inc(ControlWaveform::random(10, p.duration, rng), p);
  cwm::RMatrix out;
  int k = 0;
  for (auto _ : state) {
    inc.candidate(k, 0.3 * k, out);
    k = (k + 1) % 10;
  }
}
BENCHMARK(BM_Candidate)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const PhysicsParams p = params(6);
  std::mt19937_64 rng(4);
  const cwm::ObservableHistory h = cwm::observable_history(ControlWaveform::random(10, p.duration, rng), p);
  const cwm::HermitianOperator rho(cwm::CMatrix::Identity(p.sys.dim(), p.sys.dim()) / p.sys.dim());
  const cwm::MeasurementRecord rec = cwm::simulate_record(rho, h, cwm::SnrSpec{30.0}, 5, 1);
  for (auto _ : state) {
    const cwm::InformationMatrix info = cwm::accumulate(h, rec);
    benchmark::DoNotOptimize(cwm::estimate(info, p.sys));
  }
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
