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

// Independent state-propagation route and the small-scale self-check suite
// behind `cwm validate`.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "cwm/dynamics.hpp"
#include "cwm/operator_algebra.hpp"
#include "cwm/waveform.hpp"

namespace cwm {

// Tr[rho(t) Fz] with rho0 evolved forward in the Schrodinger picture on the
// same step grid as the observable route (sixth-order Magnus steps of
// dt_fine, split at knot times). Unitary steps on the density matrix for
// LossOnly (or gamma = 0); a column-stacked Liouvillian on vec(rho) otherwise.
double schrodinger_expectation(const HermitianOperator& rho0, const ControlWaveform& w,
                               const PhysicsParams& p, double b0_shift, double t);

// Full-rank density matrix G G^dag / Tr with Gaussian complex G.
HermitianOperator random_density_matrix(const SpinSystem& sys, std::mt19937_64& rng);

struct ValidationOptions {
  std::uint64_t seed = 1;
  // Negative control: swap one basis element for a non-orthonormal one.
  bool corrupt_basis = false;
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
};

std::vector<ValidationCheck> run_validation(const ValidationOptions& opts = {});

// "check,result,value,tolerance" followed by one row per check.
void write_validation_table(std::ostream& out, const std::vector<ValidationCheck>& checks);

bool all_passed(const std::vector<ValidationCheck>& checks);

}  // namespace cwm
