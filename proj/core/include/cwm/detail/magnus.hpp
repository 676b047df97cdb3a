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

// Sixth-order Magnus exponent for dY/dt = A(t) Y over one step of length h,
// from A sampled at the three Gauss-Legendre nodes of the step.

#include <array>
#include <cmath>

namespace cwm::detail {

inline constexpr std::array<double, 3> kMagnusNodes{0.5 - 0.1 * 3.872983346207417, 0.5,
                                                    0.5 + 0.1 * 3.872983346207417};

template <typename M>
M magnus6_exponent(const M& a1, const M& a2, const M& a3, double h) {
  const auto comm = [](const M& x, const M& y) -> M { return x * y - y * x; };
  const M alpha1 = h * a2;
  const M alpha2 = (std::sqrt(15.0) * h / 3.0) * (a3 - a1);
  const M alpha3 = (10.0 * h / 3.0) * (a3 - 2.0 * a2 + a1);
  const M c1 = comm(alpha1, alpha2);
  const M c2 = (-1.0 / 60.0) * comm(alpha1, M(2.0 * alpha3 + c1));
  return alpha1 + alpha3 / 12.0 +
         (1.0 / 240.0) * comm(M(-20.0 * alpha1 - alpha3 + c1), M(alpha2 + c2));
}

}  // namespace cwm::detail
