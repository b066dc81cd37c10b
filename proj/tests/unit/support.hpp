// Copyright 2026 The nlssinit Authors
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
#include <random>

#include "nlssinit/lti.hpp"
#include "nlssinit/nlss.hpp"
#include "nlssinit/tanh_net.hpp"

namespace nlssinit::testing {

inline Matrix random_matrix(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

/// Random model with spectral radius scaled to `radius`.
inline LtiModel random_stable_model(std::mt19937_64& rng, int nx, int nu, int ny, double radius = 0.8) {
  Matrix A = random_matrix(rng, nx, nx);
  const double rho = LtiModel(A, Matrix::Zero(nx, nu), Matrix::Zero(ny, nx), Matrix::Zero(ny, nu)).spectral_radius();
  if (rho > 0.0) A *= radius / rho;
  return LtiModel(A, random_matrix(rng, nx, nu), random_matrix(rng, ny, nx), random_matrix(rng, ny, nu));
}

inline TanhNet random_net(std::mt19937_64& rng, int n_in, int n_out, int n_hidden, double amp = 0.3) {
  return TanhNet(random_matrix(rng, n_hidden, n_in, 0.5), random_matrix(rng, n_hidden, 1, 0.5).col(0),
                 random_matrix(rng, n_out, n_hidden, amp));
}

inline NlssModel random_nlss(std::mt19937_64& rng, int nx, int nu, int ny, int nf, int ng) {
  NlssModel m;
  m.lin = random_stable_model(rng, nx, nu, ny, 0.7);
  m.f_nl = random_net(rng, nx + nu, nx, nf, 0.1);
  m.g_nl = random_net(rng, nx + nu, ny, ng, 0.3);
  m.x0 = random_matrix(rng, nx, 1, 0.3).col(0);
  return m;
}

inline IoRecord record_from(Signal u, Signal y) {
  IoRecord r;
  r.u = std::move(u);
  r.y = std::move(y);
  return r;
}

}  // namespace nlssinit::testing
