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

#include <vector>

#include "nlssinit/lti.hpp"

namespace nlssinit {

/// State sequence balancing output fit against the linear state equation.
struct StateTrajectory {
  Signal x;               ///< N x n_x
  double lambda = 1.0;
  double e_y = 0.0;       ///< sum_t ||y(t) - C x(t) - D u(t)||^2, t = 1..N
  double e_x = 0.0;       ///< sum_t ||x(t+1) - A x(t) - B u(t)||^2, t = 1..N-1
  bool ridge_used = false;
  double ridge = 0.0;     ///< epsilon of the eps*||x||^2 fallback term, 0 when unused
};

struct TradeoffCosts {
  double e_y = 0.0;
  double e_x = 0.0;
};

/// Evaluates E_y and E_x on an arbitrary trajectory.
TradeoffCosts tradeoff_costs(const IoRecord& record, const LtiModel& model, const Signal& x);

/**
 * Minimises E_y + lambda * E_x jointly over x(1)..x(N).
 *
 * The normal equations are block tridiagonal with n_x x n_x blocks and are
 * solved in one forward/backward block-Cholesky sweep, O(N n_x^3). If a pivot
 * block is not positive definite the solve is repeated with a small ridge term
 * (reported in the result); if that fails too, SingularSystemError is thrown.
 */
StateTrajectory estimate_state(const IoRecord& record, const LtiModel& model, double lambda);

struct LambdaCostRow {
  double lambda = 0.0;
  double e_y = 0.0;
  double e_x = 0.0;
  double relative_weight = 0.0;  ///< E_y / (E_y + E_x)
};

/// One state solve per lambda, rows in input order.
std::vector<LambdaCostRow> lambda_grid_costs(const IoRecord& record, const LtiModel& model,
                                             const std::vector<double>& lambdas);

}  // namespace nlssinit
