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

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlssinit/types.hpp"

namespace nlssinit {

struct LmSettings {
  int max_iter = 500;
  double rel_tol = 1e-10;           ///< stop when an accepted step lowers the cost by less than this fraction
  double step_tol = 1e-12;          ///< stop when ||step|| <= step_tol * (||theta|| + step_tol)
  double initial_damping = 1e-3;    ///< relative to the mean diagonal of J'J at the start point
  double damping_factor = 10.0;
  double max_damping = 1e12;        ///< relative damping above this ends the run as stalled
};

enum class LmStatus { converged, max_iterations, stalled };

std::string to_string(LmStatus status);

struct LmTracePoint {
  int iter = 0;
  double cost = 0.0;     ///< cost of the iterate after this trial (accepted or not)
  double damping = 0.0;  ///< relative damping used for the trial
  bool accepted = false;
};

struct LmResult {
  Vector theta;
  double cost = 0.0;
  double initial_cost = 0.0;
  LmStatus status = LmStatus::converged;
  int iterations = 0;
  int accepted_steps = 0;
  std::vector<LmTracePoint> trace;
};

/**
 * Nonlinear least-squares problem for `levenberg_marquardt`.
 *
 * `residual` returns std::nullopt when theta is not admissible (for example a
 * simulation diverged); the optimizer treats that as a rejected trial.
 * `residual_and_jacobian` is only called at accepted points.
 */
struct LmProblem {
  std::function<std::optional<Vector>(const Vector& theta)> residual;
  std::function<void(const Vector& theta, Vector& residual, Matrix& jacobian)> residual_and_jacobian;
  /// Multiplies the raw sum of squares before it is stored in results and traces.
  double cost_scale = 1.0;
  /// Empty means every parameter is free.
  std::vector<bool> free;
};

/**
 * Levenberg-Marquardt on 0.5 ||r(theta)||^2 with damping mu * I.
 *
 * Damping starts at `initial_damping` times the mean diagonal of J'J, is divided
 * by `damping_factor` on an accepted step and multiplied by it on a rejection.
 * The iterate only moves on strict cost decrease.
 * Throws NonFiniteLossError when a residual contains NaN/Inf.
 */
LmResult levenberg_marquardt(const LmProblem& problem, const Vector& theta0,
                             const LmSettings& settings = {});

}  // namespace nlssinit
