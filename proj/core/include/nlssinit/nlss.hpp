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
#include <initializer_list>
#include <optional>
#include <vector>

#include "nlssinit/levenberg_marquardt.hpp"
#include "nlssinit/lti.hpp"
#include "nlssinit/state_estimator.hpp"
#include "nlssinit/tanh_net.hpp"

namespace nlssinit {

/**
 * Nonlinear state-space model with the nonlinear terms in parallel to a linear core:
 *
 *   x(t+1) = A x(t) + B u(t) + f_nl([x(t); u(t)])
 *   y(t)   = C x(t) + D u(t) + g_nl([x(t); u(t)])
 *
 * with x(1) = x0.
 */
struct NlssModel {
  LtiModel lin;
  TanhNet f_nl;  ///< n_in = n_x + n_u, n_out = n_x
  TanhNet g_nl;  ///< n_in = n_x + n_u, n_out = n_y
  Vector x0;

  /// Linear model with zero networks of the requested widths.
  static NlssModel from_linear(const LtiModel& lin, int n_f, int n_g, Vector x0 = Vector());

  int nx() const { return lin.nx(); }
  int nu() const { return lin.nu(); }
  int ny() const { return lin.ny(); }

  /// Throws DimensionError when the parts disagree.
  void validate() const;
};

struct NlssDims {
  int nx = 0, nu = 0, ny = 0, nf = 0, ng = 0;

  static NlssDims of(const NlssModel& m);
  bool operator==(const NlssDims&) const = default;
};

enum class ParamBlock { A, B, C, D, f_nl, g_nl, x0 };

/**
 * Offsets of the parameter blocks in the flat vector. Order:
 * vec(A), vec(B), vec(C), vec(D), f_nl parameters, g_nl parameters, x0
 * (vec is column-major; network parameters follow TanhNet::parameters()).
 */
struct ThetaLayout {
  explicit ThetaLayout(const NlssDims& d);

  int offset(ParamBlock b) const;
  int length(ParamBlock b) const;
  int size() const { return offsets_[7]; }

 private:
  int offsets_[8];
};

Vector pack_theta(const NlssModel& model);
NlssModel unpack_theta(const Vector& theta, const NlssDims& dims);

/// Free-parameter mask with only the listed blocks free.
std::vector<bool> free_mask(const NlssDims& dims, std::initializer_list<ParamBlock> blocks);

struct NlssSimulation {
  Signal y;  ///< N x n_y
  Signal x;  ///< N x n_x
};

/// Multiple of max(1, max|u|) beyond which a state norm counts as divergence.
inline constexpr double kDivergenceFactor = 1e6;

/// Simulates the recursion; throws DivergenceError if the state blows up.
NlssSimulation simulate_nlss(const NlssModel& model, const Signal& u);

/**
 * State the model settles to under the constant input `u_rest`, found by running
 * the recursion until the step change falls below 1e-12 (relative). Returns
 * nullopt if it has not settled after `max_steps` steps or blows up.
 */
std::optional<Vector> rest_state(const NlssModel& model, const Vector& u_rest, int max_steps = 200000);

struct NlssJacobian {
  Signal y;    ///< simulated output, N x n_y
  Matrix dy;   ///< (N n_y) x theta size, row t*n_y + i is d y_i(t) / d theta
};

/// Output and its exact parameter Jacobian by forward sensitivity recursion.
NlssJacobian simulate_nlss_jacobian(const NlssModel& model, const Signal& u);

struct InitOptions {
  StaticFitOptions static_fit;
};

/**
 * Builds the initialised model from the linear model and a state trajectory:
 * fits f_nl on x(t+1) - A x(t) - B u(t), t = 1..N-1, and g_nl on
 * y(t) - C x(t) - D u(t), t = 1..N, both against [x(t); u(t)], and sets x0 = x(1).
 */
NlssModel assemble_initialized(const LtiModel& lin, const StateTrajectory& traj, const IoRecord& record, int n_f,
                               int n_g, std::uint64_t seed, const InitOptions& options = {});

/// Seed used for g_nl when f_nl uses `seed`.
std::uint64_t g_seed(std::uint64_t seed);

struct OptimizeOptions {
  LmSettings lm;
  std::vector<bool> free;  ///< empty: everything free
};

struct NlssFit {
  NlssModel model;
  LmStatus status = LmStatus::converged;
  double initial_cost = 0.0;  ///< V(theta) = mean squared output error
  double cost = 0.0;
  int iterations = 0;
  std::vector<LmTracePoint> trace;
};

/**
 * Levenberg-Marquardt on V(theta) over the whole parameter vector (or the masked
 * subset). Trial steps that diverge are rejected. Throws DivergenceError if the
 * starting model already diverges on `record`.
 */
NlssFit optimize_nlss(const NlssModel& model, const IoRecord& record, const OptimizeOptions& options = {});

}  // namespace nlssinit
