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

#include <string>
#include <vector>

#include "nlssinit/types.hpp"

namespace nlssinit {

/**
 * Discrete-time linear state-space model
 *
 *   x(t+1) = A x(t) + B u(t)
 *   y(t)   = C x(t) + D u(t)
 *
 * Construction checks that the four matrices agree on n_x, n_u, n_y.
 * Unstable models are representable; query `is_stable()`.
 */
class LtiModel {
 public:
  LtiModel() = default;
  LtiModel(Matrix A, Matrix B, Matrix C, Matrix D);

  /// All-zero model of the given dimensions.
  static LtiModel zeros(int nx, int nu, int ny);

  int nx() const { return static_cast<int>(A_.rows()); }
  int nu() const { return static_cast<int>(B_.cols()); }
  int ny() const { return static_cast<int>(C_.rows()); }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& C() const { return C_; }
  const Matrix& D() const { return D_; }

  void set_A(Matrix A);
  void set_B(Matrix B);
  void set_C(Matrix C);
  void set_D(Matrix D);

  /// max |eig(A)|; 0 for an empty state.
  double spectral_radius() const;
  bool is_stable() const { return spectral_radius() < 1.0; }

  /// Markov parameters D, CB, CAB, ... ; entry k is an n_y x n_u block.
  std::vector<Matrix> markov_parameters(int count) const;

  /// Model in a new state basis x' = T x.
  LtiModel transformed(const Matrix& T) const;

 private:
  void check() const;

  Matrix A_, B_, C_, D_;
};

enum class RecordRole { estimation, validation };

std::string to_string(RecordRole role);

/// Sampled input/output record.
struct IoRecord {
  Signal u;  ///< N x n_u
  Signal y;  ///< N x n_y
  double sample_period = 1.0;
  RecordRole role = RecordRole::estimation;

  int length() const { return static_cast<int>(u.rows()); }
  int nu() const { return static_cast<int>(u.cols()); }
  int ny() const { return static_cast<int>(y.cols()); }

  /// Throws InvalidArgument / DimensionError when the record is unusable.
  void validate() const;
};

struct LtiSimulation {
  Signal y;  ///< N x n_y
  Signal x;  ///< N x n_x, row t holds x(t)
};

/// Runs the state recursion from x(1) = x0 over the N input samples in `u`.
LtiSimulation simulate_lti(const LtiModel& model, const Signal& u, const Vector& x0);
LtiSimulation simulate_lti(const LtiModel& model, const Signal& u);

/// sqrt(mean over t of ||y(t) - y_hat(t)||^2).
double rmse(const Signal& y_hat, const Signal& y);

/// Root mean square of a signal (RMSE against zero).
double rms(const Signal& y);

struct BlaOptions {
  int fir_taps = 0;                  ///< 0 selects min(80 n_x, N/4)
  double max_condition = 1e10;       ///< bound on sigma_1 / sigma_nx of the Hankel matrix
  double fir_ridge = 1e-8;           ///< relative Tikhonov weight on the FIR solve
  int refine_iterations = 30;        ///< Gauss-Newton (damped) steps on simulation error
  double stability_radius = 0.999;   ///< eigenvalues outside the unit circle are pulled here
};

struct BlaResult {
  LtiModel model;
  Vector x0;          ///< jointly estimated initial state (diagnostic only)
  double rmse_est = 0.0;
  bool stabilized = false;  ///< the raw realization was unstable and had to be stabilized
};

/**
 * Best linear approximation of order `nx` from a single record.
 *
 * High-order FIR least squares, Ho-Kalman realization from the Hankel matrix of
 * FIR Markov parameters (zero-padded shift estimate of A if the plain one is
 * unstable, radial eigenvalue projection to `stability_radius` as a last resort),
 * then damped Gauss-Newton refinement of (A, B, C, D, x0)
 * on the simulation error. Trial steps that leave the unit circle are rejected, so
 * the returned model is always stable.
 */
BlaResult estimate_bla(const IoRecord& record, int nx, const BlaOptions& options = {});

}  // namespace nlssinit
