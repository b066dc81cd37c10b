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

#include "nlssinit/levenberg_marquardt.hpp"
#include "nlssinit/types.hpp"

namespace nlssinit {

/**
 * One-hidden-layer tanh network without output bias:
 *
 *   out(xi) = W_amp * tanh(W_pos * xi + b_pos)
 *
 * Rows of W_pos and entries of b_pos are the neuron positions, W_amp holds the
 * neuron amplitudes. The flat parameter vector is [vec(W_pos); b_pos; vec(W_amp)]
 * with column-major vec, n_hidden * (n_in + 1 + n_out) entries.
 */
class TanhNet {
 public:
  TanhNet() = default;
  /// Zero network (all weights zero).
  TanhNet(int n_in, int n_out, int n_hidden);
  TanhNet(Matrix W_pos, Vector b_pos, Matrix W_amp);

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  int n_hidden() const { return static_cast<int>(W_pos_.rows()); }
  int parameter_count() const { return n_hidden() * (n_in_ + 1 + n_out_); }

  const Matrix& W_pos() const { return W_pos_; }
  const Vector& b_pos() const { return b_pos_; }
  const Matrix& W_amp() const { return W_amp_; }

  void set_positions(Matrix W_pos, Vector b_pos);
  void set_amplitudes(Matrix W_amp);

  Vector parameters() const;
  void set_parameters(const Eigen::Ref<const Vector>& theta);

  /// Network output for one regressor.
  Vector evaluate(const Vector& xi) const;

  /**
   * Output plus optional Jacobians. `d_input` becomes n_out x n_in,
   * `d_params` becomes n_out x parameter_count() in flat-parameter order.
   */
  Vector evaluate(const Vector& xi, Matrix* d_input, Matrix* d_params) const;

  /// Reusable buffers for repeated evaluation in inner loops.
  struct Workspace {
    Vector act;
    Vector slope;
    Vector out;
    Matrix d_input;
    Matrix d_params;
  };

  /// Allocation-free (after the first call) evaluation into `ws`.
  void evaluate(const Eigen::Ref<const Vector>& xi, Workspace& ws, bool jacobians) const;

 private:
  void check() const;
  void check_input(const Vector& xi) const;

  int n_in_ = 0;
  int n_out_ = 0;
  Matrix W_pos_;
  Vector b_pos_;
  Matrix W_amp_;
};

/// Static regression data z(t) = h(xi(t)); rows are samples.
struct StaticDataset {
  Signal xi;  ///< M x n_in
  Signal z;   ///< M x n_out

  void validate() const;
};

struct NeuronPositions {
  Matrix W_pos;  ///< n_hidden x n_in
  Vector b_pos;  ///< n_hidden
};

/**
 * Random neuron positions covering the sample.
 *
 * Each weight row is uniform in [-1, 1] per input, divided by that input's
 * half-range over the sample. Each offset centres the neuron on a randomly drawn
 * sample point (plus a uniform jitter of at most 1), so every neuron's active
 * region |w'xi + b| <= 2 contains at least one sample. Deterministic in `seed`.
 */
NeuronPositions init_positions(int n_in, int n_hidden, const Signal& xi_sample, std::uint64_t seed);

/// Positions drawn without looking at any data: every weight and offset uniform in [-1, 1].
NeuronPositions random_positions(int n_in, int n_hidden, std::uint64_t seed);

/// Linear least-squares amplitudes for frozen positions (n_out x n_hidden).
Matrix fit_amplitudes(const StaticDataset& data, const Matrix& W_pos, const Vector& b_pos);

struct StaticFit {
  TanhNet net;
  double rmse = 0.0;
  double zero_rmse = 0.0;  ///< RMS of the targets, i.e. the zero net's RMSE
  int iterations = 0;
  LmStatus status = LmStatus::converged;
};

struct StaticFitOptions {
  int max_iter = 200;
  double rel_tol = 1e-9;
};

/**
 * Positions from init_positions, amplitudes by linear least squares, then
 * Levenberg-Marquardt on all network parameters.
 * Throws NonFiniteLossError (with the iteration index) if the loss blows up.
 */
StaticFit fit_static(const StaticDataset& data, int n_hidden, std::uint64_t seed,
                     const StaticFitOptions& options = {});

}  // namespace nlssinit
