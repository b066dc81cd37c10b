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

#include "nlssinit/tanh_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "nlssinit/error.hpp"

namespace nlssinit {

TanhNet::TanhNet(int n_in, int n_out, int n_hidden)
    : n_in_(n_in),
      n_out_(n_out),
      W_pos_(Matrix::Zero(n_hidden, n_in)),
      b_pos_(Vector::Zero(n_hidden)),
      W_amp_(Matrix::Zero(n_out, n_hidden)) {
  check();
}

TanhNet::TanhNet(Matrix W_pos, Vector b_pos, Matrix W_amp)
    : n_in_(static_cast<int>(W_pos.cols())),
      n_out_(static_cast<int>(W_amp.rows())),
      W_pos_(std::move(W_pos)),
      b_pos_(std::move(b_pos)),
      W_amp_(std::move(W_amp)) {
  check();
}

void TanhNet::check() const {
  if (n_in_ < 0 || n_out_ < 0) throw DimensionError("TanhNet: negative dimension");
  if (b_pos_.size() != W_pos_.rows())
    throw DimensionError("TanhNet: b_pos has " + std::to_string(b_pos_.size()) + " entries, n_hidden=" +
                         std::to_string(W_pos_.rows()));
  if (W_amp_.cols() != W_pos_.rows())
    throw DimensionError("TanhNet: W_amp has " + std::to_string(W_amp_.cols()) + " columns, n_hidden=" +
                         std::to_string(W_pos_.rows()));
  if (W_pos_.cols() != n_in_) throw DimensionError("TanhNet: W_pos column count != n_in");
  if (W_amp_.rows() != n_out_) throw DimensionError("TanhNet: W_amp row count != n_out");
}

void TanhNet::check_input(const Vector& xi) const {
  if (xi.size() != n_in_)
    throw DimensionError("TanhNet: regressor has length " + std::to_string(xi.size()) + ", n_in=" +
                         std::to_string(n_in_));
}

void TanhNet::set_positions(Matrix W_pos, Vector b_pos) {
  if (W_pos.rows() != n_hidden() || W_pos.cols() != n_in_ || b_pos.size() != n_hidden())
    throw DimensionError("TanhNet::set_positions: shape mismatch");
  W_pos_ = std::move(W_pos);
  b_pos_ = std::move(b_pos);
}

void TanhNet::set_amplitudes(Matrix W_amp) {
  if (W_amp.rows() != n_out_ || W_amp.cols() != n_hidden())
    throw DimensionError("TanhNet::set_amplitudes: shape mismatch");
  W_amp_ = std::move(W_amp);
}

Vector TanhNet::parameters() const {
  const int h = n_hidden();
  Vector th(parameter_count());
  th.head(h * n_in_) = W_pos_.reshaped();
  th.segment(h * n_in_, h) = b_pos_;
  th.tail(h * n_out_) = W_amp_.reshaped();
  return th;
}

void TanhNet::set_parameters(const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != parameter_count())
    throw DimensionError("TanhNet::set_parameters: got " + std::to_string(theta.size()) + " values, expected " +
                         std::to_string(parameter_count()));
  const int h = n_hidden();
  W_pos_ = theta.head(h * n_in_).reshaped(h, n_in_);
  b_pos_ = theta.segment(h * n_in_, h);
  W_amp_ = theta.tail(h * n_out_).reshaped(n_out_, h);
}

Vector TanhNet::evaluate(const Vector& xi) const {
  check_input(xi);
  if (n_hidden() == 0) return Vector::Zero(n_out_);
  return W_amp_ * (W_pos_ * xi + b_pos_).array().tanh().matrix();
}

Vector TanhNet::evaluate(const Vector& xi, Matrix* d_input, Matrix* d_params) const {
  check_input(xi);
  Workspace ws;
  evaluate(xi, ws, d_input != nullptr || d_params != nullptr);
  if (d_input) *d_input = std::move(ws.d_input);
  if (d_params) *d_params = std::move(ws.d_params);
  return ws.out;
}

void TanhNet::evaluate(const Eigen::Ref<const Vector>& xi, Workspace& ws, bool jacobians) const {
  if (xi.size() != n_in_)
    throw DimensionError("TanhNet: regressor has length " + std::to_string(xi.size()) + ", n_in=" +
                         std::to_string(n_in_));
  const int h = n_hidden();
  ws.act.resize(h);
  ws.out.resize(n_out_);
  if (h == 0) {
    ws.out.setZero();
    if (jacobians) {
      ws.d_input.setZero(n_out_, n_in_);
      ws.d_params.resize(n_out_, 0);
    }
    return;
  }
  ws.act.noalias() = W_pos_ * xi;
  ws.act += b_pos_;
  ws.act = ws.act.array().tanh().matrix();
  ws.out.noalias() = W_amp_ * ws.act;
  if (!jacobians) return;

  ws.slope = (1.0 - ws.act.array().square()).matrix();
  ws.d_input.resize(n_out_, n_in_);
  ws.d_params.setZero(n_out_, parameter_count());
  // Amplitude-scaled slopes, reused for the input and position derivatives.
  auto g = ws.d_params.middleCols(h * n_in_, h);
  g.noalias() = W_amp_ * ws.slope.asDiagonal();
  ws.d_input.noalias() = g * W_pos_;
  for (int k = 0; k < n_in_; ++k) ws.d_params.middleCols(k * h, h) = g * xi(k);
  for (int j = 0; j < h; ++j)
    for (int o = 0; o < n_out_; ++o) ws.d_params(o, h * n_in_ + h + o + j * n_out_) = ws.act(j);
}

void StaticDataset::validate() const {
  if (xi.rows() != z.rows())
    throw DimensionError("StaticDataset: " + std::to_string(xi.rows()) + " regressors vs " +
                         std::to_string(z.rows()) + " targets");
  if (!xi.allFinite() || !z.allFinite()) throw InvalidArgument("StaticDataset: non-finite value");
}

NeuronPositions init_positions(int n_in, int n_hidden, const Signal& xi_sample, std::uint64_t seed) {
  if (xi_sample.rows() == 0) throw InvalidArgument("init_positions: empty sample");
  if (xi_sample.cols() != n_in)
    throw DimensionError("init_positions: sample has " + std::to_string(xi_sample.cols()) + " columns, n_in=" +
                         std::to_string(n_in));
  if (n_hidden < 0) throw InvalidArgument("init_positions: negative n_hidden");
  const Vector lo = xi_sample.colwise().minCoeff().transpose();
  const Vector hi = xi_sample.colwise().maxCoeff().transpose();
  const Vector half = 0.5 * (hi - lo);
  if ((half.array() <= 0.0).all())
    throw InvalidArgument("init_positions: degenerate sample, every regressor is constant");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> pick(0, xi_sample.rows() - 1);

  NeuronPositions pos{Matrix::Zero(n_hidden, n_in), Vector::Zero(n_hidden)};
  for (int i = 0; i < n_hidden; ++i) {
    for (int d = 0; d < n_in; ++d) {
      const double w = unit(rng);
      pos.W_pos(i, d) = half(d) > 0.0 ? w / half(d) : 0.0;
    }
    const Eigen::Index anchor = pick(rng);
    pos.b_pos(i) = -pos.W_pos.row(i).dot(xi_sample.row(anchor)) + unit(rng);
  }
  return pos;
}

NeuronPositions random_positions(int n_in, int n_hidden, std::uint64_t seed) {
  if (n_in < 1) throw InvalidArgument("random_positions: n_in must be >= 1");
  if (n_hidden < 0) throw InvalidArgument("random_positions: negative n_hidden");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NeuronPositions pos{Matrix(n_hidden, n_in), Vector(n_hidden)};
  for (int d = 0; d < n_in; ++d)
    for (int i = 0; i < n_hidden; ++i) pos.W_pos(i, d) = unit(rng);
  for (int i = 0; i < n_hidden; ++i) pos.b_pos(i) = unit(rng);
  return pos;
}

namespace {

Matrix hidden_outputs(const Signal& xi, const Matrix& W_pos, const Vector& b_pos) {
  Matrix act = xi * W_pos.transpose();
  act.rowwise() += b_pos.transpose();
  return act.array().tanh().matrix();
}

void static_residual_jacobian(const TanhNet& net, const StaticDataset& data, Vector& r, Matrix* J) {
  const Eigen::Index M = data.xi.rows();
  const int no = net.n_out();
  r.resize(M * no);
  if (J) J->resize(M * no, net.parameter_count());
  Matrix dp;
  for (Eigen::Index m = 0; m < M; ++m) {
    const Vector xi = data.xi.row(m).transpose();
    const Vector out = net.evaluate(xi, nullptr, J ? &dp : nullptr);
    r.segment(m * no, no) = out - data.z.row(m).transpose();
    if (J) J->middleRows(m * no, no) = dp;
  }
}

}  // namespace

Matrix fit_amplitudes(const StaticDataset& data, const Matrix& W_pos, const Vector& b_pos) {
  data.validate();
  if (W_pos.rows() == 0) return Matrix::Zero(data.z.cols(), 0);
  const Matrix H = hidden_outputs(data.xi, W_pos, b_pos);
  const Matrix Wt = H.completeOrthogonalDecomposition().solve(data.z);
  return Wt.transpose();
}

StaticFit fit_static(const StaticDataset& data, int n_hidden, std::uint64_t seed, const StaticFitOptions& options) {
  data.validate();
  if (n_hidden < 0) throw InvalidArgument("fit_static: negative n_hidden");
  const int n_in = static_cast<int>(data.xi.cols());
  const int n_out = static_cast<int>(data.z.cols());
  const Eigen::Index M = data.xi.rows();
  if (M == 0) throw InvalidArgument("fit_static: empty dataset");

  StaticFit fit;
  fit.zero_rmse = std::sqrt(data.z.squaredNorm() / static_cast<double>(M));
  fit.net = TanhNet(n_in, n_out, n_hidden);
  if (n_hidden == 0) {
    fit.rmse = fit.zero_rmse;
    return fit;
  }
  const int P = n_hidden * (n_in + 1 + n_out);
  if (M * n_out <= P)
    throw InvalidArgument("fit_static: " + std::to_string(M * n_out) + " residuals for " + std::to_string(P) +
                          " parameters; need an overdetermined problem");

  const NeuronPositions pos = init_positions(n_in, n_hidden, data.xi, seed);
  fit.net.set_positions(pos.W_pos, pos.b_pos);
  fit.net.set_amplitudes(fit_amplitudes(data, pos.W_pos, pos.b_pos));

  TanhNet work = fit.net;
  LmProblem problem;
  problem.residual = [&](const Vector& th) -> std::optional<Vector> {
    work.set_parameters(th);
    Vector r;
    static_residual_jacobian(work, data, r, nullptr);
    return r;
  };
  problem.residual_and_jacobian = [&](const Vector& th, Vector& r, Matrix& J) {
    work.set_parameters(th);
    static_residual_jacobian(work, data, r, &J);
  };
  problem.cost_scale = 1.0 / static_cast<double>(M);
  LmSettings lm;
  lm.max_iter = options.max_iter;
  lm.rel_tol = options.rel_tol;

  const LmResult res = levenberg_marquardt(problem, fit.net.parameters(), lm);
  fit.net.set_parameters(res.theta);
  fit.rmse = std::sqrt(res.cost);
  fit.iterations = res.iterations;
  fit.status = res.status;
  return fit;
}

}  // namespace nlssinit
