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

#include "nlssinit/lti.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>

#include "nlssinit/error.hpp"
#include "nlssinit/levenberg_marquardt.hpp"

namespace nlssinit {

namespace {

std::string dims(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

LtiModel::LtiModel(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  check();
}

LtiModel LtiModel::zeros(int nx, int nu, int ny) {
  return LtiModel(Matrix::Zero(nx, nx), Matrix::Zero(nx, nu), Matrix::Zero(ny, nx), Matrix::Zero(ny, nu));
}

void LtiModel::check() const {
  if (A_.rows() != A_.cols()) throw DimensionError("LtiModel: A must be square, got " + dims(A_));
  if (B_.rows() != A_.rows())
    throw DimensionError("LtiModel: n_x mismatch, B is " + dims(B_) + " but A is " + dims(A_));
  if (C_.cols() != A_.rows())
    throw DimensionError("LtiModel: n_x mismatch, C is " + dims(C_) + " but A is " + dims(A_));
  if (D_.rows() != C_.rows())
    throw DimensionError("LtiModel: n_y mismatch, D is " + dims(D_) + " but C is " + dims(C_));
  if (D_.cols() != B_.cols())
    throw DimensionError("LtiModel: n_u mismatch, D is " + dims(D_) + " but B is " + dims(B_));
}

void LtiModel::set_A(Matrix A) {
  std::swap(A_, A);
  try {
    check();
  } catch (...) {
    std::swap(A_, A);
    throw;
  }
}

void LtiModel::set_B(Matrix B) {
  std::swap(B_, B);
  try {
    check();
  } catch (...) {
    std::swap(B_, B);
    throw;
  }
}

void LtiModel::set_C(Matrix C) {
  std::swap(C_, C);
  try {
    check();
  } catch (...) {
    std::swap(C_, C);
    throw;
  }
}

void LtiModel::set_D(Matrix D) {
  std::swap(D_, D);
  try {
    check();
  } catch (...) {
    std::swap(D_, D);
    throw;
  }
}

double LtiModel::spectral_radius() const {
  if (A_.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(A_, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<Matrix> LtiModel::markov_parameters(int count) const {
  std::vector<Matrix> out;
  if (count <= 0) return out;
  out.reserve(static_cast<std::size_t>(count));
  out.push_back(D_);
  Matrix AkB = B_;
  for (int k = 1; k < count; ++k) {
    out.push_back(C_ * AkB);
    AkB = A_ * AkB;
  }
  return out;
}

LtiModel LtiModel::transformed(const Matrix& T) const {
  if (T.rows() != nx() || T.cols() != nx())
    throw DimensionError("LtiModel::transformed: T is " + dims(T) + ", expected n_x=" + std::to_string(nx()));
  const Matrix Ti = T.inverse();
  return LtiModel(T * A_ * Ti, T * B_, C_ * Ti, D_);
}

std::string to_string(RecordRole role) {
  return role == RecordRole::estimation ? "estimation" : "validation";
}

void IoRecord::validate() const {
  if (u.rows() != y.rows())
    throw DimensionError("IoRecord: u has " + std::to_string(u.rows()) + " samples, y has " +
                         std::to_string(y.rows()));
  if (u.rows() < 2) throw InvalidArgument("IoRecord: need at least 2 samples");
  if (u.cols() < 1 || y.cols() < 1) throw DimensionError("IoRecord: n_u and n_y must be positive");
  if (!u.allFinite() || !y.allFinite()) throw InvalidArgument("IoRecord: non-finite sample");
  if (!(sample_period > 0.0) || !std::isfinite(sample_period))
    throw InvalidArgument("IoRecord: sample_period must be positive");
}

LtiSimulation simulate_lti(const LtiModel& model, const Signal& u, const Vector& x0) {
  if (u.cols() != model.nu())
    throw DimensionError("simulate_lti: input has " + std::to_string(u.cols()) + " channels, n_u=" +
                         std::to_string(model.nu()));
  if (x0.size() != model.nx())
    throw DimensionError("simulate_lti: x0 has length " + std::to_string(x0.size()) + ", n_x=" +
                         std::to_string(model.nx()));
  const Eigen::Index N = u.rows();
  LtiSimulation sim{Signal(N, model.ny()), Signal(N, model.nx())};
  Vector x = x0;
  for (Eigen::Index t = 0; t < N; ++t) {
    const auto ut = u.row(t).transpose();
    sim.x.row(t) = x.transpose();
    sim.y.row(t) = (model.C() * x + model.D() * ut).transpose();
    if (t + 1 < N) x = model.A() * x + model.B() * ut;
  }
  return sim;
}

LtiSimulation simulate_lti(const LtiModel& model, const Signal& u) {
  return simulate_lti(model, u, Vector::Zero(model.nx()));
}

double rmse(const Signal& y_hat, const Signal& y) {
  if (y_hat.rows() != y.rows())
    throw DimensionError("rmse: lengths differ (" + std::to_string(y_hat.rows()) + " vs " +
                         std::to_string(y.rows()) + ")");
  if (y_hat.cols() != y.cols())
    throw DimensionError("rmse: channel counts differ (" + std::to_string(y_hat.cols()) + " vs " +
                         std::to_string(y.cols()) + ")");
  if (y.rows() == 0) throw InvalidArgument("rmse: empty sequences");
  return std::sqrt((y - y_hat).squaredNorm() / static_cast<double>(y.rows()));
}

double rms(const Signal& y) {
  if (y.rows() == 0) throw InvalidArgument("rms: empty sequence");
  return std::sqrt(y.squaredNorm() / static_cast<double>(y.rows()));
}

// ---------------------------------------------------------------------------
// BLA estimation

namespace {

struct LinearLayout {
  int nx, nu, ny;
  int a() const { return 0; }
  int b() const { return nx * nx; }
  int c() const { return b() + nx * nu; }
  int d() const { return c() + ny * nx; }
  int x0() const { return d() + ny * nu; }
  int size() const { return x0() + nx; }
};

Vector pack_linear(const LtiModel& m, const Vector& x0) {
  const LinearLayout L{m.nx(), m.nu(), m.ny()};
  Vector th(L.size());
  th.segment(L.a(), m.A().size()) = m.A().reshaped();
  th.segment(L.b(), m.B().size()) = m.B().reshaped();
  th.segment(L.c(), m.C().size()) = m.C().reshaped();
  th.segment(L.d(), m.D().size()) = m.D().reshaped();
  th.segment(L.x0(), m.nx()) = x0;
  return th;
}

LtiModel unpack_linear(const Vector& th, const LinearLayout& L, Vector* x0) {
  LtiModel m(th.segment(L.a(), L.nx * L.nx).reshaped(L.nx, L.nx),
             th.segment(L.b(), L.nx * L.nu).reshaped(L.nx, L.nu),
             th.segment(L.c(), L.ny * L.nx).reshaped(L.ny, L.nx),
             th.segment(L.d(), L.ny * L.nu).reshaped(L.ny, L.nu));
  if (x0) *x0 = th.segment(L.x0(), L.nx);
  return m;
}

// Simulation-error residual and its Jacobian by forward sensitivities.
void linear_residual_jacobian(const Vector& th, const LinearLayout& L, const IoRecord& rec, Vector& r,
                              Matrix& J) {
  Vector x0;
  const LtiModel m = unpack_linear(th, L, &x0);
  const int N = rec.length();
  const int P = L.size();
  r.resize(static_cast<Eigen::Index>(N) * L.ny);
  J.setZero(static_cast<Eigen::Index>(N) * L.ny, P);
  Matrix S = Matrix::Zero(L.nx, P);
  S.block(0, L.x0(), L.nx, L.nx).setIdentity();
  Matrix S_next(L.nx, P);
  Vector x = x0;
  for (int t = 0; t < N; ++t) {
    const Vector ut = rec.u.row(t).transpose();
    const Eigen::Index row = static_cast<Eigen::Index>(t) * L.ny;
    r.segment(row, L.ny) = m.C() * x + m.D() * ut - rec.y.row(t).transpose();
    auto Jt = J.middleRows(row, L.ny);
    Jt.noalias() = m.C() * S;
    for (int j = 0; j < L.nx; ++j)
      for (int i = 0; i < L.ny; ++i) Jt(i, L.c() + i + j * L.ny) += x(j);
    for (int j = 0; j < L.nu; ++j)
      for (int i = 0; i < L.ny; ++i) Jt(i, L.d() + i + j * L.ny) += ut(j);
    if (t + 1 < N) {
      S_next.noalias() = m.A() * S;
      for (int j = 0; j < L.nx; ++j)
        for (int i = 0; i < L.nx; ++i) S_next(i, L.a() + i + j * L.nx) += x(j);
      for (int j = 0; j < L.nu; ++j)
        for (int i = 0; i < L.nx; ++i) S_next(i, L.b() + i + j * L.nx) += ut(j);
      S.swap(S_next);
      x = m.A() * x + m.B() * ut;
    }
  }
}

std::optional<Vector> linear_residual(const Vector& th, const LinearLayout& L, const IoRecord& rec) {
  Vector x0;
  const LtiModel m = unpack_linear(th, L, &x0);
  if (!m.is_stable()) return std::nullopt;
  const LtiSimulation sim = simulate_lti(m, rec.u, x0);
  if (!sim.y.allFinite()) return std::nullopt;
  Signal e = sim.y - rec.y;
  Vector r(e.size());
  // Row-major flattening matches the residual layout of linear_residual_jacobian.
  for (Eigen::Index t = 0; t < e.rows(); ++t) r.segment(t * e.cols(), e.cols()) = e.row(t).transpose();
  return r;
}

// Markov parameters h_0..h_{L-1} (each n_y x n_u) from a ridge-regularised FIR fit.
std::vector<Matrix> fir_markov(const IoRecord& rec, int taps, const BlaOptions& opt) {
  const int N = rec.length();
  const int nu = rec.nu();
  const int ny = rec.ny();
  const int rows = N - taps + 1;
  const int cols = taps * nu;
  if (rows <= cols)
    throw InvalidArgument("estimate_bla: record too short for " + std::to_string(taps) + " FIR taps");
  Matrix Phi(rows, cols);
  Matrix Y(rows, ny);
  for (int i = 0; i < rows; ++i) {
    const int t = i + taps - 1;
    for (int k = 0; k < taps; ++k) Phi.block(i, k * nu, 1, nu) = rec.u.row(t - k);
    Y.row(i) = rec.y.row(t);
  }
  if (Phi.squaredNorm() == 0.0) throw IllConditionedError("estimate_bla: input is identically zero");
  Matrix G = Matrix::Zero(cols, cols);
  G.selfadjointView<Eigen::Lower>().rankUpdate(Phi.transpose());
  G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
  G.diagonal().array() += opt.fir_ridge * G.diagonal().mean();
  const Matrix theta = G.llt().solve(Phi.transpose() * Y);
  std::vector<Matrix> h(static_cast<std::size_t>(taps));
  for (int k = 0; k < taps; ++k) h[static_cast<std::size_t>(k)] = theta.middleRows(k * nu, nu).transpose();
  return h;
}

// Ho-Kalman realization. When the shift-invariance estimate of A is unstable it is
// replaced by the zero-padded shift estimate, which has all eigenvalues inside the
// unit circle; `padded` reports that substitution.
LtiModel ho_kalman(const std::vector<Matrix>& h, int nx, double max_condition, bool* padded) {
  const int ny = static_cast<int>(h[0].rows());
  const int nu = static_cast<int>(h[0].cols());
  const int avail = static_cast<int>(h.size()) - 1;  // h_1..h_{L-1}
  const int r = std::min(avail / 2, 100);
  const int c = std::min(avail - r, 100);
  if (r < nx + 1 || c < nx) throw InvalidArgument("estimate_bla: not enough Markov parameters for n_x");
  Matrix H(r * ny, c * nu);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) H.block(i * ny, j * nu, ny, nu) = h[static_cast<std::size_t>(i + j + 1)];
  Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv(0) > 0.0 && !(sv(0) <= max_condition * sv(nx - 1))) {
    throw IllConditionedError("estimate_bla: Hankel singular value ratio sigma_1/sigma_" + std::to_string(nx) +
                              " = " + std::to_string(sv(0) / sv(nx - 1)) + " exceeds " +
                              std::to_string(max_condition) + "; try a lower n_x");
  }
  const Vector sq = sv.head(nx).cwiseSqrt();
  const Matrix O = svd.matrixU().leftCols(nx) * sq.asDiagonal();
  const Matrix K = sq.asDiagonal() * svd.matrixV().leftCols(nx).transpose();
  const Matrix O_up = O.topRows((r - 1) * ny);
  const Matrix O_down = O.bottomRows((r - 1) * ny);
  Matrix A = O_up.completeOrthogonalDecomposition().solve(O_down);
  *padded = false;
  if (Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
    Matrix O_pad = Matrix::Zero(r * ny, nx);
    O_pad.topRows((r - 1) * ny) = O_down;
    A = O.completeOrthogonalDecomposition().solve(O_pad);
    *padded = true;
  }
  return LtiModel(A, K.leftCols(nu), O.topRows(ny), h[0]);
}

// Radial projection of eigenvalues with |lambda| >= 1 onto the circle of radius `radius`.
Matrix project_stable(const Matrix& A, double radius) {
  Eigen::EigenSolver<Matrix> es(A);
  Eigen::VectorXcd lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (std::abs(lam(i)) >= radius) lam(i) *= radius / std::abs(lam(i));
  const Eigen::MatrixXcd V = es.eigenvectors();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
  if (lu.isInvertible() && lu.rcond() > 1e-10) {
    const Eigen::MatrixXcd Ac = V * lam.asDiagonal() * lu.inverse();
    const Matrix Ar = Ac.real();
    Eigen::EigenSolver<Matrix> check(Ar, false);
    if (check.eigenvalues().cwiseAbs().maxCoeff() < 1.0) return Ar;
  }
  // Defective or badly conditioned eigenbasis: uniform contraction.
  const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  return A * (radius / rho);
}

}  // namespace

BlaResult estimate_bla(const IoRecord& record, int nx, const BlaOptions& options) {
  record.validate();
  if (nx < 1) throw InvalidArgument("estimate_bla: n_x must be >= 1");
  const int N = record.length();
  if (N < 20 * nx)
    throw InvalidArgument("estimate_bla: N=" + std::to_string(N) + " < 20 n_x=" + std::to_string(20 * nx));

  const int taps = options.fir_taps > 0 ? options.fir_taps : std::min(4 * nx * 20, N / 4);
  const std::vector<Matrix> h = fir_markov(record, taps, options);
  BlaResult result;
  LtiModel model = ho_kalman(h, nx, options.max_condition, &result.stabilized);
  if (model.spectral_radius() >= 1.0) {
    model.set_A(project_stable(model.A(), options.stability_radius));
    result.stabilized = true;
  }
  if (!model.is_stable()) throw UnstableModelError("estimate_bla: realization still unstable after projection");

  const LinearLayout L{nx, record.nu(), record.ny()};
  LmProblem problem;
  problem.residual = [&](const Vector& th) { return linear_residual(th, L, record); };
  problem.residual_and_jacobian = [&](const Vector& th, Vector& r, Matrix& J) {
    linear_residual_jacobian(th, L, record, r, J);
  };
  problem.cost_scale = 1.0 / N;
  LmSettings lm;
  lm.max_iter = options.refine_iterations;
  lm.rel_tol = 1e-14;

  const LmResult fit = levenberg_marquardt(problem, pack_linear(model, Vector::Zero(nx)), lm);
  result.model = unpack_linear(fit.theta, L, &result.x0);
  if (!result.model.is_stable())
    throw UnstableModelError("estimate_bla: refined model is unstable (spectral radius " +
                             std::to_string(result.model.spectral_radius()) + ")");
  result.rmse_est = std::sqrt(fit.cost);
  return result;
}

}  // namespace nlssinit
