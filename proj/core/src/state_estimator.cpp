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

#include "nlssinit/state_estimator.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "nlssinit/error.hpp"

namespace nlssinit {

namespace {

void check_inputs(const IoRecord& record, const LtiModel& model, double lambda) {
  record.validate();
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("estimate_state: lambda must be positive");
  if (record.nu() != model.nu())
    throw DimensionError("estimate_state: record has n_u=" + std::to_string(record.nu()) + ", model n_u=" +
                         std::to_string(model.nu()));
  if (record.ny() != model.ny())
    throw DimensionError("estimate_state: record has n_y=" + std::to_string(record.ny()) + ", model n_y=" +
                         std::to_string(model.ny()));
  if (model.nx() < 1) throw DimensionError("estimate_state: model has n_x=0");
}

// Block Thomas sweep on the normal equations, in long double.
// Returns false on a non positive definite pivot.
bool solve_block_tridiagonal(const IoRecord& rec, const LtiModel& m, double lambda, double ridge, Signal& x) {
  using S = long double;
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const int N = rec.length();
  const int nx = m.nx();
  const S lam = lambda;
  const Mat A = m.A().cast<S>();
  const Mat B = m.B().cast<S>();
  const Mat C = m.C().cast<S>();
  const Mat D = m.D().cast<S>();
  const Mat CtC = C.transpose() * C;
  const Mat AtA = A.transpose() * A;
  const Mat U = -lam * A.transpose();  // off-diagonal block between t and t+1; U' below

  std::vector<Eigen::LLT<Mat>> piv(static_cast<std::size_t>(N));
  std::vector<Vec> g(static_cast<std::size_t>(N));
  Mat Sinv_U;  // S_{t-1}^{-1} U
  Vec Sinv_g;  // S_{t-1}^{-1} g_{t-1}

  Vec bu_prev;
  for (int t = 0; t < N; ++t) {
    const Vec ut = rec.u.row(t).transpose().cast<S>();
    const Vec rt = rec.y.row(t).transpose().cast<S>() - D * ut;
    const Vec bt = B * ut;

    Mat St = CtC;
    St.diagonal().array() += S(ridge);
    Vec rhs = C.transpose() * rt;
    if (t + 1 < N) {
      St += lam * AtA;
      rhs -= lam * (A.transpose() * bt);
    }
    if (t > 0) {
      St.diagonal().array() += lam;
      rhs += lam * bu_prev;
      St -= U.transpose() * Sinv_U;
      rhs -= U.transpose() * Sinv_g;
    }
    auto& llt = piv[static_cast<std::size_t>(t)];
    llt.compute(St);
    if (llt.info() != Eigen::Success) return false;
    const Vec diag = llt.matrixLLT().diagonal();
    if ((diag.array() <= S(0)).any() || !diag.allFinite()) return false;
    g[static_cast<std::size_t>(t)] = rhs;
    if (t + 1 < N) {
      Sinv_U = llt.solve(U);
      Sinv_g = llt.solve(rhs);
    }
    bu_prev = bt;
  }

  x.resize(N, nx);
  Vec next = piv[static_cast<std::size_t>(N - 1)].solve(g[static_cast<std::size_t>(N - 1)]);
  x.row(N - 1) = next.transpose().cast<double>();
  for (int t = N - 2; t >= 0; --t) {
    next = piv[static_cast<std::size_t>(t)].solve(g[static_cast<std::size_t>(t)] - U * next);
    x.row(t) = next.transpose().cast<double>();
  }
  return x.allFinite();
}

}  // namespace

TradeoffCosts tradeoff_costs(const IoRecord& record, const LtiModel& model, const Signal& x) {
  if (x.rows() != record.length() || x.cols() != model.nx())
    throw DimensionError("tradeoff_costs: trajectory is " + std::to_string(x.rows()) + "x" +
                         std::to_string(x.cols()) + ", expected " + std::to_string(record.length()) + "x" +
                         std::to_string(model.nx()));
  TradeoffCosts c;
  const int N = record.length();
  for (int t = 0; t < N; ++t) {
    const Vector xt = x.row(t).transpose();
    const Vector ut = record.u.row(t).transpose();
    c.e_y += (record.y.row(t).transpose() - model.C() * xt - model.D() * ut).squaredNorm();
    if (t + 1 < N) c.e_x += (x.row(t + 1).transpose() - model.A() * xt - model.B() * ut).squaredNorm();
  }
  return c;
}

StateTrajectory estimate_state(const IoRecord& record, const LtiModel& model, double lambda) {
  check_inputs(record, model, lambda);
  StateTrajectory traj;
  traj.lambda = lambda;
  if (!solve_block_tridiagonal(record, model, lambda, 0.0, traj.x)) {
    const Matrix CtC = model.C().transpose() * model.C();
    const Matrix AtA = model.A().transpose() * model.A();
    const double scale = (CtC.trace() + lambda * (AtA.trace() + model.nx())) / model.nx();
    traj.ridge = 1e-10 * (scale > 0.0 ? scale : 1.0);
    traj.ridge_used = true;
    if (!solve_block_tridiagonal(record, model, lambda, traj.ridge, traj.x)) {
      std::ostringstream os;
      os << "estimate_state: singular normal equations at lambda=" << lambda
         << " even with ridge " << traj.ridge << "; increase lambda";
      throw SingularSystemError(os.str());
    }
  }
  const TradeoffCosts c = tradeoff_costs(record, model, traj.x);
  traj.e_y = c.e_y;
  traj.e_x = c.e_x;
  return traj;
}

std::vector<LambdaCostRow> lambda_grid_costs(const IoRecord& record, const LtiModel& model,
                                             const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw InvalidArgument("lambda_grid_costs: empty lambda list");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("lambda_grid_costs: lambdas must be positive");
  std::vector<LambdaCostRow> rows;
  rows.reserve(lambdas.size());
  for (double l : lambdas) {
    StateTrajectory traj;
    try {
      traj = estimate_state(record, model, l);
    } catch (const SingularSystemError& e) {
      std::ostringstream os;
      os << "lambda=" << l << ": " << e.what();
      throw SingularSystemError(os.str());
    }
    const double total = traj.e_y + traj.e_x;
    rows.push_back({l, traj.e_y, traj.e_x, total > 0.0 ? traj.e_y / total : 0.0});
  }
  return rows;
}

}  // namespace nlssinit
