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

#include "nlssinit/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlssinit/error.hpp"

namespace nlssinit {

std::string to_string(LmStatus status) {
  switch (status) {
    case LmStatus::converged:
      return "converged";
    case LmStatus::max_iterations:
      return "max_iterations";
    case LmStatus::stalled:
      return "stalled";
  }
  return "unknown";
}

namespace {

constexpr double kMinDamping = 1e-12;

std::vector<int> free_indices(const LmProblem& problem, Eigen::Index n) {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (problem.free.empty() || problem.free[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

LmResult levenberg_marquardt(const LmProblem& problem, const Vector& theta0,
                             const LmSettings& settings) {
  if (!problem.free.empty() && problem.free.size() != static_cast<std::size_t>(theta0.size())) {
    throw DimensionError("levenberg_marquardt: free mask length " + std::to_string(problem.free.size()) +
                         " != parameter count " + std::to_string(theta0.size()));
  }
  const std::vector<int> idx = free_indices(problem, theta0.size());
  const Eigen::Index nfree = static_cast<Eigen::Index>(idx.size());

  LmResult result;
  result.theta = theta0;

  Vector r;
  Matrix J;
  problem.residual_and_jacobian(result.theta, r, J);
  if (!all_finite(r)) throw NonFiniteLossError("levenberg_marquardt: non-finite residual at start point", 0);
  double cost = r.squaredNorm();
  result.initial_cost = cost * problem.cost_scale;
  result.cost = result.initial_cost;

  if (nfree == 0 || cost == 0.0) {
    result.status = LmStatus::converged;
    return result;
  }

  Matrix Jf(J.rows(), nfree);
  Matrix H(nfree, nfree);
  Vector g(nfree);
  double scale0 = -1.0;
  double mu = settings.initial_damping;

  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    result.iterations = iter;
    for (Eigen::Index k = 0; k < nfree; ++k) Jf.col(k) = J.col(idx[static_cast<std::size_t>(k)]);
    H.setZero();
    H.selfadjointView<Eigen::Lower>().rankUpdate(Jf.transpose());
    H.triangularView<Eigen::StrictlyUpper>() = H.transpose();
    g.noalias() = Jf.transpose() * r;
    if (scale0 < 0.0) {
      scale0 = H.diagonal().mean();
      if (!(scale0 > 0.0)) scale0 = 1.0;
    }
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      result.status = LmStatus::converged;
      return result;
    }

    while (true) {
      Matrix M = H;
      M.diagonal().array() += mu * scale0;
      Vector step;
      Eigen::LLT<Matrix> llt(M);
      if (llt.info() == Eigen::Success) {
        step = llt.solve(-g);
      } else {
        step = M.ldlt().solve(-g);
      }

      Vector trial = result.theta;
      for (Eigen::Index k = 0; k < nfree; ++k) trial(idx[static_cast<std::size_t>(k)]) += step(k);

      std::optional<Vector> r_trial;
      if (step.allFinite()) r_trial = problem.residual(trial);
      bool accepted = false;
      double trial_cost = std::numeric_limits<double>::infinity();
      if (r_trial) {
        if (r_trial->hasNaN()) throw NonFiniteLossError("levenberg_marquardt: NaN residual", iter);
        trial_cost = r_trial->squaredNorm();
        accepted = std::isfinite(trial_cost) && trial_cost < cost;
      }
      result.trace.push_back({iter, (accepted ? trial_cost : cost) * problem.cost_scale, mu, accepted});

      if (accepted) {
        const double decrease = (cost - trial_cost) / cost;
        const double step_norm = step.norm();
        const double theta_norm = result.theta.norm();
        result.theta = std::move(trial);
        cost = trial_cost;
        result.cost = cost * problem.cost_scale;
        ++result.accepted_steps;
        mu = std::max(mu / settings.damping_factor, kMinDamping);
        if (cost == 0.0 || decrease < settings.rel_tol ||
            step_norm <= settings.step_tol * (theta_norm + settings.step_tol)) {
          result.status = LmStatus::converged;
          return result;
        }
        problem.residual_and_jacobian(result.theta, r, J);
        break;
      }
      // Rejected although the local model promises almost nothing: the iterate
      // is stationary to working precision.
      const double predicted = -(2.0 * g.dot(step) + step.dot(H * step));
      if (step.allFinite() && predicted <= settings.rel_tol * cost) {
        result.status = LmStatus::converged;
        return result;
      }
      mu *= settings.damping_factor;
      if (mu > settings.max_damping) {
        result.status = LmStatus::stalled;
        return result;
      }
    }
  }
  result.status = LmStatus::max_iterations;
  return result;
}

}  // namespace nlssinit
