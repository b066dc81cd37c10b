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

#include <doctest.h>

#include <cmath>
#include <limits>

#include "nlssinit/error.hpp"
#include "nlssinit/levenberg_marquardt.hpp"

using namespace nlssinit;

namespace {

// Rosenbrock as residuals r = (10 (t1 - t0^2), 1 - t0).
LmProblem rosenbrock() {
  LmProblem p;
  p.residual = [](const Vector& t) -> std::optional<Vector> {
    Vector r(2);
    r << 10.0 * (t(1) - t(0) * t(0)), 1.0 - t(0);
    return r;
  };
  p.residual_and_jacobian = [](const Vector& t, Vector& r, Matrix& J) {
    r.resize(2);
    r << 10.0 * (t(1) - t(0) * t(0)), 1.0 - t(0);
    J.resize(2, 2);
    J << -20.0 * t(0), 10.0, -1.0, 0.0;
  };
  return p;
}

}  // namespace

TEST_CASE("minimizes the Rosenbrock function") {
  Vector t0(2);
  t0 << -1.2, 1.0;
  const LmResult res = levenberg_marquardt(rosenbrock(), t0, LmSettings{});
  CHECK(res.status == LmStatus::converged);
  CHECK(res.theta(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.theta(1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.cost < 1e-12);
  CHECK(res.initial_cost == doctest::Approx(24.2));
}

TEST_CASE("accepted costs never increase and rejected trials keep the iterate") {
  Vector t0(2);
  t0 << -1.2, 1.0;
  const LmResult res = levenberg_marquardt(rosenbrock(), t0, LmSettings{});
  double last = res.initial_cost;
  int rejected = 0;
  for (const LmTracePoint& p : res.trace) {
    if (p.accepted) {
      CHECK(p.cost < last);
      last = p.cost;
    } else {
      CHECK(p.cost == last);
      ++rejected;
    }
  }
  CHECK(res.accepted_steps + rejected == static_cast<int>(res.trace.size()));
}

TEST_CASE("damping schedule") {
  Vector t0(2);
  t0 << -1.2, 1.0;
  LmSettings s;
  s.max_iter = 30;
  const LmResult res = levenberg_marquardt(rosenbrock(), t0, s);
  REQUIRE(res.trace.size() > 2);
  CHECK(res.trace[0].damping == s.initial_damping);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    const double prev = res.trace[i - 1].damping;
    const double expected = res.trace[i - 1].accepted ? std::max(prev / 10.0, 1e-12) : prev * 10.0;
    CHECK(res.trace[i].damping == doctest::Approx(expected));
  }
}

TEST_CASE("inadmissible trial points are rejected") {
  LmProblem p = rosenbrock();
  // Forbid t0 > 0.5: the optimizer has to stop short of the true minimum.
  auto base = p.residual;
  p.residual = [base](const Vector& t) -> std::optional<Vector> {
    if (t(0) > 0.5) return std::nullopt;
    return base(t);
  };
  Vector t0(2);
  t0 << -1.2, 1.0;
  const LmResult res = levenberg_marquardt(p, t0, LmSettings{});
  CHECK(res.theta(0) <= 0.5);
  CHECK(res.cost < res.initial_cost);
}

TEST_CASE("NaN residual raises NonFiniteLossError") {
  LmProblem p = rosenbrock();
  p.residual = [](const Vector&) -> std::optional<Vector> {
    return Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
  };
  Vector t0(2);
  t0 << -1.2, 1.0;
  try {
    levenberg_marquardt(p, t0, LmSettings{});
    FAIL("expected NonFiniteLossError");
  } catch (const NonFiniteLossError& e) {
    CHECK(e.iteration() == 1);
  }
}

TEST_CASE("fixed parameters stay put") {
  LmProblem p = rosenbrock();
  p.free = {false, true};
  Vector t0(2);
  t0 << 0.3, 5.0;
  const LmResult res = levenberg_marquardt(p, t0, LmSettings{});
  CHECK(res.theta(0) == 0.3);
  CHECK(res.theta(1) == doctest::Approx(0.09).epsilon(1e-8));
  p.free = {true};
  CHECK_THROWS_AS(levenberg_marquardt(p, t0, LmSettings{}), DimensionError);
}

TEST_CASE("linear least squares converges in a few iterations") {
  const Matrix A = (Matrix(4, 2) << 1, 0, 1, 1, 1, 2, 1, 3).finished();
  const Vector b = (Vector(4) << 1.0, 2.9, 5.1, 7.0).finished();
  LmProblem p;
  p.residual = [&](const Vector& t) -> std::optional<Vector> { return Vector(A * t - b); };
  p.residual_and_jacobian = [&](const Vector& t, Vector& r, Matrix& J) {
    r = A * t - b;
    J = A;
  };
  const LmResult res = levenberg_marquardt(p, Vector::Zero(2), LmSettings{});
  const Vector direct = A.colPivHouseholderQr().solve(b);
  CHECK(res.iterations <= 3);
  CHECK((res.theta - direct).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cost_scale multiplies reported costs") {
  LmProblem p = rosenbrock();
  p.cost_scale = 0.5;
  Vector t0(2);
  t0 << -1.2, 1.0;
  const LmResult res = levenberg_marquardt(p, t0, LmSettings{});
  CHECK(res.initial_cost == doctest::Approx(12.1));
}
