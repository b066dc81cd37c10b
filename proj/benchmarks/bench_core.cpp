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


#include <benchmark/benchmark.h>

#include <random>

#include "nlssinit/lti.hpp"
#include "nlssinit/nlss.hpp"
#include "nlssinit/state_estimator.hpp"
#include "nlssinit/tanh_net.hpp"

namespace {

using namespace nlssinit;

Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

LtiModel stable_model(std::mt19937_64& rng, int nx) {
  Matrix A = gaussian(rng, nx, nx);
  A *= 0.8 / LtiModel(A, Matrix::Zero(nx, 1), Matrix::Zero(1, nx), Matrix::Zero(1, 1)).spectral_radius();
  return LtiModel(A, gaussian(rng, nx, 1), gaussian(rng, 1, nx), gaussian(rng, 1, 1));
}

NlssModel nlss_model(int nx, int n) {
  std::mt19937_64 rng(5);
  NlssModel m;
  m.lin = stable_model(rng, nx);
  m.f_nl = TanhNet(gaussian(rng, n, nx + 1, 0.5), gaussian(rng, n, 1, 0.5).col(0), gaussian(rng, nx, n, 0.05));
  m.g_nl = TanhNet(gaussian(rng, n, nx + 1, 0.5), gaussian(rng, n, 1, 0.5).col(0), gaussian(rng, 1, n, 0.3));
  m.x0 = Vector::Zero(nx);
  return m;
}

// Args: N, n_x.
void BM_EstimateState(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const int nx = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  const LtiModel m = stable_model(rng, nx);
  IoRecord rec;
  rec.u = gaussian(rng, N, 1);
  rec.y = simulate_lti(m, rec.u).y + gaussian(rng, N, 1, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_state(rec, m, 0.1));
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_EstimateState)->Args({2500, 6})->Args({10000, 6})->Args({2500, 2})->Unit(benchmark::kMillisecond);

// Args: N, n_x, neurons per net.
void BM_SimulateNlss(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const NlssModel m = nlss_model(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  std::mt19937_64 rng(2);
  const Signal u = gaussian(rng, N, 1);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_nlss(m, u));
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_SimulateNlss)->Args({2500, 6, 3})->Args({10000, 6, 3})->Unit(benchmark::kMicrosecond);

void BM_SimulateNlssJacobian(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  const NlssModel m = nlss_model(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  std::mt19937_64 rng(3);
  const Signal u = gaussian(rng, N, 1);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_nlss_jacobian(m, u));
  state.SetItemsProcessed(state.iterations() * N);
}
BENCHMARK(BM_SimulateNlssJacobian)->Args({2500, 6, 3})->Args({2500, 2, 2})->Unit(benchmark::kMillisecond);

void BM_FitStatic(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(4);
  const TanhNet teacher(gaussian(rng, 3, 7, 0.5), gaussian(rng, 3, 1, 0.5).col(0), gaussian(rng, 6, 3));
  StaticDataset data;
  data.xi = gaussian(rng, 2500, 7);
  data.z.resize(2500, 6);
  for (Eigen::Index t = 0; t < data.xi.rows(); ++t)
    data.z.row(t) = teacher.evaluate(Vector(data.xi.row(t).transpose())).transpose();
  StaticFitOptions opt;
  opt.max_iter = 20;
  for (auto _ : state) benchmark::DoNotOptimize(fit_static(data, n, 1, opt));
}
BENCHMARK(BM_FitStatic)->Arg(3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
