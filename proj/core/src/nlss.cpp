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

#include "nlssinit/nlss.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "nlssinit/error.hpp"

namespace nlssinit {

NlssModel NlssModel::from_linear(const LtiModel& lin, int n_f, int n_g, Vector x0) {
  NlssModel m;
  m.lin = lin;
  const int n_in = lin.nx() + lin.nu();
  m.f_nl = TanhNet(n_in, lin.nx(), n_f);
  m.g_nl = TanhNet(n_in, lin.ny(), n_g);
  m.x0 = x0.size() == 0 ? Vector::Zero(lin.nx()) : std::move(x0);
  m.validate();
  return m;
}

void NlssModel::validate() const {
  const int n_in = nx() + nu();
  if (f_nl.n_in() != n_in || f_nl.n_out() != nx())
    throw DimensionError("NlssModel: f_nl is " + std::to_string(f_nl.n_in()) + "->" + std::to_string(f_nl.n_out()) +
                         ", expected " + std::to_string(n_in) + "->" + std::to_string(nx()));
  if (g_nl.n_in() != n_in || g_nl.n_out() != ny())
    throw DimensionError("NlssModel: g_nl is " + std::to_string(g_nl.n_in()) + "->" + std::to_string(g_nl.n_out()) +
                         ", expected " + std::to_string(n_in) + "->" + std::to_string(ny()));
  if (x0.size() != nx())
    throw DimensionError("NlssModel: x0 has length " + std::to_string(x0.size()) + ", n_x=" + std::to_string(nx()));
}

NlssDims NlssDims::of(const NlssModel& m) {
  return NlssDims{m.nx(), m.nu(), m.ny(), m.f_nl.n_hidden(), m.g_nl.n_hidden()};
}

ThetaLayout::ThetaLayout(const NlssDims& d) {
  const int n_in = d.nx + d.nu;
  const int len[7] = {d.nx * d.nx, d.nx * d.nu, d.ny * d.nx, d.ny * d.nu, d.nf * (n_in + 1 + d.nx),
                      d.ng * (n_in + 1 + d.ny), d.nx};
  offsets_[0] = 0;
  for (int i = 0; i < 7; ++i) offsets_[i + 1] = offsets_[i] + len[i];
}

int ThetaLayout::offset(ParamBlock b) const { return offsets_[static_cast<int>(b)]; }

int ThetaLayout::length(ParamBlock b) const {
  const int i = static_cast<int>(b);
  return offsets_[i + 1] - offsets_[i];
}

Vector pack_theta(const NlssModel& model) {
  model.validate();
  const ThetaLayout L(NlssDims::of(model));
  Vector th(L.size());
  th.segment(L.offset(ParamBlock::A), L.length(ParamBlock::A)) = model.lin.A().reshaped();
  th.segment(L.offset(ParamBlock::B), L.length(ParamBlock::B)) = model.lin.B().reshaped();
  th.segment(L.offset(ParamBlock::C), L.length(ParamBlock::C)) = model.lin.C().reshaped();
  th.segment(L.offset(ParamBlock::D), L.length(ParamBlock::D)) = model.lin.D().reshaped();
  th.segment(L.offset(ParamBlock::f_nl), L.length(ParamBlock::f_nl)) = model.f_nl.parameters();
  th.segment(L.offset(ParamBlock::g_nl), L.length(ParamBlock::g_nl)) = model.g_nl.parameters();
  th.segment(L.offset(ParamBlock::x0), L.length(ParamBlock::x0)) = model.x0;
  return th;
}

NlssModel unpack_theta(const Vector& theta, const NlssDims& d) {
  if (d.nx < 0 || d.nu < 1 || d.ny < 1 || d.nf < 0 || d.ng < 0) throw DimensionError("unpack_theta: invalid dims");
  const ThetaLayout L(d);
  if (theta.size() != L.size())
    throw DimensionError("unpack_theta: theta has " + std::to_string(theta.size()) + " entries, expected " +
                         std::to_string(L.size()));
  auto seg = [&](ParamBlock b) { return theta.segment(L.offset(b), L.length(b)); };
  NlssModel m;
  m.lin = LtiModel(seg(ParamBlock::A).reshaped(d.nx, d.nx), seg(ParamBlock::B).reshaped(d.nx, d.nu),
                   seg(ParamBlock::C).reshaped(d.ny, d.nx), seg(ParamBlock::D).reshaped(d.ny, d.nu));
  m.f_nl = TanhNet(d.nx + d.nu, d.nx, d.nf);
  m.f_nl.set_parameters(seg(ParamBlock::f_nl));
  m.g_nl = TanhNet(d.nx + d.nu, d.ny, d.ng);
  m.g_nl.set_parameters(seg(ParamBlock::g_nl));
  m.x0 = seg(ParamBlock::x0);
  return m;
}

std::vector<bool> free_mask(const NlssDims& dims, std::initializer_list<ParamBlock> blocks) {
  const ThetaLayout L(dims);
  std::vector<bool> mask(static_cast<std::size_t>(L.size()), false);
  for (ParamBlock b : blocks)
    for (int i = 0; i < L.length(b); ++i) mask[static_cast<std::size_t>(L.offset(b) + i)] = true;
  return mask;
}

namespace {

void check_input(const NlssModel& model, const Signal& u) {
  model.validate();
  if (u.cols() != model.nu())
    throw DimensionError("simulate_nlss: input has " + std::to_string(u.cols()) + " channels, n_u=" +
                         std::to_string(model.nu()));
}

double divergence_bound(const Signal& u) {
  const double scale = u.size() > 0 ? std::max(1.0, u.cwiseAbs().maxCoeff()) : 1.0;
  return kDivergenceFactor * scale;
}

void guard(const Vector& x, double bound, std::size_t step) {
  if (!x.allFinite() || x.norm() > bound)
    throw DivergenceError("simulate_nlss: state diverged at t=" + std::to_string(step), step);
}

}  // namespace

NlssSimulation simulate_nlss(const NlssModel& model, const Signal& u) {
  check_input(model, u);
  const Eigen::Index N = u.rows();
  const int nx = model.nx();
  const int nu = model.nu();
  const double bound = divergence_bound(u);
  NlssSimulation sim{Signal(N, model.ny()), Signal(N, nx)};
  Vector x = model.x0;
  Vector x_next(nx);
  Vector xi(nx + nu);
  TanhNet::Workspace fw, gw;
  for (Eigen::Index t = 0; t < N; ++t) {
    guard(x, bound, static_cast<std::size_t>(t + 1));
    xi.head(nx) = x;
    xi.tail(nu) = u.row(t).transpose();
    const auto ut = xi.tail(nu);
    sim.x.row(t) = x.transpose();
    model.g_nl.evaluate(xi, gw, false);
    auto yt = sim.y.row(t).transpose();
    yt.noalias() = model.lin.C() * x;
    yt.noalias() += model.lin.D() * ut;
    yt += gw.out;
    if (t + 1 < N) {
      model.f_nl.evaluate(xi, fw, false);
      x_next.noalias() = model.lin.A() * x;
      x_next.noalias() += model.lin.B() * ut;
      x_next += fw.out;
      x.swap(x_next);
    }
  }
  return sim;
}

std::optional<Vector> rest_state(const NlssModel& model, const Vector& u_rest, int max_steps) {
  model.validate();
  if (u_rest.size() != model.nu()) throw DimensionError("rest_state: input length does not match n_u");
  const int nx = model.nx();
  Vector xi(nx + model.nu());
  xi.head(nx).setZero();
  xi.tail(model.nu()) = u_rest;
  const Vector Bu = model.lin.B() * u_rest;
  Vector x_next(nx);
  TanhNet::Workspace fw;
  for (int k = 0; k < max_steps; ++k) {
    const auto x = xi.head(nx);
    model.f_nl.evaluate(xi, fw, false);
    x_next.noalias() = model.lin.A() * x;
    x_next += Bu + fw.out;
    if (!x_next.allFinite()) return std::nullopt;
    const double change = (x_next - x).stableNorm();
    xi.head(nx) = x_next;
    if (change <= 1e-12 * (1.0 + x_next.stableNorm())) return Vector(xi.head(nx));
  }
  return std::nullopt;
}

NlssJacobian simulate_nlss_jacobian(const NlssModel& model, const Signal& u) {
  check_input(model, u);
  const NlssDims d = NlssDims::of(model);
  const ThetaLayout L(d);
  const Eigen::Index N = u.rows();
  const int P = L.size();
  const double bound = divergence_bound(u);
  const Matrix& A = model.lin.A();
  const Matrix& B = model.lin.B();
  const Matrix& C = model.lin.C();
  const Matrix& D = model.lin.D();
  const int oA = L.offset(ParamBlock::A), oC = L.offset(ParamBlock::C),
            oD = L.offset(ParamBlock::D), oF = L.offset(ParamBlock::f_nl), oG = L.offset(ParamBlock::g_nl);
  const int pF = L.length(ParamBlock::f_nl), pG = L.length(ParamBlock::g_nl);

  NlssJacobian out{Signal(N, d.ny), Matrix()};
  // Built transposed so each time step fills contiguous columns.
  Matrix JT = Matrix::Zero(P, N * d.ny);
  // The state sensitivity is kept only for the parameters that reach the state:
  // [A B] (contiguous), f_nl and x0, stored side by side in that order.
  const int pAB = d.nx * (d.nx + d.nu);
  const int sF = pAB, sX = pAB + pF;
  const int Ps = sX + d.nx;
  const int oX = L.offset(ParamBlock::x0);
  Matrix S = Matrix::Zero(d.nx, Ps);
  S.rightCols(d.nx).setIdentity();
  Matrix S_next(d.nx, Ps);
  Matrix A_eff(d.nx, d.nx), C_eff(d.ny, d.nx);
  Matrix Js(Ps, d.ny);
  Vector x = model.x0;
  Vector x_next(d.nx);
  Vector xi(d.nx + d.nu);
  TanhNet::Workspace fw, gw;
  for (Eigen::Index t = 0; t < N; ++t) {
    guard(x, bound, static_cast<std::size_t>(t + 1));
    xi.head(d.nx) = x;
    xi.tail(d.nu) = u.row(t).transpose();
    const auto ut = xi.tail(d.nu);
    model.g_nl.evaluate(xi, gw, true);
    auto yt = out.y.row(t).transpose();
    yt.noalias() = C * x;
    yt.noalias() += D * ut;
    yt += gw.out;

    auto Jt = JT.middleCols(t * d.ny, d.ny);
    C_eff = C;
    C_eff += gw.d_input.leftCols(d.nx);
    Js.noalias() = S.transpose() * C_eff.transpose();
    Jt.middleRows(oA, pAB) = Js.topRows(pAB);
    if (pF > 0) Jt.middleRows(oF, pF) = Js.middleRows(sF, pF);
    Jt.middleRows(oX, d.nx) = Js.bottomRows(d.nx);
    for (int j = 0; j < d.nx; ++j)
      for (int i = 0; i < d.ny; ++i) Jt(oC + i + j * d.ny, i) = x(j);
    for (int j = 0; j < d.nu; ++j)
      for (int i = 0; i < d.ny; ++i) Jt(oD + i + j * d.ny, i) = ut(j);
    if (pG > 0) Jt.middleRows(oG, pG) = gw.d_params.transpose();

    if (t + 1 < N) {
      model.f_nl.evaluate(xi, fw, true);
      A_eff = A;
      A_eff += fw.d_input.leftCols(d.nx);
      S_next.noalias() = A_eff * S;
      for (int j = 0; j < d.nx; ++j)
        for (int i = 0; i < d.nx; ++i) S_next(i, i + j * d.nx) += x(j);
      for (int j = 0; j < d.nu; ++j)
        for (int i = 0; i < d.nx; ++i) S_next(i, d.nx * d.nx + i + j * d.nx) += ut(j);
      if (pF > 0) S_next.middleCols(sF, pF) += fw.d_params;
      S.swap(S_next);
      x_next.noalias() = A * x;
      x_next.noalias() += B * ut;
      x_next += fw.out;
      x.swap(x_next);
    }
  }
  out.dy = JT.transpose();
  return out;
}

std::uint64_t g_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

namespace {

template <typename Fn>
StaticFit tagged_fit(const char* which, Fn&& fn) {
  try {
    return fn();
  } catch (const NonFiniteLossError& e) {
    throw NonFiniteLossError(std::string(which) + ": " + e.what(), e.iteration());
  } catch (const DimensionError& e) {
    throw DimensionError(std::string(which) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(which) + ": " + e.what());
  }
}

}  // namespace

NlssModel assemble_initialized(const LtiModel& lin, const StateTrajectory& traj, const IoRecord& record, int n_f,
                               int n_g, std::uint64_t seed, const InitOptions& options) {
  record.validate();
  const int N = record.length();
  const int nx = lin.nx();
  const int nu = lin.nu();
  if (traj.x.rows() != N || traj.x.cols() != nx)
    throw DimensionError("assemble_initialized: trajectory is " + std::to_string(traj.x.rows()) + "x" +
                         std::to_string(traj.x.cols()) + ", expected " + std::to_string(N) + "x" +
                         std::to_string(nx));
  if (record.nu() != nu || record.ny() != lin.ny())
    throw DimensionError("assemble_initialized: record channels do not match the linear model");

  Signal xi(N, nx + nu);
  xi << traj.x, record.u;

  StaticDataset f_data;
  f_data.xi = xi.topRows(N - 1);
  f_data.z = traj.x.bottomRows(N - 1) - traj.x.topRows(N - 1) * lin.A().transpose() -
             record.u.topRows(N - 1) * lin.B().transpose();
  StaticDataset g_data;
  g_data.xi = xi;
  g_data.z = record.y - traj.x * lin.C().transpose() - record.u * lin.D().transpose();

  NlssModel m;
  m.lin = lin;
  m.f_nl = tagged_fit("f_nl", [&] { return fit_static(f_data, n_f, seed, options.static_fit); }).net;
  m.g_nl = tagged_fit("g_nl", [&] { return fit_static(g_data, n_g, g_seed(seed), options.static_fit); }).net;
  m.x0 = traj.x.row(0).transpose();
  m.validate();
  return m;
}

NlssFit optimize_nlss(const NlssModel& model, const IoRecord& record, const OptimizeOptions& options) {
  record.validate();
  model.validate();
  if (record.nu() != model.nu() || record.ny() != model.ny())
    throw DimensionError("optimize_nlss: record channels do not match the model");
  const NlssDims dims = NlssDims::of(model);
  const Eigen::Index N = record.length();

  auto flatten = [&](const Signal& y_hat) {
    Vector r(N * dims.ny);
    for (Eigen::Index t = 0; t < N; ++t) r.segment(t * dims.ny, dims.ny) = (y_hat.row(t) - record.y.row(t)).transpose();
    return r;
  };

  LmProblem problem;
  problem.residual = [&](const Vector& th) -> std::optional<Vector> {
    try {
      return flatten(simulate_nlss(unpack_theta(th, dims), record.u).y);
    } catch (const DivergenceError&) {
      return std::nullopt;
    }
  };
  problem.residual_and_jacobian = [&](const Vector& th, Vector& r, Matrix& J) {
    NlssJacobian jac = simulate_nlss_jacobian(unpack_theta(th, dims), record.u);
    r = flatten(jac.y);
    J = std::move(jac.dy);
  };
  problem.cost_scale = 1.0 / static_cast<double>(N);
  problem.free = options.free;

  const LmResult res = levenberg_marquardt(problem, pack_theta(model), options.lm);
  NlssFit fit;
  fit.model = unpack_theta(res.theta, dims);
  fit.status = res.status;
  fit.initial_cost = res.initial_cost;
  fit.cost = res.cost;
  fit.iterations = res.iterations;
  fit.trace = res.trace;
  return fit;
}

}  // namespace nlssinit
