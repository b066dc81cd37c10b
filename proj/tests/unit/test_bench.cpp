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
#include <complex>
#include <sstream>

#include <unsupported/Eigen/FFT>

#include "nlssinit/bench.hpp"
#include "nlssinit/error.hpp"
#include "nlssinit/io.hpp"

using namespace nlssinit;

namespace {

WhConfig identity_config(std::uint64_t seed) {
  WhConfig c = WhConfig::defaults();
  c.nonlinearity = Nonlinearity{};
  c.noise_std = 0.0;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("nonlinearities map zero to zero") {
  for (Nonlinearity::Kind k : {Nonlinearity::Kind::identity, Nonlinearity::Kind::diode_soft, Nonlinearity::Kind::tanh,
                               Nonlinearity::Kind::abs}) {
    Nonlinearity nl;
    nl.kind = k;
    nl.knee = 0.8;
    nl.sharpness = 4.0;
    nl.gain = 2.0;
    CHECK(std::abs(nl(0.0)) < 1e-15);
    CHECK(nonlinearity_kind_from_string(to_string(k)) == k);
  }
  Nonlinearity d;
  d.kind = Nonlinearity::Kind::diode_soft;
  d.knee = 0.8;
  d.sharpness = 4.0;
  // Unit slope for strongly negative inputs, slope 1 - knee for strongly positive ones.
  CHECK((d(-10.0) - d(-11.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((d(11.0) - d(10.0)) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK_THROWS_AS(nonlinearity_kind_from_string("cubic"), InvalidArgument);
}

TEST_CASE("butterworth design") {
  const TransferFunction f = butterworth(3, 4.4 / 25.6);
  CHECK(f.is_stable());
  CHECK(std::abs(f.response(0.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(f.response(4.4 / 25.6)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(std::abs(f.response(0.9)) < 1e-3);
  CHECK(f.poles().size() == 3);
  const auto sections = butterworth_sections(10, 0.3);
  CHECK(sections.size() == 5);
  CHECK(std::abs(cascade(sections).response(0.3)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("default front filter imitates a 4.4 kHz cutoff at 51.2 kHz") {
  const WhConfig c = WhConfig::defaults();
  CHECK(std::abs(c.lti_front.response(4.4 / 25.6)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(c.lti_front.den.size() == 4);
  CHECK(c.sample_period == doctest::Approx(1.0 / 51200.0));
  CHECK(c.N_est == 2500);
  CHECK(c.N_val == 10000);
}

TEST_CASE("transfer function state-space realization") {
  const TransferFunction f = butterworth(3, 0.2);
  const LtiModel m = f.to_state_space();
  Signal u = Signal::Zero(60, 1);
  u(0, 0) = 1.0;
  u(7, 0) = -0.5;
  const Vector direct = f.filter(u.col(0));
  CHECK((simulate_lti(m, u).y.col(0) - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identity WH is reproduced by the linear truth") {
  const WhData d = generate_wh(identity_config(3));
  const TransferFunction sys = cascade({d.truth.front, d.truth.back});
  CHECK((sys.filter(d.est.u.col(0)) - d.est.y.col(0)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((sys.filter(d.val.u.col(0)) - d.val.y.col(0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("identity WH is fitted by a 6th-order BLA") {
  const WhData d = generate_wh(identity_config(4));
  const BlaResult bla = estimate_bla(d.est, 6);
  const double val = rmse(simulate_lti(bla.model, d.val.u).y, d.val.y);
  CHECK(val < 1e-6 * rms(d.val.y));
}

TEST_CASE("generation is deterministic and seed dependent") {
  const WhConfig c = WhConfig::defaults();
  const WhData a = generate_wh(c);
  const WhData b = generate_wh(c);
  CHECK((a.est.u.array() == b.est.u.array()).all());
  CHECK((a.est.y.array() == b.est.y.array()).all());
  CHECK((a.val.y.array() == b.val.y.array()).all());
  WhConfig c2 = c;
  c2.seed = c.seed + 1;
  CHECK((generate_wh(c2).est.u.array() != a.est.u.array()).any());
  CHECK(a.est.length() == 2500);
  CHECK(a.val.length() == 10000);
  CHECK(a.est.sample_period == doctest::Approx(1.0 / 51200.0));
}

TEST_CASE("changing the noise level keeps the inputs") {
  WhConfig c = WhConfig::defaults();
  const WhData a = generate_wh(c);
  c.noise_std = 0.05;
  const WhData b = generate_wh(c);
  CHECK((a.est.u.array() == b.est.u.array()).all());
  CHECK((a.truth.y_est_noiseless.array() == b.truth.y_est_noiseless.array()).all());
}

TEST_CASE("output noise level") {
  WhConfig c = WhConfig::defaults();
  c.N_est = 100000;
  c.N_val = 64;
  c.noise_std = 0.02;
  const WhData d = generate_wh(c);
  const Vector e = d.est.y.col(0) - d.truth.y_est_noiseless.col(0);
  const double mean = e.mean();
  const double std = std::sqrt((e.array() - mean).square().sum() / (e.size() - 1));
  CHECK(std::abs(std - c.noise_std) < 0.02 * c.noise_std);
}

TEST_CASE("input power stays inside the configured bandwidth") {
  WhConfig c = WhConfig::defaults();
  c.N_est = 1 << 16;
  c.N_val = 64;
  const WhData d = generate_wh(c);
  Eigen::FFT<double> fft;
  std::vector<double> u(d.est.u.data(), d.est.u.data() + d.est.length());
  std::vector<std::complex<double>> U;
  fft.fwd(U, u);
  const std::size_t n = u.size();
  double total = 0.0, above = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double p = std::norm(U[k]);
    total += p;
    if (static_cast<double>(k) / static_cast<double>(n / 2) > c.input_bandwidth_fraction) above += p;
  }
  CHECK(above < 0.01 * total);
}

TEST_CASE("default configuration leaves nonlinear headroom") {
  const WhConfig c = WhConfig::defaults();
  const WhData d = generate_wh(c);
  const BlaResult bla = estimate_bla(d.est, 6);
  CHECK(rmse(simulate_lti(bla.model, d.val.u).y, d.val.y) > 3.0 * c.noise_std);
}

TEST_CASE("configuration checks") {
  WhConfig c = WhConfig::defaults();
  c.N_est = 10;
  CHECK_THROWS_AS(generate_wh(c), InvalidArgument);
  c = WhConfig::defaults();
  c.lti_front = TransferFunction{{1.0}, {1.0, -1.5}};
  CHECK_THROWS_AS(generate_wh(c), UnstableModelError);
  c = WhConfig::defaults();
  c.input_bandwidth_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("benchmark slicing") {
  std::ostringstream csv;
  csv << "t,u1,y1\n";
  for (int i = 0; i < 10; ++i) csv << i * 0.5 << ',' << i << ',' << 10 * i << '\n';
  std::istringstream in(csv.str());
  const IoRecord full = read_record_csv(in);
  BenchmarkSplit s;
  s.n_est = 6;
  s.n_val = 4;
  s.est_offset = 0;
  s.val_offset = 6;
  const BenchmarkData d = split_record(full, s);
  REQUIRE(d.est.length() == 6);
  REQUIRE(d.val.length() == 4);
  for (int i = 0; i < 6; ++i) CHECK(d.est.u(i, 0) == i);
  for (int i = 0; i < 4; ++i) CHECK(d.val.y(i, 0) == 10 * (6 + i));
  CHECK(d.est.sample_period == 0.5);
  CHECK(d.val.role == RecordRole::validation);

  s.val_offset = 4;
  CHECK_THROWS_AS(split_record(full, s), InvalidArgument);
  s.val_offset = 7;
  CHECK_THROWS_AS(split_record(full, s), InvalidArgument);

  s.val_offset = 6;
  s.remove_dc = true;
  const BenchmarkData c = split_record(full, s);
  CHECK(c.dc_u(0) == doctest::Approx(2.5));
  CHECK(c.dc_y(0) == doctest::Approx(25.0));
  CHECK(c.est.u.mean() == doctest::Approx(0.0));
  CHECK(c.val.u(0, 0) == doctest::Approx(3.5));
}

TEST_CASE("load_benchmark reads files and reports missing ones") {
  CHECK_THROWS_AS(load_benchmark("/nonexistent/wh.csv", BenchmarkSplit{}), IoError);
}
