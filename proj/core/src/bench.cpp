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

#include "nlssinit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "nlssinit/error.hpp"
#include "nlssinit/io.hpp"

namespace nlssinit {

void TransferFunction::normalize() {
  while (den.size() > 1 && den.back() == 0.0) den.pop_back();
  if (den.empty() || den.front() == 0.0) throw InvalidArgument("TransferFunction: leading denominator is zero");
  if (num.empty()) throw InvalidArgument("TransferFunction: empty numerator");
  const double a0 = den.front();
  for (double& v : num) v /= a0;
  for (double& v : den) v /= a0;
}

std::vector<std::complex<double>> TransferFunction::poles() const {
  TransferFunction tf = *this;
  tf.normalize();
  const int n = static_cast<int>(tf.den.size()) - 1;
  std::vector<std::complex<double>> p;
  if (n == 0) return p;
  Matrix comp = Matrix::Zero(n, n);
  for (int j = 0; j < n; ++j) comp(0, j) = -tf.den[static_cast<std::size_t>(j + 1)];
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(comp, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) p.push_back(es.eigenvalues()(i));
  return p;
}

bool TransferFunction::is_stable() const {
  for (const auto& p : poles())
    if (std::abs(p) >= 1.0) return false;
  return true;
}

Vector TransferFunction::filter(const Vector& x) const {
  TransferFunction tf = *this;
  tf.normalize();
  const std::size_t n = std::max(tf.num.size(), tf.den.size());
  tf.num.resize(n, 0.0);
  tf.den.resize(n, 0.0);
  std::vector<double> s(n, 0.0);  // transposed direct form II state, s[0] unused
  Vector y(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double xk = x(k);
    const double yk = tf.num[0] * xk + (n > 1 ? s[1] : 0.0);
    for (std::size_t i = 1; i < n; ++i) {
      const double next = i + 1 < n ? s[i + 1] : 0.0;
      s[i] = tf.num[i] * xk - tf.den[i] * yk + next;
    }
    y(k) = yk;
  }
  return y;
}

std::complex<double> TransferFunction::response(double w) const {
  const std::complex<double> zinv = std::polar(1.0, -std::numbers::pi * w);
  std::complex<double> nsum = 0.0, dsum = 0.0, p = 1.0;
  const std::size_t n = std::max(num.size(), den.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i < num.size()) nsum += num[i] * p;
    if (i < den.size()) dsum += den[i] * p;
    p *= zinv;
  }
  return nsum / dsum;
}

LtiModel TransferFunction::to_state_space() const {
  TransferFunction tf = *this;
  tf.normalize();
  const std::size_t len = std::max(tf.num.size(), tf.den.size());
  tf.num.resize(len, 0.0);
  tf.den.resize(len, 0.0);
  const int n = static_cast<int>(len) - 1;
  const double b0 = tf.num[0];
  if (n == 0) return LtiModel(Matrix::Zero(0, 0), Matrix::Zero(0, 1), Matrix::Zero(1, 0), Matrix::Constant(1, 1, b0));
  Matrix A = Matrix::Zero(n, n);
  Matrix B = Matrix::Zero(n, 1);
  Matrix C(1, n);
  for (int j = 0; j < n; ++j) {
    A(0, j) = -tf.den[static_cast<std::size_t>(j + 1)];
    C(0, j) = tf.num[static_cast<std::size_t>(j + 1)] - tf.den[static_cast<std::size_t>(j + 1)] * b0;
  }
  for (int i = 1; i < n; ++i) A(i, i - 1) = 1.0;
  B(0, 0) = 1.0;
  return LtiModel(A, B, C, Matrix::Constant(1, 1, b0));
}

std::vector<TransferFunction> butterworth_sections(int order, double cutoff) {
  if (order < 1) throw InvalidArgument("butterworth: order must be >= 1");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw InvalidArgument("butterworth: cutoff must lie in (0, 1)");
  const double warped = std::tan(std::numbers::pi * cutoff / 2.0);
  std::vector<TransferFunction> sections;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const std::complex<double> s = warped * std::polar(1.0, theta);
    const std::complex<double> z = (1.0 + s) / (1.0 - s);
    const double a1 = -2.0 * z.real();
    const double a2 = std::norm(z);
    const double g = (1.0 + a1 + a2) / 4.0;
    sections.push_back({{g, 2.0 * g, g}, {1.0, a1, a2}});
  }
  if (order % 2 == 1) {
    const double z = (1.0 - warped) / (1.0 + warped);
    const double g = (1.0 - z) / 2.0;
    sections.push_back({{g, g}, {1.0, -z}});
  }
  return sections;
}

namespace {

std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

Vector filter_sections(const std::vector<TransferFunction>& sections, Vector x) {
  for (const auto& s : sections) x = s.filter(x);
  return x;
}

}  // namespace

TransferFunction cascade(const std::vector<TransferFunction>& sections) {
  TransferFunction tf{{1.0}, {1.0}};
  for (const auto& s : sections) {
    tf.num = poly_mul(tf.num, s.num);
    tf.den = poly_mul(tf.den, s.den);
  }
  return tf;
}

TransferFunction butterworth(int order, double cutoff) { return cascade(butterworth_sections(order, cutoff)); }

double Nonlinearity::operator()(double v) const {
  switch (kind) {
    case Kind::identity:
      return v;
    case Kind::diode_soft: {
      const double a = sharpness * v;
      // softplus(a) without overflow
      const double sp = a > 30.0 ? a : std::log1p(std::exp(a));
      return v - knee * (sp - std::numbers::ln2) / sharpness;
    }
    case Kind::tanh:
      return std::tanh(gain * v) / gain;
    case Kind::abs:
      return std::abs(v);
  }
  return v;
}

std::string to_string(Nonlinearity::Kind kind) {
  switch (kind) {
    case Nonlinearity::Kind::identity:
      return "identity";
    case Nonlinearity::Kind::diode_soft:
      return "diode_soft";
    case Nonlinearity::Kind::tanh:
      return "tanh";
    case Nonlinearity::Kind::abs:
      return "abs";
  }
  return "identity";
}

Nonlinearity::Kind nonlinearity_kind_from_string(const std::string& s) {
  if (s == "identity") return Nonlinearity::Kind::identity;
  if (s == "diode_soft") return Nonlinearity::Kind::diode_soft;
  if (s == "tanh") return Nonlinearity::Kind::tanh;
  if (s == "abs") return Nonlinearity::Kind::abs;
  throw InvalidArgument("unknown nonlinearity '" + s + "'");
}

WhConfig WhConfig::defaults() {
  WhConfig c;
  c.lti_front = butterworth(3, 4.4 / 25.6);
  c.lti_back = butterworth(3, 5.0 / 25.6);
  c.nonlinearity.kind = Nonlinearity::Kind::diode_soft;
  c.nonlinearity.knee = 0.8;
  c.nonlinearity.sharpness = 4.0;
  c.noise_std = 1e-3;
  return c;
}

void WhConfig::validate() const {
  if (N_est < 64 || N_val < 64) throw InvalidArgument("WhConfig: N_est and N_val must be >= 64");
  if (!(input_bandwidth_fraction > 0.0 && input_bandwidth_fraction <= 1.0))
    throw InvalidArgument("WhConfig: input_bandwidth_fraction must lie in (0, 1]");
  if (!(input_std > 0.0)) throw InvalidArgument("WhConfig: input_std must be positive");
  if (!(noise_std >= 0.0)) throw InvalidArgument("WhConfig: noise_std must be >= 0");
  if (!(sample_period > 0.0)) throw InvalidArgument("WhConfig: sample_period must be positive");
  if (input_filter_order < 1) throw InvalidArgument("WhConfig: input_filter_order must be >= 1");
  if (nonlinearity.kind == Nonlinearity::Kind::diode_soft && !(nonlinearity.sharpness > 0.0))
    throw InvalidArgument("WhConfig: diode_soft sharpness must be positive");
  if (nonlinearity.kind == Nonlinearity::Kind::tanh && nonlinearity.gain == 0.0)
    throw InvalidArgument("WhConfig: tanh gain must be nonzero");
  if (!lti_front.is_stable()) throw UnstableModelError("WhConfig: lti_front has a pole on or outside the unit circle");
  if (!lti_back.is_stable()) throw UnstableModelError("WhConfig: lti_back has a pole on or outside the unit circle");
}

Vector wh_response(const TransferFunction& front, const Nonlinearity& nl, const TransferFunction& back,
                   const Vector& u) {
  Vector v = front.filter(u);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = nl(v(i));
  return back.filter(v);
}

namespace {

constexpr int kInputWarmup = 1000;

// Shaper -3 dB point as a fraction of the nominal input bandwidth.
constexpr double kShaperCutoffRatio = 0.85;

Vector draw_input(const WhConfig& c, const std::vector<TransferFunction>& shaper, std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector w(n + kInputWarmup);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = gauss(rng);
  Vector u = shaper.empty() ? w : filter_sections(shaper, w);
  u = u.tail(n).eval();
  const double s = std::sqrt(u.squaredNorm() / n);
  return s > 0.0 ? Vector(u * (c.input_std / s)) : u;
}

}  // namespace

WhData generate_wh(const WhConfig& config) {
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu), static_cast<std::uint32_t>(config.seed >> 32),
                    0x57484bu};
  std::uint64_t streams[4];
  {
    std::uint32_t raw[8];
    seq.generate(raw, raw + 8);
    for (int i = 0; i < 4; ++i) streams[i] = (static_cast<std::uint64_t>(raw[2 * i]) << 32) | raw[2 * i + 1];
  }
  std::mt19937_64 rng_u_est(streams[0]), rng_u_val(streams[1]), rng_n_est(streams[2]), rng_n_val(streams[3]);

  WhData data;
  data.truth.front = config.lti_front;
  data.truth.back = config.lti_back;
  data.truth.nonlinearity = config.nonlinearity;
  if (config.input_bandwidth_fraction < 1.0)
    data.truth.input_shaper =
        butterworth_sections(config.input_filter_order, kShaperCutoffRatio * config.input_bandwidth_fraction);

  auto make = [&](int n, std::mt19937_64& rng_u, std::mt19937_64& rng_n, RecordRole role, Signal& clean) {
    const Vector u = draw_input(config, data.truth.input_shaper, rng_u, n);
    const Vector y0 = wh_response(config.lti_front, config.nonlinearity, config.lti_back, u);
    clean = y0;
    Vector y = y0;
    if (config.noise_std > 0.0) {
      std::normal_distribution<double> gauss(0.0, config.noise_std);
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += gauss(rng_n);
    }
    IoRecord rec;
    rec.u = u;
    rec.y = y;
    rec.sample_period = config.sample_period;
    rec.role = role;
    return rec;
  };
  data.est = make(config.N_est, rng_u_est, rng_n_est, RecordRole::estimation, data.truth.y_est_noiseless);
  data.val = make(config.N_val, rng_u_val, rng_n_val, RecordRole::validation, data.truth.y_val_noiseless);
  return data;
}

BenchmarkData split_record(const IoRecord& full, const BenchmarkSplit& split) {
  full.validate();
  const int N = full.length();
  if (split.n_est < 2 || split.n_val < 2) throw InvalidArgument("load_benchmark: slices need at least 2 samples");
  if (split.est_offset < 0 || split.val_offset < 0 || split.est_offset + split.n_est > N ||
      split.val_offset + split.n_val > N)
    throw InvalidArgument("load_benchmark: slice out of range for a record of " + std::to_string(N) + " samples");
  const bool disjoint = split.est_offset + split.n_est <= split.val_offset ||
                        split.val_offset + split.n_val <= split.est_offset;
  if (!disjoint) throw InvalidArgument("load_benchmark: estimation and validation slices overlap");

  BenchmarkData d;
  d.est.u = full.u.middleRows(split.est_offset, split.n_est);
  d.est.y = full.y.middleRows(split.est_offset, split.n_est);
  d.val.u = full.u.middleRows(split.val_offset, split.n_val);
  d.val.y = full.y.middleRows(split.val_offset, split.n_val);
  d.est.sample_period = d.val.sample_period = full.sample_period;
  d.est.role = RecordRole::estimation;
  d.val.role = RecordRole::validation;
  d.dc_u = Vector::Zero(full.nu());
  d.dc_y = Vector::Zero(full.ny());
  if (split.remove_dc) {
    d.dc_u = d.est.u.colwise().mean().transpose();
    d.dc_y = d.est.y.colwise().mean().transpose();
    d.est.u.rowwise() -= d.dc_u.transpose();
    d.val.u.rowwise() -= d.dc_u.transpose();
    d.est.y.rowwise() -= d.dc_y.transpose();
    d.val.y.rowwise() -= d.dc_y.transpose();
  }
  return d;
}

BenchmarkData load_benchmark(const std::filesystem::path& path, const BenchmarkSplit& split) {
  return split_record(read_record_csv(path), split);
}

}  // namespace nlssinit
