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

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlssinit/lti.hpp"

namespace nlssinit {

/// Discrete-time SISO filter num(z^-1) / den(z^-1), den[0] == 1 after normalisation.
struct TransferFunction {
  std::vector<double> num;
  std::vector<double> den;

  /// Throws InvalidArgument on empty or zero-leading denominators; rescales so den[0] == 1.
  void normalize();
  std::vector<std::complex<double>> poles() const;
  bool is_stable() const;
  /// Zero initial conditions.
  Vector filter(const Vector& x) const;
  /// Gain at normalised frequency w in [0, 1] (fraction of Nyquist).
  std::complex<double> response(double w) const;
  /// Controllable-canonical state-space realization (SISO).
  LtiModel to_state_space() const;
};

/// Butterworth low-pass, bilinear transform with pre-warping. `cutoff` is a fraction of Nyquist.
std::vector<TransferFunction> butterworth_sections(int order, double cutoff);
TransferFunction butterworth(int order, double cutoff);
TransferFunction cascade(const std::vector<TransferFunction>& sections);

/// Static nonlinearity between the two linear blocks.
struct Nonlinearity {
  enum class Kind { identity, diode_soft, tanh, abs };

  Kind kind = Kind::identity;
  double knee = 0.0;       ///< diode_soft: gain reduction above zero, in (0, 1]
  double sharpness = 1.0;  ///< diode_soft: transition sharpness (> 0)
  double gain = 1.0;       ///< tanh: v -> tanh(gain v) / gain

  /**
   * identity: v
   * diode_soft: v - knee * (softplus(sharpness v) - log 2) / sharpness
   * tanh: tanh(gain v) / gain
   * abs: |v|
   * All kinds map 0 to 0.
   */
  double operator()(double v) const;
};

std::string to_string(Nonlinearity::Kind kind);
Nonlinearity::Kind nonlinearity_kind_from_string(const std::string& s);

struct WhConfig {
  TransferFunction lti_front;
  TransferFunction lti_back;
  Nonlinearity nonlinearity;
  double input_bandwidth_fraction = 10.0 / 25.6;  ///< of Nyquist
  double input_std = 1.0;
  int input_filter_order = 10;
  int N_est = 2500;
  int N_val = 10000;
  double noise_std = 0.0;
  double sample_period = 1.0 / 51200.0;
  std::uint64_t seed = 1;

  /// Default synthetic benchmark: 3rd-order Butterworth blocks at 4.4 and 5 kHz
  /// equivalent (fs = 51.2 kHz), soft diode nonlinearity, 2500/10000 samples.
  static WhConfig defaults();

  /// Throws InvalidArgument (or UnstableModelError for unstable filters).
  void validate() const;
};

struct WhTruth {
  TransferFunction front;
  TransferFunction back;
  Nonlinearity nonlinearity;
  std::vector<TransferFunction> input_shaper;
  Signal y_est_noiseless;
  Signal y_val_noiseless;
};

struct WhData {
  IoRecord est;
  IoRecord val;
  WhTruth truth;
};

/// Wiener-Hammerstein system output back(nl(front(u))) with zero initial conditions.
Vector wh_response(const TransferFunction& front, const Nonlinearity& nl, const TransferFunction& back,
                   const Vector& u);

/**
 * Draws band-limited Gaussian inputs (independent for the two records) and the
 * corresponding noisy Wiener-Hammerstein outputs. The system starts at rest at
 * t = 1; the input shaper is warmed up so the input is stationary from the first
 * sample. Input and noise use separate random streams, so changing noise_std
 * leaves the inputs unchanged.
 */
WhData generate_wh(const WhConfig& config);

struct BenchmarkSplit {
  int n_est = 2500;
  int n_val = 10000;
  int est_offset = 0;
  int val_offset = 2500;
  bool remove_dc = false;
};

struct BenchmarkData {
  IoRecord est;
  IoRecord val;
  Vector dc_u;  ///< offsets subtracted from u (zeros when remove_dc is false)
  Vector dc_y;
};

/// Reads an IoRecord CSV and cuts two non-overlapping slices.
/// DC removal uses the estimation slice means for both slices.
BenchmarkData load_benchmark(const std::filesystem::path& path, const BenchmarkSplit& split);
BenchmarkData split_record(const IoRecord& full, const BenchmarkSplit& split);

}  // namespace nlssinit
