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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlssinit/bench.hpp"
#include "nlssinit/levenberg_marquardt.hpp"
#include "nlssinit/lti.hpp"
#include "nlssinit/nlss.hpp"
#include "nlssinit/state_estimator.hpp"
#include "nlssinit/tanh_net.hpp"

namespace nlssinit {

struct DataSource {
  enum class Kind { generate, file };
  Kind kind = Kind::generate;
  WhConfig generate = WhConfig::defaults();
  std::filesystem::path path;  ///< IoRecord CSV, used when kind == file
  BenchmarkSplit split;        ///< slicing of the file; sizes of generated data come from `generate`
  bool remove_dc = true;       ///< subtract estimation-record means from both records
};

struct PipelineConfig {
  DataSource data;
  int n_x = 6;
  std::vector<double> lambdas{0.1, 0.5, 1.0, 5.0, 10.0};
  std::vector<int> neurons{1, 2, 3};  ///< n_f = n_g = n per grid point
  int n_restarts = 20;
  std::uint64_t seed = 0;             ///< restart r uses seed + r
  BlaOptions bla;
  StaticFitOptions static_fit;
  LmSettings lm;
  bool init_only = false;
  bool select_at_init = false;
  double comparison_lambda = 0.1;
  int comparison_neurons = 3;
  int jobs = 1;                       ///< scheduling only; results do not depend on it
  std::filesystem::path out_dir;

  /// Throws InvalidArgument on empty grids or bad sizes, IoError on a missing data file.
  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

struct PreparedData {
  IoRecord est;
  IoRecord val;
  Vector dc_u;
  Vector dc_y;
  Vector u_rest;  ///< input level of the unexcited system after offset removal (-dc_u)
};

PreparedData prepare_data(const DataSource& source);

/**
 * Validation RMSE of a free-run simulation started from the model's rest state
 * under `u_rest` (zero state if the model does not settle). +inf if the
 * simulation diverges.
 */
double validation_rmse(const NlssModel& model, const IoRecord& val, const Vector& u_rest);
double validation_rmse(const LtiModel& model, const IoRecord& val, const Vector& u_rest);

enum class CellStatus { ok, diverged, stalled, error };
std::string to_string(CellStatus status);

struct CellResult {
  double lambda = 0.0;
  int n_f = 0;
  int n_g = 0;
  std::uint64_t seed = 0;
  double rmse_init_est = 0.0;
  double rmse_init_val = 0.0;
  double rmse_opt_est = 0.0;  ///< NaN when the optimization stage was not run
  double rmse_opt_val = 0.0;
  CellStatus status = CellStatus::ok;
  std::string message;
  std::optional<NlssModel> init_model;
  std::optional<NlssModel> opt_model;
  std::vector<LmTracePoint> trace;
};

struct RunReport {
  PipelineConfig config;
  LtiModel bla;
  double bla_rmse_est = 0.0;
  double bla_rmse_val = 0.0;
  bool bla_stabilized = false;
  std::vector<LambdaCostRow> lambda_costs;
  std::vector<CellResult> cells;  ///< ordered by lambda, then n, then restart
  std::optional<std::size_t> best;

  /// RMSE used for selection: initialized or optimized validation RMSE.
  double selection_rmse(const CellResult& cell) const;
};

/// Runs BLA, state estimation, initialization and (unless init_only) optimization over the grid.
RunReport run_pipeline(const PipelineConfig& config);

enum class InitArm { linear_random, linear_mlp, proposed };
std::string to_string(InitArm arm);

struct ArmRun {
  InitArm arm = InitArm::proposed;
  std::uint64_t seed = 0;
  double rmse_init_val = 0.0;
  double rmse_opt_est = 0.0;
  double rmse_opt_val = 0.0;
  CellStatus status = CellStatus::ok;
  std::string message;
};

struct ArmSummary {
  InitArm arm = InitArm::proposed;
  int completed = 0;  ///< runs with a finite validation RMSE
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
};

struct ComparisonReport {
  PipelineConfig config;
  double bla_rmse_val = 0.0;
  std::vector<ArmRun> runs;  ///< ordered by seed, then arm
  std::vector<ArmSummary> arms;
};

/**
 * Optimizes three initializations per seed at (comparison_lambda, comparison_neurons):
 * Linear/Random (BLA plus data-independent random_positions, zero amplitudes), Linear/MLP (proposed
 * positions, zero amplitudes) and the full proposed initialization.
 * Requires n_restarts >= 10.
 */
ComparisonReport run_init_comparison(const PipelineConfig& config);

/// Median of the values; NaN entries are ignored, an empty input gives NaN.
double median(std::vector<double> values);

/**
 * Writes summary.csv, best_model.json, run_config.json, bla_model.json,
 * model_table.csv, lambda_costs.csv, scatter_init.csv, scatter_opt.csv and
 * per-cell models and cost traces under models/ and traces/.
 */
void emit_report(const RunReport& report, const std::filesystem::path& dir);

/// Writes comparison_runs.csv, comparison_summary.csv and run_config.json.
void emit_comparison(const ComparisonReport& report, const std::filesystem::path& dir);

/// summary.csv content (shared by emit_report and the determinism check).
std::string summary_csv(const RunReport& report);

}  // namespace nlssinit
