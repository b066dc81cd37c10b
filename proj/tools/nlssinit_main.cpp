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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nlssinit/bench.hpp"
#include "nlssinit/error.hpp"
#include "nlssinit/io.hpp"
#include "nlssinit/lti.hpp"
#include "nlssinit/nlss.hpp"
#include "nlssinit/pipeline.hpp"
#include "nlssinit/state_estimator.hpp"

namespace fs = std::filesystem;
using namespace nlssinit;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<int> restarts;
  std::string out = "out";
};

std::string sig4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

PipelineConfig load_config(const CommonFlags& f) {
  PipelineConfig c;
  if (!f.config.empty()) c = read_json(f.config).get<PipelineConfig>();
  if (f.seed) {
    c.seed = *f.seed;
    c.data.generate.seed = *f.seed;
  }
  if (f.jobs) c.jobs = *f.jobs;
  if (f.restarts) c.n_restarts = *f.restarts;
  c.out_dir = f.out;
  return c;
}

void add_common(CLI::App* app, CommonFlags& f, bool with_jobs) {
  app->add_option("--config", f.config, "PipelineConfig JSON file")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "Base seed (also seeds generated data)");
  app->add_option("--out", f.out, "Output directory")->capture_default_str();
  if (with_jobs) {
    app->add_option("--jobs", f.jobs, "Concurrent grid cells")->check(CLI::PositiveNumber);
    app->add_option("--restarts", f.restarts, "Restarts per grid point")->check(CLI::PositiveNumber);
  }
}

NlssModel read_model(const std::string& path) { return read_json(path).get<NlssModel>(); }

int cmd_gen(const CommonFlags& f) {
  WhConfig wc = WhConfig::defaults();
  if (!f.config.empty()) {
    const nlohmann::json j = read_json(f.config);
    // Accept a bare WhConfig or a PipelineConfig with a generate block.
    if (j.contains("data")) wc = j.get<PipelineConfig>().data.generate;
    else wc = j.get<WhConfig>();
  }
  if (f.seed) wc.seed = *f.seed;
  const WhData d = generate_wh(wc);
  fs::create_directories(f.out);
  write_record_csv(fs::path(f.out) / "est.csv", d.est);
  write_record_csv(fs::path(f.out) / "val.csv", d.val);
  write_json(fs::path(f.out) / "wh_config.json", nlohmann::json(wc));
  std::cout << "wrote " << d.est.length() << " estimation and " << d.val.length() << " validation samples to "
            << f.out << "\n";
  std::cout << "output rms " << sig4(rms(d.est.y)) << ", noise std " << sig4(wc.noise_std) << "\n";
  return 0;
}

int cmd_bla(const CommonFlags& f) {
  const PipelineConfig c = load_config(f);
  c.validate();
  const PreparedData data = prepare_data(c.data);
  const BlaResult bla = estimate_bla(data.est, c.n_x, c.bla);
  fs::create_directories(f.out);
  write_json(fs::path(f.out) / "bla_model.json", nlohmann::json(bla.model));
  std::cout << "BLA n_x=" << c.n_x << "  rmse est " << sig4(bla.rmse_est) << "  val "
            << sig4(validation_rmse(bla.model, data.val, data.u_rest)) << "  spectral radius " << sig4(bla.model.spectral_radius())
            << (bla.stabilized ? "  (stabilized)" : "") << "\n";
  for (const LambdaCostRow& r : lambda_grid_costs(data.est, bla.model, c.lambdas))
    std::cout << "  lambda " << sig4(r.lambda) << "  E_y " << sig4(r.e_y) << "  E_x " << sig4(r.e_x) << "  E_y share "
              << sig4(100.0 * r.relative_weight) << "%\n";
  return 0;
}

int cmd_init(const CommonFlags& f) {
  const PipelineConfig c = load_config(f);
  c.validate();
  const PreparedData data = prepare_data(c.data);
  const BlaResult bla = estimate_bla(data.est, c.n_x, c.bla);
  const double lambda = c.lambdas.front();
  const int n = c.neurons.front();
  const StateTrajectory traj = estimate_state(data.est, bla.model, lambda);
  InitOptions opts;
  opts.static_fit = c.static_fit;
  const NlssModel m = assemble_initialized(bla.model, traj, data.est, n, n, c.seed, opts);
  fs::create_directories(f.out);
  write_json(fs::path(f.out) / "init_model.json", nlohmann::json(m));
  std::cout << "initialized lambda=" << sig4(lambda) << " n=" << n << " seed=" << c.seed << "\n";
  std::cout << "  BLA rmse val " << sig4(validation_rmse(bla.model, data.val, data.u_rest)) << "\n";
  std::cout << "  init rmse est " << sig4(rmse(simulate_nlss(m, data.est.u).y, data.est.y)) << "  val "
            << sig4(validation_rmse(m, data.val, data.u_rest)) << "\n";
  return 0;
}

int cmd_optimize(const CommonFlags& f, const std::string& model_path) {
  const PipelineConfig c = load_config(f);
  c.validate();
  const PreparedData data = prepare_data(c.data);
  OptimizeOptions opts;
  opts.lm = c.lm;
  const NlssFit fit = optimize_nlss(read_model(model_path), data.est, opts);
  fs::create_directories(f.out);
  write_json(fs::path(f.out) / "opt_model.json", nlohmann::json(fit.model));
  write_trace_csv(fs::path(f.out) / "trace.csv", fit.trace);
  std::cout << "optimize: " << to_string(fit.status) << " after " << fit.iterations << " iterations\n";
  std::cout << "  rmse est " << sig4(std::sqrt(fit.initial_cost)) << " -> " << sig4(std::sqrt(fit.cost)) << "  val "
            << sig4(validation_rmse(fit.model, data.val, data.u_rest)) << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& model_path) {
  const PipelineConfig c = load_config(f);
  c.validate();
  const PreparedData data = prepare_data(c.data);
  const NlssModel m = read_model(model_path);
  double est = std::numeric_limits<double>::infinity();
  try {
    est = rmse(simulate_nlss(m, data.est.u).y, data.est.y);
  } catch (const DivergenceError&) {
  }
  std::cout << "rmse est " << sig4(est) << "  val " << sig4(validation_rmse(m, data.val, data.u_rest)) << "\n";
  return 0;
}

int cmd_pipeline(const CommonFlags& f, bool init_only, bool select_at_init) {
  PipelineConfig c = load_config(f);
  c.init_only = c.init_only || init_only;
  c.select_at_init = c.select_at_init || select_at_init;
  const RunReport r = run_pipeline(c);
  emit_report(r, f.out);
  std::size_t ok = 0;
  for (const CellResult& cell : r.cells) ok += cell.status == CellStatus::ok;
  std::cout << "cells " << r.cells.size() << " (ok " << ok << ")\n";
  std::cout << "BLA rmse est " << sig4(r.bla_rmse_est) << "  val " << sig4(r.bla_rmse_val) << "\n";
  if (!r.best) {
    std::cerr << "no grid cell completed\n";
    return 2;
  }
  const CellResult& b = r.cells[*r.best];
  std::cout << "best lambda=" << sig4(b.lambda) << " n=" << b.n_f << " seed=" << b.seed << "\n";
  std::cout << "  initialized rmse est " << sig4(b.rmse_init_est) << "  val " << sig4(b.rmse_init_val) << "\n";
  if (!c.init_only)
    std::cout << "  optimized   rmse est " << sig4(b.rmse_opt_est) << "  val " << sig4(b.rmse_opt_val) << "\n";
  std::cout << "report written to " << f.out << "\n";
  return 0;
}

int cmd_compare(const CommonFlags& f) {
  const ComparisonReport r = run_init_comparison(load_config(f));
  emit_comparison(r, f.out);
  std::cout << "BLA rmse val " << sig4(r.bla_rmse_val) << "\n";
  bool any = false;
  for (const ArmSummary& a : r.arms) {
    any = any || a.completed > 0;
    std::cout << to_string(a.arm) << ": completed " << a.completed << "  mean " << sig4(a.mean) << "  std "
              << sig4(a.std) << "  median " << sig4(a.median) << "\n";
  }
  return any ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear state-space identification with state-estimate initialization"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string model_path;
  bool init_only = false, select_at_init = false;

  auto* gen = app.add_subcommand("gen", "Write a synthetic Wiener-Hammerstein dataset");
  add_common(gen, f, false);
  auto* bla = app.add_subcommand("bla", "Estimate the best linear approximation");
  add_common(bla, f, false);
  auto* init = app.add_subcommand("init", "Initialize one model (first lambda and neuron count of the config)");
  add_common(init, f, false);
  auto* opt = app.add_subcommand("optimize", "Optimize a model on the estimation record");
  add_common(opt, f, false);
  opt->add_option("--model", model_path, "NlssModel JSON")->required()->check(CLI::ExistingFile);
  auto* pipe = app.add_subcommand("pipeline", "Run the lambda/neuron grid");
  add_common(pipe, f, true);
  pipe->add_flag("--init-only", init_only, "Skip the optimization stage");
  pipe->add_flag("--select-at-init", select_at_init, "Select the best cell by initialized validation RMSE");
  auto* cmp = app.add_subcommand("compare-init", "Compare Linear/Random, Linear/MLP and proposed initializations");
  add_common(cmp, f, true);
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the configured data");
  add_common(eval, f, false);
  eval->add_option("--model", model_path, "NlssModel JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen(f);
    if (bla->parsed()) return cmd_bla(f);
    if (init->parsed()) return cmd_init(f);
    if (opt->parsed()) return cmd_optimize(f, model_path);
    if (pipe->parsed()) return cmd_pipeline(f, init_only, select_at_init);
    if (cmp->parsed()) return cmd_compare(f);
    if (eval->parsed()) return cmd_eval(f, model_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
