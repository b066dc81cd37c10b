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

#include "nlssinit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "nlssinit/error.hpp"
#include "nlssinit/io.hpp"

namespace nlssinit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using json = nlohmann::json;

// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first exception
// thrown by any job is rethrown after all threads have joined.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::string csv_double(double v) { return std::isnan(v) ? std::string() : format_double(v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

std::string cell_tag(std::size_t index) {
  std::ostringstream s;
  s << "cell_";
  s.width(4);
  s.fill('0');
  s << index;
  return s.str();
}

void zero_amplitudes(TanhNet& net) { net.set_amplitudes(Matrix::Zero(net.n_out(), net.n_hidden())); }

struct Optimized {
  NlssFit fit;
  double rmse_est = kNaN;
  double rmse_val = kNaN;
  CellStatus status = CellStatus::ok;
  std::string message;
};

Optimized optimize_and_score(const NlssModel& start, const PreparedData& data, const LmSettings& lm) {
  Optimized o;
  try {
    OptimizeOptions opts;
    opts.lm = lm;
    o.fit = optimize_nlss(start, data.est, opts);
    o.rmse_est = std::sqrt(o.fit.cost);
    o.rmse_val = validation_rmse(o.fit.model, data.val, data.u_rest);
    if (o.fit.status == LmStatus::stalled) {
      o.status = CellStatus::stalled;
      o.message = "damping limit reached";
    }
    if (!std::isfinite(o.rmse_val)) {
      o.status = CellStatus::diverged;
      o.message = "optimized model diverges on validation input";
    }
  } catch (const DivergenceError& e) {
    o.status = CellStatus::diverged;
    o.message = e.what();
  } catch (const Error& e) {
    o.status = CellStatus::error;
    o.message = e.what();
  }
  return o;
}

}  // namespace

void PipelineConfig::validate() const {
  if (lambdas.empty()) throw InvalidArgument("pipeline: lambda grid is empty");
  if (neurons.empty()) throw InvalidArgument("pipeline: neuron grid is empty");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidArgument("pipeline: lambda values must be positive and finite");
  for (int n : neurons)
    if (n < 0) throw InvalidArgument("pipeline: neuron counts must be non-negative");
  if (n_x < 1) throw InvalidArgument("pipeline: n_x must be at least 1");
  if (n_restarts < 1) throw InvalidArgument("pipeline: n_restarts must be at least 1");
  if (jobs < 1) throw InvalidArgument("pipeline: jobs must be at least 1");
  if (!(comparison_lambda > 0.0)) throw InvalidArgument("pipeline: comparison_lambda must be positive");
  if (comparison_neurons < 1) throw InvalidArgument("pipeline: comparison_neurons must be at least 1");
  if (lm.max_iter < 0) throw InvalidArgument("pipeline: lm.max_iter must be non-negative");
  if (data.kind == DataSource::Kind::generate) {
    data.generate.validate();
  } else {
    if (data.path.empty()) throw InvalidArgument("pipeline: data file path is empty");
    if (!std::filesystem::is_regular_file(data.path)) throw IoError("pipeline: data file not found: " + data.path.string());
  }
}

void to_json(json& j, const PipelineConfig& c) {
  json data;
  if (c.data.kind == DataSource::Kind::generate) {
    data["kind"] = "generate";
    data["generate"] = c.data.generate;
  } else {
    data["kind"] = "file";
    data["path"] = c.data.path.string();
    data["split"] = {{"n_est", c.data.split.n_est},
                     {"n_val", c.data.split.n_val},
                     {"est_offset", c.data.split.est_offset},
                     {"val_offset", c.data.split.val_offset}};
  }
  data["remove_dc"] = c.data.remove_dc;
  j = json{{"data", data},
           {"n_x", c.n_x},
           {"lambdas", c.lambdas},
           {"neurons", c.neurons},
           {"n_restarts", c.n_restarts},
           {"seed", c.seed},
           {"bla",
            {{"fir_taps", c.bla.fir_taps},
             {"max_condition", c.bla.max_condition},
             {"fir_ridge", c.bla.fir_ridge},
             {"refine_iterations", c.bla.refine_iterations},
             {"stability_radius", c.bla.stability_radius}}},
           {"static_fit", {{"max_iter", c.static_fit.max_iter}, {"rel_tol", c.static_fit.rel_tol}}},
           {"lm", c.lm},
           {"init_only", c.init_only},
           {"select_at_init", c.select_at_init},
           {"comparison_lambda", c.comparison_lambda},
           {"comparison_neurons", c.comparison_neurons},
           {"jobs", c.jobs}};
  if (!c.out_dir.empty()) j["out_dir"] = c.out_dir.string();
}

void from_json(const json& j, PipelineConfig& c) {
  c = PipelineConfig{};
  try {
    if (j.contains("data")) {
      const json& d = j.at("data");
      const std::string kind = d.value("kind", "generate");
      if (kind == "generate") {
        c.data.kind = DataSource::Kind::generate;
        if (d.contains("generate")) c.data.generate = d.at("generate").get<WhConfig>();
      } else if (kind == "file") {
        c.data.kind = DataSource::Kind::file;
        c.data.path = d.at("path").get<std::string>();
        if (d.contains("split")) {
          const json& s = d.at("split");
          c.data.split.n_est = s.value("n_est", c.data.split.n_est);
          c.data.split.n_val = s.value("n_val", c.data.split.n_val);
          c.data.split.est_offset = s.value("est_offset", c.data.split.est_offset);
          c.data.split.val_offset = s.value("val_offset", c.data.split.val_offset);
        }
      } else {
        throw ParseError("pipeline config: unknown data kind '" + kind + "'", 0);
      }
      c.data.remove_dc = d.value("remove_dc", c.data.remove_dc);
    }
    c.n_x = j.value("n_x", c.n_x);
    if (j.contains("lambdas")) c.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("neurons")) c.neurons = j.at("neurons").get<std::vector<int>>();
    c.n_restarts = j.value("n_restarts", c.n_restarts);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bla")) {
      const json& b = j.at("bla");
      c.bla.fir_taps = b.value("fir_taps", c.bla.fir_taps);
      c.bla.max_condition = b.value("max_condition", c.bla.max_condition);
      c.bla.fir_ridge = b.value("fir_ridge", c.bla.fir_ridge);
      c.bla.refine_iterations = b.value("refine_iterations", c.bla.refine_iterations);
      c.bla.stability_radius = b.value("stability_radius", c.bla.stability_radius);
    }
    if (j.contains("static_fit")) {
      const json& s = j.at("static_fit");
      c.static_fit.max_iter = s.value("max_iter", c.static_fit.max_iter);
      c.static_fit.rel_tol = s.value("rel_tol", c.static_fit.rel_tol);
    }
    if (j.contains("lm")) c.lm = j.at("lm").get<LmSettings>();
    c.init_only = j.value("init_only", c.init_only);
    c.select_at_init = j.value("select_at_init", c.select_at_init);
    c.comparison_lambda = j.value("comparison_lambda", c.comparison_lambda);
    c.comparison_neurons = j.value("comparison_neurons", c.comparison_neurons);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what(), 0);
  }
}

PreparedData prepare_data(const DataSource& source) {
  BenchmarkData d;
  if (source.kind == DataSource::Kind::generate) {
    WhData g = generate_wh(source.generate);
    d.est = std::move(g.est);
    d.val = std::move(g.val);
    d.dc_u = Vector::Zero(d.est.nu());
    d.dc_y = Vector::Zero(d.est.ny());
    if (source.remove_dc) {
      d.dc_u = d.est.u.colwise().mean().transpose();
      d.dc_y = d.est.y.colwise().mean().transpose();
      d.est.u.rowwise() -= d.dc_u.transpose();
      d.val.u.rowwise() -= d.dc_u.transpose();
      d.est.y.rowwise() -= d.dc_y.transpose();
      d.val.y.rowwise() -= d.dc_y.transpose();
    }
  } else {
    BenchmarkSplit split = source.split;
    split.remove_dc = source.remove_dc;
    d = load_benchmark(source.path, split);
  }
  Vector u_rest = -d.dc_u;
  return PreparedData{std::move(d.est), std::move(d.val), std::move(d.dc_u), std::move(d.dc_y), std::move(u_rest)};
}

double validation_rmse(const NlssModel& model, const IoRecord& val, const Vector& u_rest) {
  NlssModel m = model;
  m.x0 = rest_state(model, u_rest).value_or(Vector::Zero(model.nx()));
  try {
    return rmse(simulate_nlss(m, val.u).y, val.y);
  } catch (const DivergenceError&) {
    return kInf;
  }
}

double validation_rmse(const LtiModel& model, const IoRecord& val, const Vector& u_rest) {
  return validation_rmse(NlssModel::from_linear(model, 0, 0), val, u_rest);
}

std::string to_string(CellStatus status) {
  switch (status) {
    case CellStatus::ok: return "ok";
    case CellStatus::diverged: return "diverged";
    case CellStatus::stalled: return "stalled";
    case CellStatus::error: return "error";
  }
  return "unknown";
}

std::string to_string(InitArm arm) {
  switch (arm) {
    case InitArm::linear_random: return "linear_random";
    case InitArm::linear_mlp: return "linear_mlp";
    case InitArm::proposed: return "proposed";
  }
  return "unknown";
}

double RunReport::selection_rmse(const CellResult& cell) const {
  return (config.init_only || config.select_at_init) ? cell.rmse_init_val : cell.rmse_opt_val;
}

double median(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }), values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RunReport run_pipeline(const PipelineConfig& config) {
  config.validate();
  const PreparedData data = prepare_data(config.data);

  RunReport report;
  report.config = config;
  const BlaResult bla = estimate_bla(data.est, config.n_x, config.bla);
  report.bla = bla.model;
  report.bla_rmse_est = bla.rmse_est;
  report.bla_rmse_val = validation_rmse(bla.model, data.val, data.u_rest);
  report.bla_stabilized = bla.stabilized;

  // One state trajectory per lambda, shared by every cell at that lambda.
  std::vector<std::optional<StateTrajectory>> trajectories(config.lambdas.size());
  std::vector<std::string> trajectory_errors(config.lambdas.size());
  for (std::size_t k = 0; k < config.lambdas.size(); ++k) {
    LambdaCostRow row;
    row.lambda = config.lambdas[k];
    try {
      trajectories[k] = estimate_state(data.est, bla.model, row.lambda);
      row.e_y = trajectories[k]->e_y;
      row.e_x = trajectories[k]->e_x;
      const double total = row.e_y + row.e_x;
      row.relative_weight = total > 0.0 ? row.e_y / total : 0.0;
    } catch (const Error& e) {
      trajectory_errors[k] = e.what();
      row.e_y = row.e_x = row.relative_weight = kNaN;
    }
    report.lambda_costs.push_back(row);
  }

  for (double l : config.lambdas)
    for (int n : config.neurons)
      for (int r = 0; r < config.n_restarts; ++r) {
        CellResult c;
        c.lambda = l;
        c.n_f = c.n_g = n;
        c.seed = config.seed + static_cast<std::uint64_t>(r);
        c.rmse_init_est = c.rmse_init_val = c.rmse_opt_est = c.rmse_opt_val = kNaN;
        report.cells.push_back(std::move(c));
      }

  const std::size_t per_lambda = config.neurons.size() * static_cast<std::size_t>(config.n_restarts);
  parallel_for(report.cells.size(), config.jobs, [&](std::size_t i) {
    CellResult& c = report.cells[i];
    const std::size_t k = i / per_lambda;
    if (!trajectories[k]) {
      c.status = CellStatus::error;
      c.message = "state estimation failed: " + trajectory_errors[k];
      return;
    }
    try {
      InitOptions init;
      init.static_fit = config.static_fit;
      NlssModel m = assemble_initialized(bla.model, *trajectories[k], data.est, c.n_f, c.n_g, c.seed, init);
      c.init_model = m;
      c.rmse_init_est = rmse(simulate_nlss(m, data.est.u).y, data.est.y);
      c.rmse_init_val = validation_rmse(m, data.val, data.u_rest);
    } catch (const DivergenceError& e) {
      c.status = CellStatus::diverged;
      c.message = std::string("initialized model: ") + e.what();
      return;
    } catch (const Error& e) {
      c.status = CellStatus::error;
      c.message = e.what();
      return;
    }
    if (!std::isfinite(c.rmse_init_val)) {
      c.status = CellStatus::diverged;
      c.message = "initialized model diverges on validation input";
    }
    if (config.init_only) return;
    Optimized o = optimize_and_score(*c.init_model, data, config.lm);
    c.rmse_opt_est = o.rmse_est;
    c.rmse_opt_val = o.rmse_val;
    c.trace = std::move(o.fit.trace);
    if (o.status != CellStatus::error && o.status != CellStatus::diverged) c.opt_model = std::move(o.fit.model);
    if (o.status != CellStatus::ok) {
      c.status = o.status;
      c.message = o.message;
    } else if (c.status == CellStatus::diverged) {
      // The optimizer repaired a divergent initialization.
      c.status = CellStatus::ok;
      c.message.clear();
    }
  });

  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const CellResult& c = report.cells[i];
    const double v = report.selection_rmse(c);
    if (c.status != CellStatus::ok || !std::isfinite(v)) continue;
    if (!report.best || v < report.selection_rmse(report.cells[*report.best])) report.best = i;
  }
  return report;
}

ComparisonReport run_init_comparison(const PipelineConfig& config) {
  config.validate();
  if (config.n_restarts < 10) throw InvalidArgument("compare-init: n_restarts must be at least 10");
  const PreparedData data = prepare_data(config.data);
  const BlaResult bla = estimate_bla(data.est, config.n_x, config.bla);
  const StateTrajectory traj = estimate_state(data.est, bla.model, config.comparison_lambda);

  const int n_in = bla.model.nx() + bla.model.nu();
  const int n = config.comparison_neurons;

  ComparisonReport report;
  report.config = config;
  report.bla_rmse_val = validation_rmse(bla.model, data.val, data.u_rest);
  constexpr InitArm kArms[] = {InitArm::linear_random, InitArm::linear_mlp, InitArm::proposed};
  for (int r = 0; r < config.n_restarts; ++r)
    for (InitArm arm : kArms) {
      ArmRun run;
      run.arm = arm;
      run.seed = config.seed + static_cast<std::uint64_t>(r);
      run.rmse_init_val = run.rmse_opt_est = run.rmse_opt_val = kNaN;
      report.runs.push_back(run);
    }

  InitOptions init;
  init.static_fit = config.static_fit;
  parallel_for(report.runs.size(), config.jobs, [&](std::size_t i) {
    ArmRun& run = report.runs[i];
    NlssModel start;
    try {
      if (run.arm == InitArm::linear_random) {
        start = NlssModel::from_linear(bla.model, n, n, bla.x0);
        const NeuronPositions pf = random_positions(n_in, n, run.seed);
        const NeuronPositions pg = random_positions(n_in, n, g_seed(run.seed));
        start.f_nl.set_positions(pf.W_pos, pf.b_pos);
        start.g_nl.set_positions(pg.W_pos, pg.b_pos);
      } else {
        start = assemble_initialized(bla.model, traj, data.est, n, n, run.seed, init);
        if (run.arm == InitArm::linear_mlp) {
          zero_amplitudes(start.f_nl);
          zero_amplitudes(start.g_nl);
        }
      }
    } catch (const Error& e) {
      run.status = CellStatus::error;
      run.message = e.what();
      return;
    }
    run.rmse_init_val = validation_rmse(start, data.val, data.u_rest);
    Optimized o = optimize_and_score(start, data, config.lm);
    run.rmse_opt_est = o.rmse_est;
    run.rmse_opt_val = o.rmse_val;
    run.status = o.status;
    run.message = o.message;
  });

  for (InitArm arm : kArms) {
    std::vector<double> v;
    for (const ArmRun& run : report.runs)
      if (run.arm == arm && std::isfinite(run.rmse_opt_val)) v.push_back(run.rmse_opt_val);
    ArmSummary s;
    s.arm = arm;
    s.completed = static_cast<int>(v.size());
    if (v.empty()) {
      s.mean = s.std = s.median = kNaN;
    } else {
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      s.median = median(v);
    }
    report.arms.push_back(s);
  }
  return report;
}

std::string summary_csv(const RunReport& report) {
  std::ostringstream s;
  s << "lambda,n_f,n_g,seed,rmse_init_est,rmse_init_val,rmse_opt_est,rmse_opt_val,status\n";
  for (const CellResult& c : report.cells)
    s << format_double(c.lambda) << ',' << c.n_f << ',' << c.n_g << ',' << c.seed << ',' << csv_double(c.rmse_init_est)
      << ',' << csv_double(c.rmse_init_val) << ',' << csv_double(c.rmse_opt_est) << ',' << csv_double(c.rmse_opt_val)
      << ',' << to_string(c.status) << '\n';
  return s.str();
}

void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  ensure_dir(dir);
  ensure_dir(dir / "models");
  ensure_dir(dir / "traces");
  write_text(dir / "summary.csv", summary_csv(report));
  write_json(dir / "run_config.json", json(report.config));
  write_json(dir / "bla_model.json", json(report.bla));

  std::ostringstream scatter_init, scatter_opt;
  scatter_init << "lambda,n,seed,rmse_init_est,rmse_init_val\n";
  scatter_opt << "lambda,n,seed,rmse_opt_est,rmse_opt_val\n";
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    const CellResult& c = report.cells[i];
    scatter_init << format_double(c.lambda) << ',' << c.n_f << ',' << c.seed << ',' << csv_double(c.rmse_init_est)
                 << ',' << csv_double(c.rmse_init_val) << '\n';
    if (!report.config.init_only)
      scatter_opt << format_double(c.lambda) << ',' << c.n_f << ',' << c.seed << ',' << csv_double(c.rmse_opt_est)
                  << ',' << csv_double(c.rmse_opt_val) << '\n';
    const std::string tag = cell_tag(i);
    if (c.init_model) write_json(dir / "models" / (tag + "_init.json"), json(*c.init_model));
    if (c.opt_model) write_json(dir / "models" / (tag + "_opt.json"), json(*c.opt_model));
    if (!c.trace.empty()) write_trace_csv(dir / "traces" / (tag + ".csv"), c.trace);
  }
  write_text(dir / "scatter_init.csv", scatter_init.str());
  if (!report.config.init_only) write_text(dir / "scatter_opt.csv", scatter_opt.str());

  std::ostringstream costs;
  costs << "lambda,e_y,e_x,relative_weight\n";
  for (const LambdaCostRow& r : report.lambda_costs)
    costs << format_double(r.lambda) << ',' << csv_double(r.e_y) << ',' << csv_double(r.e_x) << ','
          << csv_double(r.relative_weight) << '\n';
  write_text(dir / "lambda_costs.csv", costs.str());

  std::ostringstream table;
  table << "model,rmse_est,rmse_val\n";
  table << "bla," << format_double(report.bla_rmse_est) << ',' << format_double(report.bla_rmse_val) << '\n';
  if (report.best) {
    const CellResult& b = report.cells[*report.best];
    table << "initialized," << csv_double(b.rmse_init_est) << ',' << csv_double(b.rmse_init_val) << '\n';
    if (!report.config.init_only)
      table << "optimized," << csv_double(b.rmse_opt_est) << ',' << csv_double(b.rmse_opt_val) << '\n';
    const bool use_init = report.config.init_only || report.config.select_at_init || !b.opt_model;
    json best = use_init ? json(*b.init_model) : json(*b.opt_model);
    best["cell"] = {{"lambda", b.lambda}, {"n_f", b.n_f}, {"n_g", b.n_g}, {"seed", b.seed},
                    {"stage", use_init ? "initialized" : "optimized"}, {"rmse_val", report.selection_rmse(b)}};
    write_json(dir / "best_model.json", best);
  }
  write_text(dir / "model_table.csv", table.str());
}

void emit_comparison(const ComparisonReport& report, const std::filesystem::path& dir) {
  ensure_dir(dir);
  write_json(dir / "run_config.json", json(report.config));
  std::ostringstream runs;
  runs << "arm,seed,rmse_init_val,rmse_opt_est,rmse_opt_val,status\n";
  for (const ArmRun& r : report.runs)
    runs << to_string(r.arm) << ',' << r.seed << ',' << csv_double(r.rmse_init_val) << ',' << csv_double(r.rmse_opt_est)
         << ',' << csv_double(r.rmse_opt_val) << ',' << to_string(r.status) << '\n';
  write_text(dir / "comparison_runs.csv", runs.str());
  std::ostringstream sum;
  sum << "arm,completed,mean,std,median\n";
  for (const ArmSummary& a : report.arms)
    sum << to_string(a.arm) << ',' << a.completed << ',' << csv_double(a.mean) << ',' << csv_double(a.std) << ','
        << csv_double(a.median) << '\n';
  write_text(dir / "comparison_summary.csv", sum.str());
}

}  // namespace nlssinit
