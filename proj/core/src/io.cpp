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

#include "nlssinit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

#include "nlssinit/error.hpp"

namespace nlssinit {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ParseError("record CSV line " + std::to_string(line) + ": cannot parse '" + std::string(field) + "'", line);
  return v;
}

bool is_channel(std::string_view name, char prefix, int index) {
  return name == std::string(1, prefix) + std::to_string(index);
}

}  // namespace

IoRecord read_record_csv(std::istream& in, RecordRole role) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("record CSV: missing header", 1);
  ++lineno;
  const auto header = split(line);
  if (header.empty() || header[0] != "t") throw ParseError("record CSV: header must start with 't'", 1);
  int nu = 0, ny = 0;
  std::size_t col = 1;
  while (col < header.size() && is_channel(header[col], 'u', nu + 1)) ++nu, ++col;
  while (col < header.size() && is_channel(header[col], 'y', ny + 1)) ++ny, ++col;
  if (col != header.size() || nu == 0 || ny == 0)
    throw ParseError("record CSV: header must read t,u1..u{n_u},y1..y{n_y}", 1);

  std::vector<double> t, values;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw ParseError("record CSV line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       lineno);
    t.push_back(parse_double(fields[0], lineno));
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const double v = parse_double(fields[i], lineno);
      if (!std::isfinite(v))
        throw ParseError("record CSV line " + std::to_string(lineno) + ": non-finite value", lineno);
      values.push_back(v);
    }
  }
  const Eigen::Index N = static_cast<Eigen::Index>(t.size());
  if (N < 2) throw ParseError("record CSV: need at least 2 samples", lineno);
  IoRecord rec;
  rec.u.resize(N, nu);
  rec.y.resize(N, ny);
  const std::size_t width = static_cast<std::size_t>(nu + ny);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (int j = 0; j < nu; ++j) rec.u(i, j) = values[static_cast<std::size_t>(i) * width + j];
    for (int j = 0; j < ny; ++j) rec.y(i, j) = values[static_cast<std::size_t>(i) * width + nu + j];
  }
  rec.sample_period = t[1] - t[0];
  if (!(rec.sample_period > 0.0)) throw ParseError("record CSV: time column must be increasing", 3);
  rec.role = role;
  return rec;
}

IoRecord read_record_csv(const std::filesystem::path& path, RecordRole role) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_record_csv(in, role);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_record_csv(std::ostream& out, const IoRecord& record) {
  out << "t";
  for (int j = 1; j <= record.nu(); ++j) out << ",u" << j;
  for (int j = 1; j <= record.ny(); ++j) out << ",y" << j;
  out << '\n';
  for (int i = 0; i < record.length(); ++i) {
    out << format_double(i * record.sample_period);
    for (int j = 0; j < record.nu(); ++j) out << ',' << format_double(record.u(i, j));
    for (int j = 0; j < record.ny(); ++j) out << ',' << format_double(record.y(i, j));
    out << '\n';
  }
}

void write_record_csv(const std::filesystem::path& path, const IoRecord& record) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_record_csv(out, record);
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<LmTracePoint>& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,cost,damping,accepted\n";
  for (const auto& p : trace)
    out << p.iter << ',' << format_double(p.cost) << ',' << format_double(p.damping) << ',' << (p.accepted ? 1 : 0)
        << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ParseError(std::string(what) + ": expected " + std::to_string(rows) + " rows", 0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(std::string(what) + ": row " + std::to_string(i) + " must have " + std::to_string(cols) +
                           " entries",
                       0);
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw ParseError(std::string(what) + ": expected " + std::to_string(n) + " entries", 0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Matrix matrix_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected nested array", 0);
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  return matrix_from_json(j, rows, cols, what);
}

void to_json(nlohmann::json& j, const LtiModel& m) {
  j = nlohmann::json{{"n_x", m.nx()},
                     {"n_u", m.nu()},
                     {"n_y", m.ny()},
                     {"A", matrix_to_json(m.A())},
                     {"B", matrix_to_json(m.B())},
                     {"C", matrix_to_json(m.C())},
                     {"D", matrix_to_json(m.D())}};
}

void from_json(const nlohmann::json& j, LtiModel& m) {
  const int nx = j.at("n_x").get<int>();
  const int nu = j.at("n_u").get<int>();
  const int ny = j.at("n_y").get<int>();
  m = LtiModel(matrix_from_json(j.at("A"), nx, nx, "A"), matrix_from_json(j.at("B"), nx, nu, "B"),
               matrix_from_json(j.at("C"), ny, nx, "C"), matrix_from_json(j.at("D"), ny, nu, "D"));
}

void to_json(nlohmann::json& j, const TanhNet& n) {
  j = nlohmann::json{{"n_in", n.n_in()},
                     {"n_out", n.n_out()},
                     {"n_hidden", n.n_hidden()},
                     {"W_pos", matrix_to_json(n.W_pos())},
                     {"b_pos", vector_to_json(n.b_pos())},
                     {"W_amp", matrix_to_json(n.W_amp())}};
}

void from_json(const nlohmann::json& j, TanhNet& n) {
  const int n_in = j.at("n_in").get<int>();
  const int n_out = j.at("n_out").get<int>();
  const int h = j.at("n_hidden").get<int>();
  if (h == 0) {
    n = TanhNet(n_in, n_out, 0);
    return;
  }
  n = TanhNet(matrix_from_json(j.at("W_pos"), h, n_in, "W_pos"), vector_from_json(j.at("b_pos"), h, "b_pos"),
              matrix_from_json(j.at("W_amp"), n_out, h, "W_amp"));
}

void to_json(nlohmann::json& j, const NlssModel& m) {
  j = nlohmann::json{{"format_version", kNlssFormatVersion},
                     {"lin", m.lin},
                     {"f_nl", m.f_nl},
                     {"g_nl", m.g_nl},
                     {"x0", vector_to_json(m.x0)}};
}

void from_json(const nlohmann::json& j, NlssModel& m) {
  const int version = j.at("format_version").get<int>();
  if (version != kNlssFormatVersion)
    throw ParseError("NlssModel: unsupported format_version " + std::to_string(version), 0);
  m.lin = j.at("lin").get<LtiModel>();
  m.f_nl = j.at("f_nl").get<TanhNet>();
  m.g_nl = j.at("g_nl").get<TanhNet>();
  m.x0 = vector_from_json(j.at("x0"), m.lin.nx(), "x0");
  m.validate();
}

void to_json(nlohmann::json& j, const TransferFunction& tf) { j = nlohmann::json{{"num", tf.num}, {"den", tf.den}}; }

void from_json(const nlohmann::json& j, TransferFunction& tf) {
  tf.num = j.at("num").get<std::vector<double>>();
  tf.den = j.at("den").get<std::vector<double>>();
  tf.normalize();
}

void to_json(nlohmann::json& j, const Nonlinearity& nl) {
  j = nlohmann::json{{"kind", to_string(nl.kind)}};
  switch (nl.kind) {
    case Nonlinearity::Kind::diode_soft:
      j["knee"] = nl.knee;
      j["sharpness"] = nl.sharpness;
      break;
    case Nonlinearity::Kind::tanh:
      j["gain"] = nl.gain;
      break;
    default:
      break;
  }
}

void from_json(const nlohmann::json& j, Nonlinearity& nl) {
  nl = Nonlinearity{};
  nl.kind = nonlinearity_kind_from_string(j.at("kind").get<std::string>());
  nl.knee = j.value("knee", nl.knee);
  nl.sharpness = j.value("sharpness", nl.sharpness);
  nl.gain = j.value("gain", nl.gain);
}

void to_json(nlohmann::json& j, const WhConfig& c) {
  j = nlohmann::json{{"lti_front", c.lti_front},
                     {"lti_back", c.lti_back},
                     {"nonlinearity", c.nonlinearity},
                     {"input_bandwidth_fraction", c.input_bandwidth_fraction},
                     {"input_std", c.input_std},
                     {"input_filter_order", c.input_filter_order},
                     {"N_est", c.N_est},
                     {"N_val", c.N_val},
                     {"noise_std", c.noise_std},
                     {"sample_period", c.sample_period},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, WhConfig& c) {
  c = WhConfig::defaults();
  if (j.contains("lti_front")) c.lti_front = j.at("lti_front").get<TransferFunction>();
  if (j.contains("lti_back")) c.lti_back = j.at("lti_back").get<TransferFunction>();
  if (j.contains("nonlinearity")) c.nonlinearity = j.at("nonlinearity").get<Nonlinearity>();
  c.input_bandwidth_fraction = j.value("input_bandwidth_fraction", c.input_bandwidth_fraction);
  c.input_std = j.value("input_std", c.input_std);
  c.input_filter_order = j.value("input_filter_order", c.input_filter_order);
  c.N_est = j.value("N_est", c.N_est);
  c.N_val = j.value("N_val", c.N_val);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.sample_period = j.value("sample_period", c.sample_period);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const LmSettings& s) {
  j = nlohmann::json{{"max_iter", s.max_iter},
                     {"rel_tol", s.rel_tol},
                     {"step_tol", s.step_tol},
                     {"initial_damping", s.initial_damping},
                     {"damping_factor", s.damping_factor},
                     {"max_damping", s.max_damping}};
}

void from_json(const nlohmann::json& j, LmSettings& s) {
  s = LmSettings{};
  s.max_iter = j.value("max_iter", s.max_iter);
  s.rel_tol = j.value("rel_tol", s.rel_tol);
  s.step_tol = j.value("step_tol", s.step_tol);
  s.initial_damping = j.value("initial_damping", s.initial_damping);
  s.damping_factor = j.value("damping_factor", s.damping_factor);
  s.max_damping = j.value("max_damping", s.max_damping);
}

}  // namespace nlssinit
