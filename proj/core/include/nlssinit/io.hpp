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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlssinit/bench.hpp"
#include "nlssinit/levenberg_marquardt.hpp"
#include "nlssinit/lti.hpp"
#include "nlssinit/nlss.hpp"
#include "nlssinit/tanh_net.hpp"

namespace nlssinit {

/// Version written into serialized NlssModel documents.
inline constexpr int kNlssFormatVersion = 1;

// IoRecord CSV: header `t,u1..u{n_u},y1..y{n_y}`, one row per sample, t in seconds.
IoRecord read_record_csv(std::istream& in, RecordRole role = RecordRole::estimation);
IoRecord read_record_csv(const std::filesystem::path& path, RecordRole role = RecordRole::estimation);
void write_record_csv(std::ostream& out, const IoRecord& record);
void write_record_csv(const std::filesystem::path& path, const IoRecord& record);

/// Shortest decimal string that round-trips the double.
std::string format_double(double v);

/// Cost trace as CSV `iter,cost,damping,accepted`.
void write_trace_csv(const std::filesystem::path& path, const std::vector<LmTracePoint>& trace);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// nlohmann::json ADL hooks. Matrices are row-major nested arrays.
void to_json(nlohmann::json& j, const LtiModel& m);
void from_json(const nlohmann::json& j, LtiModel& m);
void to_json(nlohmann::json& j, const TanhNet& n);
void from_json(const nlohmann::json& j, TanhNet& n);
void to_json(nlohmann::json& j, const NlssModel& m);
void from_json(const nlohmann::json& j, NlssModel& m);
void to_json(nlohmann::json& j, const TransferFunction& tf);
void from_json(const nlohmann::json& j, TransferFunction& tf);
void to_json(nlohmann::json& j, const Nonlinearity& nl);
void from_json(const nlohmann::json& j, Nonlinearity& nl);
void to_json(nlohmann::json& j, const WhConfig& c);
void from_json(const nlohmann::json& j, WhConfig& c);
void to_json(nlohmann::json& j, const LmSettings& s);
void from_json(const nlohmann::json& j, LmSettings& s);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const char* what);

}  // namespace nlssinit
