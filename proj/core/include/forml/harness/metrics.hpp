// Copyright 2026 The FORML Authors
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
#include <span>
#include <string>
#include <vector>

#include "forml/meta.hpp"

namespace forml::harness {

inline constexpr const char* kMetricsHeader =
    "iter,meta_loss,query_acc,inner_time_s,outer_time_s,orth_residual";

/// One CSV row, 17 significant digits, no newline.
std::string format_metrics_row(const meta::MetricsRecord& r);

/// Header plus one row per record. IoError names the path on failure.
void write_metrics(const std::filesystem::path& path, std::span<const meta::MetricsRecord> records);

/// Trailing marker rows appended after the data rows.
void append_summary(const std::filesystem::path& path, const meta::EvalResult& result);
void append_abort(const std::filesystem::path& path, int iteration, const std::string& reason);

/// Data rows of a metrics file; marker rows (leading '#') are skipped.
std::vector<meta::MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace forml::harness
