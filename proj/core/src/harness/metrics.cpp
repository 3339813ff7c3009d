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

#include "forml/harness/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "forml/errors.hpp"

namespace forml::harness {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_for(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string format_metrics_row(const meta::MetricsRecord& r) {
  return std::to_string(r.iteration) + "," + g17(r.meta_loss) + "," + g17(r.query_accuracy) + "," +
         g17(r.inner_time_s) + "," + g17(r.outer_time_s) + "," + g17(r.head_orthonormality_residual);
}

void write_metrics(const std::filesystem::path& path, std::span<const meta::MetricsRecord> records) {
  auto out = open_for(path, std::ios::trunc);
  out << kMetricsHeader << '\n';
  for (const auto& r : records) out << format_metrics_row(r) << '\n';
  finish(out, path);
}

void append_summary(const std::filesystem::path& path, const meta::EvalResult& result) {
  auto out = open_for(path, std::ios::app);
  out << "#summary," << g17(result.mean_accuracy) << ',' << g17(result.ci95) << ','
      << result.accuracies.size() << '\n';
  finish(out, path);
}

void append_abort(const std::filesystem::path& path, int iteration, const std::string& reason) {
  std::string clean = reason;
  for (char& c : clean) {
    if (c == ',' || c == '\n') c = ' ';
  }
  auto out = open_for(path, std::ios::app);
  out << "#abort," << iteration << ',' << clean << '\n';
  finish(out, path);
}

std::vector<meta::MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError("metrics file '" + path.string() + "': bad header", 1);
  }
  std::vector<meta::MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    meta::MetricsRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &r.iteration, &r.meta_loss, &r.query_accuracy,
                    &r.inner_time_s, &r.outer_time_s, &r.head_orthonormality_residual) != 6) {
      throw ParseError("metrics file '" + path.string() + "': malformed row", line_no);
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace forml::harness
