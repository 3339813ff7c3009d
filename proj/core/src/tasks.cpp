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

#include "forml/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "forml/errors.hpp"

namespace forml::tasks {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::MetaTrain: return "meta-train";
    case Split::MetaVal: return "meta-val";
    case Split::MetaTest: return "meta-test";
  }
  return "unknown";
}

TaskBank::TaskBank(Split split, std::size_t input_dim, std::vector<ClassEntry> classes)
    : split_(split), input_dim_(input_dim), classes_(std::move(classes)) {
  for (const ClassEntry& c : classes_) {
    if (c.empirical() ? c.samples.cols() != input_dim_ : c.mean.size() != input_dim_) {
      throw ShapeError("TaskBank: class " + std::to_string(c.id) + " has the wrong dimension");
    }
  }
}

std::vector<int> TaskBank::class_ids() const {
  std::vector<int> ids;
  ids.reserve(classes_.size());
  for (const ClassEntry& c : classes_) ids.push_back(c.id);
  return ids;
}

std::array<std::size_t, 3> split_sizes(std::size_t classes, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions sum to " + std::to_string(total) + ", expected 1");
  }
  std::array<std::size_t, 3> sizes{};
  sizes[0] = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(classes)));
  sizes[1] = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(classes)));
  if (sizes[0] + sizes[1] > classes) throw ConfigError("split fractions leave no meta-test classes");
  sizes[2] = classes - sizes[0] - sizes[1];
  for (std::size_t s : sizes)
    if (s == 0) {
      throw ConfigError("infeasible split: " + std::to_string(classes) +
                        " classes leave an empty split");
    }
  return sizes;
}

namespace {

BankSplits partition(std::vector<ClassEntry> entries, std::size_t dim,
                     const std::array<double, 3>& fractions, Rng& rng) {
  const auto sizes = split_sizes(entries.size(), fractions);
  std::shuffle(entries.begin(), entries.end(), rng.engine());
  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<ClassEntry> part(entries.begin() + static_cast<std::ptrdiff_t>(begin),
                                 entries.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(part.begin(), part.end(),
              [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
    return part;
  };
  return {TaskBank(Split::MetaTrain, dim, take(0, sizes[0])),
          TaskBank(Split::MetaVal, dim, take(sizes[0], sizes[1])),
          TaskBank(Split::MetaTest, dim, take(sizes[0] + sizes[1], sizes[2]))};
}

}  // namespace

BankSplits make_bank(std::size_t classes, std::size_t input_dim, double sigma,
                     const std::array<double, 3>& fractions, std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("make_bank: input_dim must be positive");
  if (!(sigma >= 0.0)) throw ConfigError("make_bank: sigma must be non-negative");
  split_sizes(classes, fractions);
  Rng rng(seed);
  std::vector<ClassEntry> entries;
  entries.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> mean(input_dim);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : mean) {
        v = rng.normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : mean) v /= norm;
    entries.push_back({static_cast<int>(c), std::move(mean), sigma, Matrix()});
  }
  return partition(std::move(entries), input_dim, fractions, rng);
}

Episode sample_episode(const TaskBank& bank, std::size_t ways, std::size_t shots,
                       std::size_t queries, Rng& rng) {
  if (ways == 0 || shots == 0 || queries == 0) {
    throw ConfigError("sample_episode: ways, shots and queries must be positive");
  }
  if (ways > bank.num_classes()) {
    throw ConfigError("sample_episode: " + std::to_string(ways) + "-way episode from a bank of " +
                      std::to_string(bank.num_classes()) + " classes");
  }
  std::vector<std::size_t> order(bank.num_classes());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  order.resize(ways);

  const std::size_t d = bank.input_dim();
  Matrix support(ways * shots, d), query(ways * queries, d);
  std::vector<int> support_labels(ways * shots), query_labels(ways * queries);
  std::vector<int> class_map(ways);

  for (std::size_t label = 0; label < ways; ++label) {
    const ClassEntry& cls = bank.classes()[order[label]];
    class_map[label] = cls.id;
    std::vector<std::vector<double>> draws;
    if (cls.empirical()) {
      if (cls.samples.rows() < shots + queries) {
        throw DataError("class " + std::to_string(cls.id) + " has " +
                        std::to_string(cls.samples.rows()) + " samples, episode needs " +
                        std::to_string(shots + queries));
      }
      std::vector<std::size_t> rows(cls.samples.rows());
      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), rng.engine());
      for (std::size_t s = 0; s < shots + queries; ++s) {
        auto r = cls.samples.row(rows[s]);
        draws.emplace_back(r.begin(), r.end());
      }
    } else {
      for (std::size_t s = 0; s < shots + queries; ++s) {
        std::vector<double> x(cls.mean);
        for (double& v : x) v += cls.sigma * rng.normal();
        draws.push_back(std::move(x));
      }
    }
    for (std::size_t s = 0; s < shots; ++s) {
      const std::size_t row = label * shots + s;
      std::copy(draws[s].begin(), draws[s].end(), support.data().begin() + static_cast<std::ptrdiff_t>(row * d));
      support_labels[row] = static_cast<int>(label);
    }
    for (std::size_t s = 0; s < queries; ++s) {
      const std::size_t row = label * queries + s;
      std::copy(draws[shots + s].begin(), draws[shots + s].end(),
                query.data().begin() + static_cast<std::ptrdiff_t>(row * d));
      query_labels[row] = static_cast<int>(label);
    }
  }

  auto shuffled = [&](const Matrix& x, const std::vector<int>& labels) {
    std::vector<std::size_t> perm(labels.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    model::Batch b{Matrix(x.rows(), x.cols()), std::vector<int>(labels.size()), ways};
    for (std::size_t i = 0; i < perm.size(); ++i) {
      auto src = x.row(perm[i]);
      std::copy(src.begin(), src.end(), b.features.data().begin() + static_cast<std::ptrdiff_t>(i * x.cols()));
      b.labels[i] = labels[perm[i]];
    }
    return b;
  };
  Episode ep;
  ep.support = shuffled(support, support_labels);
  ep.query = shuffled(query, query_labels);
  ep.class_map = std::move(class_map);
  return ep;
}

TaskBank LabeledDataset::to_bank(Split split) const { return TaskBank(split, dim, classes); }

BankSplits LabeledDataset::split(const std::array<double, 3>& fractions, std::uint64_t seed) const {
  Rng rng(seed);
  return partition(classes, dim, fractions, rng);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

LabeledDataset parse_dataset(std::string_view text) {
  LabeledDataset data;
  std::size_t declared_classes = 0;
  bool have_header = false;
  std::map<int, std::vector<std::vector<double>>> rows;

  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    if (!have_header) {
      constexpr std::string_view kPrefix = "header:";
      if (line.substr(0, kPrefix.size()) != kPrefix) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": expected 'header: d=<int> classes=<int>'", line_no);
      }
      std::istringstream fields{std::string(line.substr(kPrefix.size()))};
      std::string tok;
      bool got_d = false, got_c = false;
      while (fields >> tok) {
        const auto eq = tok.find('=');
        const std::string_view key = std::string_view(tok).substr(0, eq);
        const std::string_view val = eq == std::string::npos ? std::string_view() : std::string_view(tok).substr(eq + 1);
        if (key == "d" && parse_number(val, data.dim)) got_d = true;
        else if (key == "classes" && parse_number(val, declared_classes)) got_c = true;
        else throw ParseError("dataset line " + std::to_string(line_no) + ": bad header field '" + tok + "'", line_no);
      }
      if (!got_d || !got_c || data.dim == 0) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": header needs d and classes", line_no);
      }
      have_header = true;
      continue;
    }

    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (cells.size() != data.dim + 1) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected " +
                           std::to_string(data.dim + 1) + " fields, got " + std::to_string(cells.size()),
                       line_no);
    }
    int id = 0;
    if (!parse_number(cells[0], id)) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": bad class id '" + std::string(trim(cells[0])) + "'", line_no);
    }
    std::vector<double> features(data.dim);
    for (std::size_t j = 0; j < data.dim; ++j) {
      if (!parse_number(cells[j + 1], features[j]) || !std::isfinite(features[j])) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": non-numeric feature " +
                             std::to_string(j + 1) + " '" + std::string(trim(cells[j + 1])) + "'",
                         line_no);
      }
    }
    rows[id].push_back(std::move(features));
  }

  if (!have_header) throw ParseError("dataset: missing header line", 0);
  if (rows.size() != declared_classes) {
    throw DataError("dataset: header declares " + std::to_string(declared_classes) +
                    " classes, found " + std::to_string(rows.size()));
  }
  for (auto& [id, samples] : rows) {
    if (samples.size() < 2) {
      throw DataError("dataset: class " + std::to_string(id) + " has fewer than 2 samples");
    }
    ClassEntry entry;
    entry.id = id;
    entry.samples = Matrix(samples.size(), data.dim);
    for (std::size_t i = 0; i < samples.size(); ++i)
      std::copy(samples[i].begin(), samples[i].end(),
                entry.samples.data().begin() + static_cast<std::ptrdiff_t>(i * data.dim));
    data.classes.push_back(std::move(entry));
  }
  return data;
}

LabeledDataset load_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void write_dataset_file(const std::filesystem::path& path, const LabeledDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  out << "header: d=" << data.dim << " classes=" << data.classes.size() << '\n';
  out.precision(17);
  for (const ClassEntry& c : data.classes) {
    for (std::size_t i = 0; i < c.samples.rows(); ++i) {
      out << c.id;
      for (double v : c.samples.row(i)) out << ',' << v;
      out << '\n';
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace forml::tasks
