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

#include "forml/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "forml/errors.hpp"

namespace forml::harness {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Throws a bare message; the caller adds key and line.
struct BadValue {
  std::string message;
};

double read_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw BadValue{"expects a real number, got '" + std::string(s) + "'"};
  }
  return v;
}

template <typename T>
T read_integer(std::string_view s) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw BadValue{"expects an integer, got '" + std::string(s) + "'"};
  }
  return v;
}

template <typename E, std::size_t N>
E read_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  std::string valid;
  for (const auto& [name, value] : table) {
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  throw BadValue{"'" + std::string(s) + "' is not one of {" + valid + "}"};
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<std::string_view, meta::Engine>, 4> kEngines{{
    {"FORML", meta::Engine::Forml},
    {"FOMAML", meta::Engine::Fomaml},
    {"EXACT_EUCLID", meta::Engine::ExactEuclid},
    {"FD_RMAML", meta::Engine::FdRmaml},
}};
constexpr std::array<std::pair<std::string_view, manifold::ManifoldKind::Tag>, 2> kManifolds{{
    {"stiefel", manifold::ManifoldKind::Tag::Stiefel},
    {"euclidean", manifold::ManifoldKind::Tag::Euclidean},
}};
constexpr std::array<std::pair<std::string_view, manifold::RetractionMode>, 2> kRetractions{{
    {"polar", manifold::RetractionMode::Polar},
    {"additive", manifold::RetractionMode::Additive},
}};
constexpr std::array<std::pair<std::string_view, model::Activation>, 3> kActivations{{
    {"tanh", model::Activation::Tanh},
    {"relu", model::Activation::Relu},
    {"identity", model::Activation::Identity},
}};

struct Field {
  std::function<void(RunConfig&, std::string_view)> read;
  std::function<std::string(const RunConfig&)> write;
};

template <typename T>
Field int_field(T RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view s) { c.*member = read_integer<T>(s); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(double RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view s) { c.*member = read_double(s); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

template <typename E, std::size_t N>
Field enum_field(E RunConfig::*member, const std::array<std::pair<std::string_view, E>, N>& table) {
  return {[member, &table](RunConfig& c, std::string_view s) { c.*member = read_enum(s, table); },
          [member, &table](const RunConfig& c) { return std::string(enum_name(c.*member, table)); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view s) { c.*member = std::string(s); },
          [member](const RunConfig& c) { return c.*member; }};
}

// Ordered: the echo lists keys in this order.
const std::vector<std::pair<std::string_view, Field>>& fields() {
  static const std::vector<std::pair<std::string_view, Field>> table{
      {"engine", enum_field(&RunConfig::engine, kEngines)},
      {"manifold", enum_field(&RunConfig::manifold, kManifolds)},
      {"retraction", enum_field(&RunConfig::retraction, kRetractions)},
      {"alpha", double_field(&RunConfig::alpha)},
      {"beta_stiefel", double_field(&RunConfig::beta_stiefel)},
      {"beta_euclid", double_field(&RunConfig::beta_euclid)},
      {"inner_steps", int_field(&RunConfig::inner_steps)},
      {"batch_tasks", int_field(&RunConfig::batch_tasks)},
      {"weight_decay", double_field(&RunConfig::weight_decay)},
      {"hidden_dims",
       {[](RunConfig& c, std::string_view s) {
          std::vector<std::size_t> dims;
          for (std::string_view part : split_list(s)) dims.push_back(read_integer<std::size_t>(part));
          c.hidden_dims = std::move(dims);
        },
        [](const RunConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.hidden_dims.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(c.hidden_dims[i]);
          }
          return out;
        }}},
      {"activation", enum_field(&RunConfig::activation, kActivations)},
      {"logit_scale", double_field(&RunConfig::logit_scale)},
      {"ways", int_field(&RunConfig::ways)},
      {"shots", int_field(&RunConfig::shots)},
      {"queries", int_field(&RunConfig::queries)},
      {"sigma", double_field(&RunConfig::sigma)},
      {"input_dim", int_field(&RunConfig::input_dim)},
      {"classes", int_field(&RunConfig::classes)},
      {"split",
       {[](RunConfig& c, std::string_view s) {
          const auto parts = split_list(s);
          if (parts.size() != 3) throw BadValue{"expects three comma-separated fractions"};
          for (std::size_t i = 0; i < 3; ++i) c.split[i] = read_double(parts[i]);
        },
        [](const RunConfig& c) {
          return format_double(c.split[0]) + "," + format_double(c.split[1]) + "," +
                 format_double(c.split[2]);
        }}},
      {"dataset", string_field(&RunConfig::dataset)},
      {"outer_iters", int_field(&RunConfig::outer_iters)},
      {"eval_episodes", int_field(&RunConfig::eval_episodes)},
      {"seed", int_field(&RunConfig::seed)},
      {"output", string_field(&RunConfig::output)},
      {"fd_step", double_field(&RunConfig::fd_step)},
      {"bench_warmup", int_field(&RunConfig::bench_warmup)},
      {"bench_iters", int_field(&RunConfig::bench_iters)},
  };
  return table;
}

const Field* find_field(std::string_view key) {
  for (const auto& [name, field] : fields()) {
    if (name == key) return &field;
  }
  return nullptr;
}

void require(bool ok, std::string_view key, const std::string& message) {
  if (!ok) throw ConfigError("config key '" + std::string(key) + "': " + message);
}

}  // namespace

void RunConfig::validate() const {
  require(alpha > 0.0, "alpha", "must be > 0");
  require(beta_stiefel > 0.0, "beta_stiefel", "must be > 0");
  require(beta_euclid > 0.0, "beta_euclid", "must be > 0");
  require(inner_steps >= 1, "inner_steps", "must be >= 1");
  require(batch_tasks >= 1, "batch_tasks", "must be >= 1");
  require(weight_decay >= 0.0, "weight_decay", "must be >= 0");
  for (std::size_t d : hidden_dims) require(d >= 1, "hidden_dims", "every width must be >= 1");
  require(logit_scale > 0.0, "logit_scale", "must be > 0");
  require(ways >= 2, "ways", "must be >= 2");
  require(shots >= 1, "shots", "must be >= 1");
  require(queries >= 1, "queries", "must be >= 1");
  require(sigma >= 0.0, "sigma", "must be >= 0");
  require(input_dim >= 1, "input_dim", "must be >= 1");
  require(classes >= 3, "classes", "must be >= 3");
  require(outer_iters >= 1, "outer_iters", "must be >= 1");
  require(eval_episodes >= 2, "eval_episodes", "must be >= 2");
  require(fd_step > 0.0, "fd_step", "must be > 0");
  require(bench_warmup >= 0, "bench_warmup", "must be >= 0");
  require(bench_iters >= 1, "bench_iters", "must be >= 1");
  require(!output.empty(), "output", "must not be empty");
  const std::size_t feature = hidden_dims.empty() ? static_cast<std::size_t>(input_dim) : hidden_dims.back();
  require(feature >= static_cast<std::size_t>(ways), "hidden_dims",
          "feature width " + std::to_string(feature) + " is smaller than ways " + std::to_string(ways));
}

manifold::ManifoldKind RunConfig::manifold_kind() const {
  return manifold == manifold::ManifoldKind::Tag::Stiefel ? manifold::ManifoldKind::stiefel(retraction)
                                                           : manifold::ManifoldKind::euclid();
}

meta::Hyper RunConfig::hyper() const {
  meta::Hyper h;
  h.alpha = alpha;
  h.beta_stiefel = beta_stiefel;
  h.beta_euclid = beta_euclid;
  h.inner_steps = inner_steps;
  h.batch_tasks = batch_tasks;
  h.weight_decay_euclid = weight_decay;
  return h;
}

std::vector<std::size_t> RunConfig::layer_dims() const {
  std::vector<std::size_t> dims{static_cast<std::size_t>(input_dim)};
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  return dims;
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig config;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string where = "config line " + std::to_string(line_no) + ", key '" + std::string(key) + "'";
    const Field* field = find_field(key);
    if (field == nullptr) throw ConfigError(where + ": unknown key");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(where + ": duplicate of line " + std::to_string(it->second));
    }
    seen.emplace(std::string(key), line_no);
    try {
      field->read(config, value);
    } catch (const BadValue& e) {
      throw ConfigError(where + ": " + e.message);
    }
  }
  config.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, field] : fields()) {
    out += name;
    out += " = ";
    out += field.write(config);
    out += '\n';
  }
  return out;
}

}  // namespace forml::harness
