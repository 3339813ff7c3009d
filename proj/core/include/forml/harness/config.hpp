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

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "forml/meta.hpp"
#include "forml/model.hpp"
#include "forml/stiefel.hpp"

namespace forml::harness {

/// Every knob of a run. Defaults are the values a missing key resolves to.
struct RunConfig {
  meta::Engine engine = meta::Engine::Forml;
  manifold::ManifoldKind::Tag manifold = manifold::ManifoldKind::Tag::Stiefel;
  manifold::RetractionMode retraction = manifold::RetractionMode::Polar;

  double alpha = 0.1;
  double beta_stiefel = 1e-3;
  double beta_euclid = 1e-3;
  int inner_steps = 5;
  int batch_tasks = 4;
  double weight_decay = 0.0;

  std::vector<std::size_t> hidden_dims{64};
  model::Activation activation = model::Activation::Tanh;
  double logit_scale = 10.0;

  int ways = 5;
  int shots = 1;
  int queries = 15;
  double sigma = 0.3;
  int input_dim = 16;
  int classes = 100;
  std::array<double, 3> split{0.64, 0.16, 0.20};
  std::string dataset;  // empty: synthetic bank

  int outer_iters = 2000;
  int eval_episodes = 600;
  std::uint64_t seed = 1;
  std::string output = "forml_out";

  double fd_step = 1e-6;
  int bench_warmup = 5;
  int bench_iters = 50;

  /// Throws ConfigError naming the offending key.
  void validate() const;

  manifold::ManifoldKind manifold_kind() const;
  meta::Hyper hyper() const;
  /// {input_dim, hidden_dims...}
  std::vector<std::size_t> layer_dims() const;

  bool operator==(const RunConfig&) const = default;
};

/// Flat `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Unknown keys, duplicates, malformed values and invalid settings raise
/// ConfigError with the key and line number.
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::filesystem::path& path);

/// Every key with its resolved value, one `key = value` line each, in a form
/// parse_config_text reads back to an identical RunConfig.
std::string echo_config(const RunConfig& config);

}  // namespace forml::harness
