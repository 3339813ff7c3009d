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

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "forml/errors.hpp"
#include "forml/harness/commands.hpp"
#include "forml/harness/config.hpp"

namespace {

using forml::harness::RunConfig;

RunConfig load(const std::string& path) {
  return path.empty() ? RunConfig{} : forml::harness::parse_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forml: first-order meta-learning on the Stiefel manifold"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<int> iters;
  int episodes = 0;

  auto* train = app.add_subcommand("train", "meta-train, then evaluate on the meta-test split");
  train->add_option("--config", config_path, "config file (key = value)")->required();
  train->add_option("--out", out_dir, "output directory, overrides the config");

  auto* gradcheck = app.add_subcommand("gradcheck", "run the gradient oracle suite");
  gradcheck->add_option("--config", config_path, "config file (key = value)")->required();

  auto* bench = app.add_subcommand("benchmark", "time FORML, FOMAML and EXACT_EUCLID");
  bench->add_option("--config", config_path, "config file (key = value)")->required();
  bench->add_option("--iters", iters, "measured outer iterations")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "evaluate the seeded initial meta-parameters");
  eval->add_option("--config", config_path, "config file (key = value)")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")->required()->check(CLI::Range(2, 1000000));

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = load(config_path);
    if (!out_dir.empty()) config.output = out_dir;
    if (iters) config.bench_iters = *iters;
    config.validate();

    if (train->parsed()) return forml::harness::cmd_train(config, std::cout);
    if (gradcheck->parsed()) return forml::harness::cmd_gradcheck(config, std::cout);
    if (bench->parsed()) return forml::harness::cmd_benchmark(config, std::cout);
    if (eval->parsed()) return forml::harness::cmd_eval(config, episodes, std::cout);
  } catch (const forml::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const forml::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
