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
#include <string_view>
#include <vector>

#include "forml/matrix.hpp"
#include "forml/model.hpp"
#include "forml/rng.hpp"

namespace forml::tasks {

enum class Split { MetaTrain, MetaVal, MetaTest };

std::string_view to_string(Split s);

/// One class of a bank. Generative classes draw mean + sigma * z; empirical
/// classes (samples non-empty) draw rows of `samples` without replacement.
struct ClassEntry {
  int id = 0;
  std::vector<double> mean;
  double sigma = 0.0;
  Matrix samples;

  bool empirical() const noexcept { return samples.rows() > 0; }
};

/// Immutable pool of classes for one meta-split.
class TaskBank {
 public:
  TaskBank(Split split, std::size_t input_dim, std::vector<ClassEntry> classes);

  Split split() const noexcept { return split_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return classes_.size(); }
  const std::vector<ClassEntry>& classes() const noexcept { return classes_; }
  std::vector<int> class_ids() const;

 private:
  Split split_;
  std::size_t input_dim_;
  std::vector<ClassEntry> classes_;
};

struct BankSplits {
  TaskBank train;
  TaskBank val;
  TaskBank test;
};

/// An N-way episode. class_map[label] is the bank class id behind that label.
struct Episode {
  model::Batch support;
  model::Batch query;
  std::vector<int> class_map;
};

/// Class sizes per split: round(fraction * classes) for the first two, the
/// remainder for the third. Fractions must sum to 1 and every split must be
/// non-empty, otherwise ConfigError.
std::array<std::size_t, 3> split_sizes(std::size_t classes, const std::array<double, 3>& fractions);

/// Synthetic Gaussian-cluster banks: unit-sphere means, shared sigma, class
/// ids 0..classes-1 shuffled and partitioned into disjoint splits.
BankSplits make_bank(std::size_t classes, std::size_t input_dim, double sigma,
                     const std::array<double, 3>& fractions, std::uint64_t seed);

/// Draws `ways` distinct classes, then `shots` support and `queries` query
/// samples per class. Rows are shuffled within each of support and query.
Episode sample_episode(const TaskBank& bank, std::size_t ways, std::size_t shots,
                       std::size_t queries, Rng& rng);

/// Labeled feature vectors grouped by class, as read from a dataset file.
struct LabeledDataset {
  std::size_t dim = 0;
  std::vector<ClassEntry> classes;  // empirical entries, ascending id

  TaskBank to_bank(Split split) const;
  /// Disjoint class-level split with the same rules as make_bank.
  BankSplits split(const std::array<double, 3>& fractions, std::uint64_t seed) const;
};

/// Text format:
///   header: d=<int> classes=<int>
///   <class-id>,<f1>,...,<fd>
/// Blank lines are ignored and '#' starts a comment line.
LabeledDataset load_dataset_file(const std::filesystem::path& path);
LabeledDataset parse_dataset(std::string_view text);
void write_dataset_file(const std::filesystem::path& path, const LabeledDataset& data);

}  // namespace forml::tasks
