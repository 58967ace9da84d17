// Copyright 2026 The cpsize Authors
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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cpsize/common.hpp"

namespace cpsize {

/// n labeled points. Discrete labels are stored as exact small integers in `targets`.
struct Dataset {
  FeatureMatrix features;
  std::vector<double> targets;
  LabelSpace space = LabelSpace::discrete(2);
  std::string provenance;
  /// Fraction of generated regression targets that were clipped into the interval.
  double clip_rate = 0.0;

  std::size_t size() const { return targets.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * dim(), dim()};
  }
  Outcome target(std::size_t i) const;

  /// Rows in the given order (indices may repeat).
  Dataset subset(std::span<const std::size_t> indices) const;
  /// First n rows.
  Dataset head(std::size_t n) const;

  /// Throws if any invariant (n >= 1, labels in range, targets in the interval) fails.
  void validate() const;
};

struct ClassificationSpec {
  int num_classes = 10;
  int dim = 8;
  double separation = 3.0;
};

struct RegressionSpec {
  int dim = 8;
  double noise = 0.05;
  double lower = 0.0;
  double upper = 1.0;
};

using SyntheticSpec = std::variant<ClassificationSpec, RegressionSpec>;

LabelSpace label_space_of(const SyntheticSpec& spec);

/// Equal-prior Gaussian classes whose means lie on a scaled trigonometric
/// moment curve, or y = clip(g(x) + noise) on [lower, upper]. Points are drawn
/// one at a time, so a prefix of a larger draw equals a smaller draw.
Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

/// One-point sampler for the same generator (used for population estimates).
DataSampler synthetic_sampler(const SyntheticSpec& spec);

struct CsvSchema {
  /// Empty means every column other than the target, in file order.
  std::vector<std::string> feature_columns;
  std::string target_column = "y";
  LabelSpace space = LabelSpace::interval(0.0, 1.0);
};

/// Reads a header + numeric rows file. Errors name the offending row (1-based,
/// header is row 1).
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes x0..x{d-1},y with shortest round-trip decimals.
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct Split {
  Dataset train;
  Dataset cal;
  Dataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> cal_index;
  std::vector<std::size_t> test_index;
};

/// Seeded uniform permutation, then contiguous train / cal / test blocks.
Split split_dataset(const Dataset& data, std::size_t n_tr, std::size_t n_cal, std::size_t n_test,
                    std::uint64_t seed);

}  // namespace cpsize
