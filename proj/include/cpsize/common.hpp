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
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cpsize/rng.hpp"

namespace cpsize {

using Label = int;

/// A label (discrete label spaces) or a real target (interval label spaces).
using Outcome = std::variant<Label, double>;

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// The label space Y: either {0, ..., K-1} or a bounded interval [lower, upper].
class LabelSpace {
 public:
  static LabelSpace discrete(int num_labels);
  static LabelSpace interval(double lower, double upper);

  bool is_discrete() const { return discrete_; }
  int num_labels() const;
  double lower() const;
  double upper() const;

  /// |Y|: counting measure for discrete spaces, length for intervals.
  double size() const;

  bool contains(const Outcome& y) const;

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  LabelSpace() = default;
  bool discrete_ = true;
  int num_labels_ = 2;
  double lower_ = 0.0;
  double upper_ = 1.0;
};

/// A point predictor f_theta. Concrete models live in learners.hpp.
class PointPredictor {
 public:
  virtual ~PointPredictor() = default;
  virtual Outcome predict(std::span<const double> x) const = 0;
  virtual std::size_t input_dim() const = 0;
};

struct LabeledPoint {
  std::vector<double> x;
  Outcome y;
};

/// Draws theta ~ Q(theta | D_tr). The returned reference must outlive the call site's use.
using ModelSampler = std::function<const PointPredictor&(Rng&)>;

/// Draws (X, Y) ~ P_Z.
using DataSampler = std::function<LabeledPoint(Rng&)>;

bool is_label(const Outcome& y);
std::string describe(const Outcome& y);

}  // namespace cpsize
