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
#include <span>
#include <vector>

#include "cpsize/common.hpp"
#include "cpsize/dataio.hpp"

namespace cpsize::testing {

class ConstantPredictor : public PointPredictor {
 public:
  ConstantPredictor(Outcome value, std::size_t dim) : value_(value), dim_(dim) {}
  Outcome predict(std::span<const double>) const override { return value_; }
  std::size_t input_dim() const override { return dim_; }

 private:
  Outcome value_;
  std::size_t dim_;
};

/// Looks the prediction up by the integer stored in x[0].
class TablePredictor : public PointPredictor {
 public:
  explicit TablePredictor(std::vector<Outcome> table) : table_(std::move(table)) {}
  Outcome predict(std::span<const double> x) const override {
    return table_.at(static_cast<std::size_t>(x[0]));
  }
  std::size_t input_dim() const override { return 1; }

 private:
  std::vector<Outcome> table_;
};

/// n rows with x = (i) and the given targets.
inline Dataset indexed_dataset(const std::vector<double>& targets, LabelSpace space) {
  Dataset d;
  d.features.resize(static_cast<Eigen::Index>(targets.size()), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) d.features(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
  d.targets = targets;
  d.space = space;
  return d;
}

}  // namespace cpsize::testing
