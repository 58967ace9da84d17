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
#include <functional>
#include <set>
#include <span>
#include <vector>

#include "cpsize/common.hpp"
#include "cpsize/scores.hpp"

namespace cpsize {

/// n_alpha = ceil((n_cal + 1)(1 - alpha)) - 1.
std::size_t n_alpha(std::size_t n_cal, double alpha);

/// Calibration NC scores, kept sorted ascending. Duplicates are retained.
class CalibrationSet {
 public:
  CalibrationSet(std::vector<double> scores, double r_max);

  std::size_t size() const { return sorted_.size(); }
  double r_max() const { return r_max_; }
  std::span<const double> sorted() const { return sorted_; }

 private:
  std::vector<double> sorted_;
  double r_max_;
};

/// Fraction of calibration scores <= r (right-continuous).
double empirical_cal_cdf(const CalibrationSet& cal, double r);

/// The conformal threshold: an order statistic, or "accept everything" when
/// the calibration set is too small for the requested level.
class ConformalQuantile {
 public:
  static ConformalQuantile full_space() { return ConformalQuantile(true, 0.0); }
  static ConformalQuantile at(double value) { return ConformalQuantile(false, value); }

  bool is_full_space() const { return full_space_; }
  /// Only meaningful when !is_full_space().
  double value() const { return value_; }

  /// Whether a score is accepted into the prediction set.
  bool accepts(double score) const { return full_space_ || score <= value_; }

  friend bool operator==(const ConformalQuantile&, const ConformalQuantile&) = default;

 private:
  ConformalQuantile(bool full, double value) : full_space_(full), value_(value) {}
  bool full_space_;
  double value_;
};

/// Ascending order statistic of rank n_alpha + 1, or FULL_SPACE if n_alpha + 1 > n_cal.
ConformalQuantile conformal_quantile(const CalibrationSet& cal, double alpha);

class PredictionSet {
 public:
  enum class Kind { LabelSubset, IntervalSet, FullSpace, Empty };

  static PredictionSet labels(std::set<Label> labels);
  static PredictionSet interval(double lo, double hi);
  static PredictionSet full();
  static PredictionSet empty();

  Kind kind() const { return kind_; }
  const std::set<Label>& label_set() const { return labels_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  /// Counting measure (discrete) or length (interval).
  double size(const LabelSpace& space) const;
  bool contains(const Outcome& y) const;

 private:
  Kind kind_ = Kind::Empty;
  std::set<Label> labels_;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

PredictionSet predict_set(const ScoreSpec& spec, const LabelSpace& space,
                          const Outcome& prediction, const ConformalQuantile& q);

/// What one Monte Carlo trial produces: calibration scores, one test score,
/// and the normalized test-set size as a function of the conformal threshold.
struct TrialDraw {
  std::vector<double> cal_scores;
  double test_score = 0.0;
  std::function<double(const ConformalQuantile&)> normalized_size;
};

using TrialSampler = std::function<TrialDraw(Rng&, std::size_t trial)>;

struct CoverageEstimate {
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_normalized_size = 0.0;
  double size_se = 0.0;
  std::size_t n_trials = 0;
};

/// Monte Carlo coverage Pr[Y in Gamma] and normalized inefficiency E|Gamma|/|Y|.
/// Trial t uses an RNG seeded from (seed, t), so results do not depend on the
/// worker count.
CoverageEstimate estimate_coverage_and_size(const TrialSampler& sampler, double alpha,
                                            double r_max, std::size_t n_trials,
                                            std::uint64_t seed, std::size_t workers = 1);

}  // namespace cpsize
