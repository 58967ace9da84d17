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

#include "cpsize/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cpsize/numeric.hpp"

namespace cpsize {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

}  // namespace

std::size_t n_alpha(std::size_t n_cal, double alpha) {
  check_alpha(alpha);
  if (n_cal == 0) throw std::invalid_argument("n_alpha: n_cal must be positive");
  const double x = static_cast<double>(n_cal + 1) * (1.0 - alpha);
  double c = std::ceil(x);
  // (n+1)(1-alpha) that is an integer up to rounding in 1 - alpha.
  if (c - x > 1.0 - 1e-9 * static_cast<double>(n_cal + 1)) c -= 1.0;
  const auto rank = static_cast<std::size_t>(c);
  return std::min(rank == 0 ? 0 : rank - 1, n_cal);
}

CalibrationSet::CalibrationSet(std::vector<double> scores, double r_max)
    : sorted_(std::move(scores)), r_max_(r_max) {
  if (sorted_.empty()) throw std::invalid_argument("calibration set must be nonempty");
  for (double s : sorted_) {
    if (!(s >= 0.0 && s <= r_max_)) {
      throw std::invalid_argument("calibration score " + std::to_string(s) + " outside [0, r_max]");
    }
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double empirical_cal_cdf(const CalibrationSet& cal, double r) {
  const auto s = cal.sorted();
  const auto count = std::upper_bound(s.begin(), s.end(), r) - s.begin();
  return static_cast<double>(count) / static_cast<double>(s.size());
}

ConformalQuantile conformal_quantile(const CalibrationSet& cal, double alpha) {
  const std::size_t rank = n_alpha(cal.size(), alpha);
  if (rank + 1 > cal.size()) return ConformalQuantile::full_space();
  return ConformalQuantile::at(cal.sorted()[rank]);
}

PredictionSet PredictionSet::labels(std::set<Label> labels) {
  PredictionSet s;
  s.kind_ = labels.empty() ? Kind::Empty : Kind::LabelSubset;
  s.labels_ = std::move(labels);
  return s;
}

PredictionSet PredictionSet::interval(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("interval prediction set needs lo <= hi");
  PredictionSet s;
  s.kind_ = Kind::IntervalSet;
  s.lo_ = lo;
  s.hi_ = hi;
  return s;
}

PredictionSet PredictionSet::full() {
  PredictionSet s;
  s.kind_ = Kind::FullSpace;
  return s;
}

PredictionSet PredictionSet::empty() { return PredictionSet(); }

double PredictionSet::size(const LabelSpace& space) const {
  switch (kind_) {
    case Kind::Empty:
      return 0.0;
    case Kind::FullSpace:
      return space.size();
    case Kind::LabelSubset:
      return static_cast<double>(labels_.size());
    case Kind::IntervalSet:
      return hi_ - lo_;
  }
  return 0.0;
}

bool PredictionSet::contains(const Outcome& y) const {
  switch (kind_) {
    case Kind::Empty:
      return false;
    case Kind::FullSpace:
      return true;
    case Kind::LabelSubset:
      return is_label(y) && labels_.count(std::get<Label>(y)) > 0;
    case Kind::IntervalSet:
      return !is_label(y) && std::get<double>(y) >= lo_ && std::get<double>(y) <= hi_;
  }
  return false;
}

PredictionSet predict_set(const ScoreSpec& spec, const LabelSpace& space,
                          const Outcome& prediction, const ConformalQuantile& q) {
  if (!space.contains(prediction)) {
    throw std::invalid_argument("prediction outside the label space: " + describe(prediction));
  }
  if (q.is_full_space()) return PredictionSet::full();
  if (spec.kind() == ScoreKind::ZeroOne) {
    if (q.value() >= 1.0) return PredictionSet::full();
    return PredictionSet::labels({std::get<Label>(prediction)});
  }
  const double f = std::get<double>(prediction);
  const double half_width = std::pow(std::max(q.value(), 0.0), 1.0 / spec.p());
  const double lo = std::max(space.lower(), f - half_width);
  const double hi = std::min(space.upper(), f + half_width);
  return PredictionSet::interval(lo, hi);
}

CoverageEstimate estimate_coverage_and_size(const TrialSampler& sampler, double alpha,
                                            double r_max, std::size_t n_trials,
                                            std::uint64_t seed, std::size_t workers) {
  check_alpha(alpha);
  if (n_trials == 0) throw std::invalid_argument("estimate_coverage_and_size: n_trials must be >= 1");

  std::vector<double> covered(n_trials);
  std::vector<double> sizes(n_trials);
  parallel_for(n_trials, workers, [&](std::size_t t) {
    try {
      Rng rng = make_rng(derive_seed(seed, {t}));
      TrialDraw draw = sampler(rng, t);
      const CalibrationSet cal(std::move(draw.cal_scores), r_max);
      const ConformalQuantile q = conformal_quantile(cal, alpha);
      covered[t] = q.accepts(draw.test_score) ? 1.0 : 0.0;
      sizes[t] = draw.normalized_size(q);
    } catch (const std::exception& e) {
      throw std::runtime_error("trial " + std::to_string(t) + ": " + e.what());
    }
  });

  MeanAccumulator cov;
  MeanAccumulator size;
  for (std::size_t t = 0; t < n_trials; ++t) {
    cov.add(covered[t]);
    size.add(sizes[t]);
  }
  return {cov.mean(), cov.standard_error(), size.mean(), size.standard_error(), n_trials};
}

}  // namespace cpsize
