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

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpsize/common.hpp"
#include "cpsize/dataio.hpp"
#include "cpsize/scores.hpp"

namespace cpsize {

enum class CdfSource { TrainingAveraged, DoublyEmpirical, PopulationMC, Analytic };

const char* to_string(CdfSource source);
CdfSource cdf_source_from_string(const std::string& name);

/// A c.d.f. of NC scores on [0, r_max].
///
/// StrictStep: F(r) = #{samples < r} / N, left-continuous, as for training
/// c.d.f.s built with 1{R < r}.
/// Grid: piecewise-linear interpolation of sorted (r, value) nodes, held
/// constant beyond the first and last node.
///
/// Storage is immutable and shared, so copies are cheap.
class CdfEstimate {
 public:
  enum class Kind { StrictStep, Grid };

  static CdfEstimate strict_step(std::vector<double> samples, CdfSource source);
  static CdfEstimate grid(std::vector<std::pair<double, double>> nodes, CdfSource source);

  Kind kind() const { return kind_; }
  CdfSource source() const { return source_; }

  /// F(r) (left limit for StrictStep).
  double operator()(double r) const;
  /// lim_{s -> r+} F(s).
  double right_limit(double r) const;

  /// Points where F may jump or bend, ascending and unique.
  std::vector<double> breakpoints() const;

  /// inf{ r >= 0 : F(r) >= t }, or nullopt when no r reaches t.
  std::optional<double> inverse(double t) const;

  /// Underlying data: sorted samples (StrictStep) or node abscissae (Grid).
  std::span<const double> abscissae() const { return *xs_; }
  /// Grid node values (empty for StrictStep).
  std::span<const double> values() const { return *vs_; }

  /// CSV with columns r,value,source: every breakpoint with F at it and just past it.
  void write_csv(std::ostream& os) const;
  /// Reads the CSV form back as a Grid (StrictStep files keep their exact jumps
  /// through the paired rows).
  static CdfEstimate read_csv(std::istream& is);

 private:
  CdfEstimate(Kind kind, CdfSource source, std::shared_ptr<const std::vector<double>> xs,
              std::shared_ptr<const std::vector<double>> vs);
  Kind kind_;
  CdfSource source_;
  std::shared_ptr<const std::vector<double>> xs_;
  std::shared_ptr<const std::vector<double>> vs_;
};

enum class TrainingCdfMode { Averaged, DoublyEmpirical };

/// Empirical training c.d.f. of NC scores with strict inequality 1{R < r}.
/// Averaged: every model scores every point (exhaustive average over Q).
/// DoublyEmpirical: model i scores point i; requires |models| == |points|.
CdfEstimate training_cdf(std::span<const PointPredictor* const> models, const Dataset& train,
                         const ScoreSpec& spec, TrainingCdfMode mode);

/// Monte Carlo population c.d.f. from n independent (theta, X, Y) draws.
CdfEstimate population_cdf_mc(const ModelSampler& model_sampler, const DataSampler& data_sampler,
                              const ScoreSpec& spec, const LabelSpace& space,
                              std::size_t n_samples, std::uint64_t seed);

/// Breakpoints of both c.d.f.s plus the next representable double above each,
/// restricted to [lo, hi]; lo and hi are always included.
std::vector<double> refined_grid(const CdfEstimate& a, const CdfEstimate& b, double lo, double hi);

/// max over the grid of |pop(r) - train(r)|.
double generalization_gap(const CdfEstimate& pop, const CdfEstimate& train,
                          std::span<const double> grid);

}  // namespace cpsize
