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
#include <variant>
#include <vector>

#include "cpsize/common.hpp"

namespace cpsize {

enum class ScoreKind { ZeroOne, LpPower };

/// A nonconformity score family R: Y_hat x Y -> [0, r_max].
class ScoreSpec {
 public:
  /// R(f, y) = 1{y != f}.
  static ScoreSpec zero_one();
  /// R(f, y) = |f - y|^p over an interval label space; r_max = (upper - lower)^p.
  static ScoreSpec lp_power(double p, const LabelSpace& space);

  ScoreKind kind() const { return kind_; }
  double p() const { return p_; }
  double r_max() const { return r_max_; }

 private:
  ScoreSpec(ScoreKind kind, double p, double r_max) : kind_(kind), p_(p), r_max_(r_max) {}
  ScoreKind kind_;
  double p_;
  double r_max_;
};

double nc_score(const ScoreSpec& spec, const LabelSpace& space, const Outcome& prediction,
                const Outcome& truth);

/// Score-size density gamma(r): how much (input, candidate label) mass sits at
/// score level r. Point masses for discrete scores, a density otherwise.
class GammaDensity {
 public:
  struct Atom {
    double r;
    double mass;
  };
  /// 2 r^{1/p - 1} / (p * width) on (0, width^p]: the envelope for |f - y|^p.
  struct LpPowerForm {
    double p;
    double width;
  };
  /// Piecewise-constant density on consecutive bins [edges[i], edges[i+1]).
  struct Histogram {
    std::vector<double> edges;
    std::vector<double> density;
  };

  static GammaDensity atoms(std::vector<Atom> atoms);
  static GammaDensity lp_power(double p, double width);
  static GammaDensity tabulated(std::vector<double> edges, std::vector<double> density);

  bool is_atomic() const { return std::holds_alternative<std::vector<Atom>>(rep_); }
  bool is_closed_form() const { return std::holds_alternative<LpPowerForm>(rep_); }
  bool is_tabulated() const { return std::holds_alternative<Histogram>(rep_); }

  const std::vector<Atom>& atom_list() const;
  const LpPowerForm& closed_form() const;
  const Histogram& histogram() const;

  /// Density at r (continuous forms) or point mass at r (atoms).
  double at(double r) const;

  /// Integral of gamma over [0, r) (atoms strictly below r for atomic forms).
  double cumulative(double r) const;

  /// Right end of the support.
  double support_max() const;

  /// Whether gamma is non-decreasing on its support, determined by scanning.
  bool non_decreasing() const { return non_decreasing_; }

 private:
  using Rep = std::variant<std::vector<Atom>, LpPowerForm, Histogram>;
  explicit GammaDensity(Rep rep);
  Rep rep_;
  bool non_decreasing_ = false;
};

GammaDensity gamma_closed_form(const ScoreSpec& spec, const LabelSpace& space);

struct EmpiricalGammaOptions {
  std::size_t n_samples = 100000;
  std::size_t bins = 128;
  std::uint64_t seed = 0;
};

/// Monte Carlo estimate of gamma: X drawn from the rows of `inputs` (marginal
/// X), theta from the sampler, and a candidate label drawn uniformly from Y.
GammaDensity gamma_empirical(const ScoreSpec& spec, const LabelSpace& space,
                             const ModelSampler& model_sampler, const FeatureMatrix& inputs,
                             const EmpiricalGammaOptions& options = {});

}  // namespace cpsize
