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
#include <string>

#include "cpsize/cdf.hpp"
#include "cpsize/quadrature.hpp"
#include "cpsize/scores.hpp"

#include "json.hpp"

namespace cpsize {

/// Binary KL divergence d(a || b) in nats. 0 log 0 = 0; +inf when b is 0 or 1 and a != b.
double binary_kl(double a, double b);

/// beta(delta, n_tr) = sqrt(32 log 2 (2 c log(n_tr) / delta + log(2 sqrt(n_tr) / delta))).
double beta_fn(double c, double delta, std::size_t n_tr);

/// mu(delta, n_tr) = sqrt(log(2/delta)/2) + sqrt(4 log(n_tr e / 2)).
double mu_fn(double delta, std::size_t n_tr);

/// Pr[Bin(n, prob) <= k], summed in log space from the smallest term up.
double binomial_tail_exact(std::size_t n, double prob, std::size_t k);

/// How much the training c.d.f. is shifted down to account for generalization.
class SlackSpec {
 public:
  enum class Mode { OracleZero, AssumptionBeta, CorollaryBetaMu };

  static SlackSpec oracle_zero() { return SlackSpec(Mode::OracleZero, 1.0, 0.1); }
  static SlackSpec assumption_beta(double c, double delta);
  static SlackSpec corollary_beta_mu(double c, double delta);

  Mode mode() const { return mode_; }
  double c() const { return c_; }
  double delta() const { return delta_; }

  /// 0, beta / sqrt(n_tr) or (beta + mu) / sqrt(n_tr).
  double resolve(std::size_t n_tr) const;
  /// 1, 1 - delta or 1 - 2 delta.
  double confidence() const;

 private:
  SlackSpec(Mode mode, double c, double delta) : mode_(mode), c_(c), delta_(delta) {}
  Mode mode_;
  double c_;
  double delta_;
};

const char* to_string(SlackSpec::Mode mode);
SlackSpec::Mode slack_mode_from_string(const std::string& name);

enum class TailMode {
  /// gamma(R_min) * R_min, as stated for non-decreasing gamma.
  PaperLiteral,
  /// integral of gamma over [0, R_min]; valid for any gamma.
  ExactIntegral,
};

const char* to_string(TailMode mode);
TailMode tail_mode_from_string(const std::string& name);

struct BoundQuery {
  std::size_t n_tr = 1;
  std::size_t n_cal = 1;
  double alpha = 0.1;
  CdfEstimate cdf;
  GammaDensity gamma;
  SlackSpec slack = SlackSpec::oracle_zero();
  double r_max = 1.0;
  TailMode tail_mode = TailMode::ExactIntegral;
  QuadratureOptions quadrature{};
};

struct BoundResult {
  double normalized_bound = 1.0;
  double r_min = 0.0;
  double integral_term = 0.0;
  double tail_term = 0.0;
  bool clamped = false;
  double confidence = 1.0;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

/// inf{ r in [0, r_max] : F(r) >= threshold }, or r_max when no r qualifies.
double r_min(const CdfEstimate& cdf, double threshold, double r_max);

/// Expected-set-size bound
///   int_{R_min}^{r_max} exp(-n_cal d(n_a/n_cal || F(r) - s)) gamma(r) dr + tail(R_min),
/// normalized by |Y| and clamped to 1. The Chernoff factor is replaced by 1
/// wherever F(r) - s <= n_a / n_cal. Atomic gamma is summed exactly; the
/// atoms at which F has not yet reached n_a/n_cal + s form the tail term.
BoundResult bound_theorem1(const BoundQuery& query);

/// Closed form for the 0-1 score: 1/K + (1 - 1/K) exp(-n_cal d(n_a/n_cal || p - s)),
/// or 1 when p - s < n_a / n_cal.
BoundResult bound_classification(double p_tr_hat, int num_labels, std::size_t n_cal, double alpha,
                                 const SlackSpec& slack, std::size_t n_tr);

/// General bound for |f - y|^p on [lower, upper] with the closed-form gamma.
BoundResult bound_regression(const CdfEstimate& cdf, double p, double lower, double upper,
                             std::size_t n_cal, double alpha, const SlackSpec& slack,
                             std::size_t n_tr, TailMode tail_mode = TailMode::PaperLiteral);

}  // namespace cpsize
