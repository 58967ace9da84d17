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

#include "cpsize/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cpsize/calibration.hpp"
#include "cpsize/numeric.hpp"

namespace cpsize {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
}

void require_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) throw std::invalid_argument(std::string(what) + " must lie in (0, 1)");
}

/// exp(-n d(a || b)) where the Chernoff step applies, 1 (trivial bound) elsewhere.
double chernoff_factor(std::size_t n_cal, double a, double b) {
  if (b <= a || b <= 0.0 || b > 1.0) return 1.0;
  return std::exp(-static_cast<double>(n_cal) * binary_kl(a, b));
}

}  // namespace

double binary_kl(double a, double b) {
  require_unit(a, "binary_kl: a");
  require_unit(b, "binary_kl: b");
  if (a == b) return 0.0;
  if (b == 0.0 || b == 1.0) return kInf;
  if (a == 0.0) return -std::log1p(-b);
  if (a == 1.0) return -std::log(b);
  const double x = (a - b) / b;
  const double y = (b - a) / (1.0 - b);
  if (std::abs(x) > 0.5 || std::abs(y) > 0.5) {
    return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  }
  // a log(1+x) + (1-a) log(1+y) with the exact quadratic part split off:
  // a x + (1-a) y = (a-b)^2 / (b (1-b)).
  const double lead = (a - b) * (a - b) / (b * (1.0 - b));
  return lead + a * (std::log1p(x) - x) + (1.0 - a) * (std::log1p(y) - y);
}

double beta_fn(double c, double delta, std::size_t n_tr) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("beta_fn: c must be positive");
  require_open_unit(delta, "beta_fn: delta");
  if (n_tr < 2) throw std::invalid_argument("beta_fn: n_tr must be >= 2");
  const double n = static_cast<double>(n_tr);
  return std::sqrt(32.0 * std::log(2.0) *
                   (2.0 * c * std::log(n) / delta + std::log(2.0 * std::sqrt(n) / delta)));
}

double mu_fn(double delta, std::size_t n_tr) {
  require_open_unit(delta, "mu_fn: delta");
  if (n_tr < 1) throw std::invalid_argument("mu_fn: n_tr must be >= 1");
  const double n = static_cast<double>(n_tr);
  return std::sqrt(std::log(2.0 / delta) / 2.0) + std::sqrt(4.0 * std::log(n * std::exp(1.0) / 2.0));
}

double binomial_tail_exact(std::size_t n, double prob, std::size_t k) {
  require_unit(prob, "binomial_tail_exact: prob");
  if (n == 0) throw std::invalid_argument("binomial_tail_exact: n must be positive");
  if (k > n) throw std::invalid_argument("binomial_tail_exact: k must be <= n");
  if (k == n || prob == 0.0) return 1.0;
  if (prob == 1.0) return 0.0;
  const double dn = static_cast<double>(n);
  const double log_p = std::log(prob);
  const double log_q = std::log1p(-prob);
  const double lg_n = std::lgamma(dn + 1.0);
  std::vector<double> terms(k + 1);
  for (std::size_t j = 0; j <= k; ++j) {
    const double dj = static_cast<double>(j);
    const double log_choose = lg_n - std::lgamma(dj + 1.0) - std::lgamma(dn - dj + 1.0);
    terms[j] = log_choose + (j == 0 ? 0.0 : dj * log_p) + (dn - dj) * log_q;
  }
  std::sort(terms.begin(), terms.end());
  const double top = terms.back();
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return std::min(1.0, std::exp(top) * sum);
}

SlackSpec SlackSpec::assumption_beta(double c, double delta) {
  if (!(c > 0.0)) throw std::invalid_argument("slack: c must be positive");
  require_open_unit(delta, "slack: delta");
  return SlackSpec(Mode::AssumptionBeta, c, delta);
}

SlackSpec SlackSpec::corollary_beta_mu(double c, double delta) {
  if (!(c > 0.0)) throw std::invalid_argument("slack: c must be positive");
  require_open_unit(delta, "slack: delta");
  return SlackSpec(Mode::CorollaryBetaMu, c, delta);
}

double SlackSpec::resolve(std::size_t n_tr) const {
  const double root = std::sqrt(static_cast<double>(n_tr));
  switch (mode_) {
    case Mode::OracleZero:
      return 0.0;
    case Mode::AssumptionBeta:
      return beta_fn(c_, delta_, n_tr) / root;
    case Mode::CorollaryBetaMu:
      return (beta_fn(c_, delta_, n_tr) + mu_fn(delta_, n_tr)) / root;
  }
  return 0.0;
}

double SlackSpec::confidence() const {
  switch (mode_) {
    case Mode::OracleZero:
      return 1.0;
    case Mode::AssumptionBeta:
      return 1.0 - delta_;
    case Mode::CorollaryBetaMu:
      return 1.0 - 2.0 * delta_;
  }
  return 1.0;
}

const char* to_string(SlackSpec::Mode mode) {
  switch (mode) {
    case SlackSpec::Mode::OracleZero:
      return "oracle_zero";
    case SlackSpec::Mode::AssumptionBeta:
      return "assumption_beta";
    case SlackSpec::Mode::CorollaryBetaMu:
      return "corollary_beta_mu";
  }
  return "unknown";
}

SlackSpec::Mode slack_mode_from_string(const std::string& name) {
  for (auto m : {SlackSpec::Mode::OracleZero, SlackSpec::Mode::AssumptionBeta,
                 SlackSpec::Mode::CorollaryBetaMu}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown slack mode '" + name + "'");
}

const char* to_string(TailMode mode) {
  return mode == TailMode::PaperLiteral ? "paper_literal" : "exact_integral";
}

TailMode tail_mode_from_string(const std::string& name) {
  if (name == "paper_literal") return TailMode::PaperLiteral;
  if (name == "exact_integral") return TailMode::ExactIntegral;
  throw std::invalid_argument("unknown tail mode '" + name + "'");
}

nlohmann::json BoundResult::to_json() const {
  return {{"normalized_bound", normalized_bound}, {"r_min", r_min},
          {"integral_term", integral_term},       {"tail_term", tail_term},
          {"clamped", clamped},                   {"confidence", confidence}};
}

std::string BoundResult::csv_header() {
  return "normalized_bound,r_min,integral_term,tail_term,clamped,confidence";
}

std::string BoundResult::csv_row() const {
  return format_double(normalized_bound) + ',' + format_double(r_min) + ',' +
         format_double(integral_term) + ',' + format_double(tail_term) + ',' +
         (clamped ? "true" : "false") + ',' + format_double(confidence);
}

double r_min(const CdfEstimate& cdf, double threshold, double r_max) {
  const auto inf = cdf.inverse(threshold);
  if (!inf || *inf > r_max) return r_max;
  return std::clamp(*inf, 0.0, r_max);
}

namespace {

/// Integral of factor(F(r) - s) * gamma(r) over [lo, hi] for a continuous gamma.
double chernoff_integral(const BoundQuery& q, double a, double s, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  const CdfEstimate& cdf = q.cdf;
  const GammaDensity& gamma = q.gamma;

  std::vector<double> cuts{lo, hi};
  for (double b : cdf.breakpoints()) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  if (gamma.is_tabulated()) {
    for (double e : gamma.histogram().edges) {
      if (e > lo && e < hi) cuts.push_back(e);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const bool closed = gamma.is_closed_form();
  const double p = closed ? gamma.closed_form().p : 1.0;
  const double scale = closed ? 2.0 / gamma.closed_form().width : 1.0;
  // Closed-form gamma is integrated in t = r^{1/p}, where gamma(r) dr = (2 / width) dt.
  auto to_t = [&](double r) { return closed && p != 1.0 ? std::pow(r, 1.0 / p) : r; };
  auto to_r = [&](double t) { return closed && p != 1.0 ? std::pow(t, p) : t; };
  const double total = to_t(hi) - to_t(lo);

  CompensatedSum sum;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double r_lo = cuts[i];
    const double r_hi = cuts[i + 1];
    const double t_lo = to_t(r_lo);
    const double t_hi = to_t(r_hi);
    if (!(t_hi > t_lo)) continue;
    const double f_lo = cdf.right_limit(r_lo);
    const double f_hi = cdf(r_hi);
    const double weight = closed ? scale : gamma.at(0.5 * (r_lo + r_hi));
    if (weight == 0.0) continue;
    auto integrand = [&](double t) {
      double f;
      if (t <= t_lo) {
        f = f_lo;
      } else if (t >= t_hi) {
        f = f_hi;
      } else {
        const double r = std::clamp(to_r(t), r_lo, r_hi);
        f = r <= r_lo ? f_lo : (r >= r_hi ? f_hi : cdf(r));
      }
      return chernoff_factor(q.n_cal, a, f - s) * weight;
    };
    QuadratureOptions opts = q.quadrature;
    opts.tolerance = q.quadrature.tolerance * (t_hi - t_lo) / total;
    sum.add(adaptive_simpson(integrand, t_lo, t_hi, opts));
  }
  return sum.value();
}

}  // namespace

BoundResult bound_theorem1(const BoundQuery& q) {
  if (q.n_cal == 0) throw std::invalid_argument("bound: n_cal must be positive");
  if (q.n_tr == 0) throw std::invalid_argument("bound: n_tr must be positive");
  if (!(q.r_max >= 0.0)) throw std::invalid_argument("bound: r_max must be nonnegative");
  if (q.gamma.support_max() > q.r_max * (1.0 + 1e-12) + 1e-300) {
    throw std::invalid_argument("bound: gamma support exceeds the score range [0, r_max]");
  }
  const double a = static_cast<double>(n_alpha(q.n_cal, q.alpha)) / static_cast<double>(q.n_cal);
  const double s = q.slack.resolve(q.n_tr);
  const double threshold = a + s;

  BoundResult out;
  out.confidence = q.slack.confidence();
  out.r_min = r_min(q.cdf, threshold, q.r_max);

  if (q.gamma.is_atomic()) {
    CompensatedSum integral;
    CompensatedSum tail;
    for (const auto& atom : q.gamma.atom_list()) {
      const double f = q.cdf(atom.r);
      if (f < threshold) {
        tail.add(atom.mass);
      } else {
        integral.add(atom.mass * chernoff_factor(q.n_cal, a, f - s));
      }
    }
    out.integral_term = integral.value();
    out.tail_term = tail.value();
  } else {
    out.integral_term = chernoff_integral(q, a, s, out.r_min, q.r_max);
    if (q.tail_mode == TailMode::ExactIntegral) {
      out.tail_term = q.gamma.cumulative(out.r_min);
    } else {
      out.tail_term = out.r_min > 0.0 ? q.gamma.at(out.r_min) * out.r_min : 0.0;
    }
  }
  const double total = out.integral_term + out.tail_term;
  out.clamped = total > 1.0;
  out.normalized_bound = std::min(1.0, total);
  return out;
}

BoundResult bound_classification(double p_tr_hat, int num_labels, std::size_t n_cal, double alpha,
                                 const SlackSpec& slack, std::size_t n_tr) {
  require_unit(p_tr_hat, "bound_classification: p_tr_hat");
  if (num_labels < 2) throw std::invalid_argument("bound_classification: K must be >= 2");
  if (n_cal == 0 || n_tr == 0) throw std::invalid_argument("bound_classification: sizes must be positive");
  const double a = static_cast<double>(n_alpha(n_cal, alpha)) / static_cast<double>(n_cal);
  const double s = slack.resolve(n_tr);
  const double inv_k = 1.0 / static_cast<double>(num_labels);

  BoundResult out;
  out.confidence = slack.confidence();
  if (p_tr_hat - s >= a) {
    out.r_min = 0.0;
    out.tail_term = inv_k;
    out.integral_term = (1.0 - inv_k) * chernoff_factor(n_cal, a, p_tr_hat - s);
  } else {
    out.r_min = 1.0;
    out.tail_term = 1.0;
    out.integral_term = 0.0;
  }
  const double total = out.tail_term + out.integral_term;
  out.clamped = total > 1.0;
  out.normalized_bound = std::min(1.0, total);
  return out;
}

BoundResult bound_regression(const CdfEstimate& cdf, double p, double lower, double upper,
                             std::size_t n_cal, double alpha, const SlackSpec& slack,
                             std::size_t n_tr, TailMode tail_mode) {
  const LabelSpace space = LabelSpace::interval(lower, upper);
  const ScoreSpec spec = ScoreSpec::lp_power(p, space);
  return bound_theorem1(BoundQuery{.n_tr = n_tr,
                                   .n_cal = n_cal,
                                   .alpha = alpha,
                                   .cdf = cdf,
                                   .gamma = gamma_closed_form(spec, space),
                                   .slack = slack,
                                   .r_max = spec.r_max(),
                                   .tail_mode = tail_mode});
}

}  // namespace cpsize
