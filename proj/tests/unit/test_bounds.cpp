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


#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cpsize/bounds.hpp"
#include "cpsize/calibration.hpp"
#include "cpsize/cdf.hpp"
#include "cpsize/quadrature.hpp"
#include "cpsize/scores.hpp"
#include "doctest.h"

using namespace cpsize;

namespace {

double kl_direct(double a, double b) {
  double v = 0.0;
  if (a > 0.0) v += a * std::log(a / b);
  if (a < 1.0) v += (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
  return v;
}

CdfEstimate linear_grid(std::vector<std::pair<double, double>> nodes) {
  return CdfEstimate::grid(std::move(nodes), CdfSource::Analytic);
}

}  // namespace

TEST_CASE("binary_kl reference values") {
  CHECK(binary_kl(0.9, 0.95) == doctest::Approx(0.02065421891274634).epsilon(1e-13));
  CHECK(binary_kl(0.3, 0.3 + 1e-7) == doctest::Approx(2.380952078609321e-14).epsilon(1e-8));
  CHECK(binary_kl(0.5, 0.5 - 1e-9) == doctest::Approx(2.0e-18).epsilon(1e-6));
  CHECK(binary_kl(1e-12, 0.2) == doctest::Approx(0.22314355128696503).epsilon(1e-12));
  CHECK(binary_kl(0.4, 0.4) == 0.0);
  CHECK(binary_kl(1.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(binary_kl(0.0, 0.5) == doctest::Approx(std::log(2.0)));
  CHECK(std::isinf(binary_kl(0.9, 1.0)));
  CHECK_THROWS(binary_kl(-0.1, 0.5));
  CHECK_THROWS(binary_kl(0.5, 1.5));
}

TEST_CASE("binary_kl is nonnegative and unimodal in b") {
  for (int i = 1; i < 100; ++i) {
    const double a = i / 100.0;
    double prev = binary_kl(a, 1e-6);
    for (int j = 1; j < 1000; ++j) {
      const double b = j / 1000.0;
      const double v = binary_kl(a, b);
      CHECK(v >= 0.0);
      if (b <= a) {
        CHECK(v <= prev + 1e-15);
      } else {
        CHECK(v >= prev - 1e-15);
      }
      prev = v;
    }
  }
}

TEST_CASE("beta and mu spot values") {
  CHECK(beta_fn(1.0, 0.1, 100) == doctest::Approx(46.48052610809369).epsilon(1e-12));
  CHECK(mu_fn(0.1, 100) == doctest::Approx(5.656490252121204).epsilon(1e-12));
  CHECK(mu_fn(2.0 / std::exp(2.0), 2) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS(beta_fn(0.0, 0.1, 100));
  CHECK_THROWS(beta_fn(1.0, 0.0, 100));
  CHECK_THROWS(beta_fn(1.0, 0.1, 0));
  CHECK_THROWS(mu_fn(1.0, 10));
}

TEST_CASE("slack resolution and confidence") {
  CHECK(SlackSpec::oracle_zero().resolve(100) == 0.0);
  CHECK(SlackSpec::oracle_zero().confidence() == 1.0);
  const auto beta = SlackSpec::assumption_beta(1.0, 0.1);
  CHECK(beta.resolve(100) == doctest::Approx(beta_fn(1.0, 0.1, 100) / 10.0));
  CHECK(beta.confidence() == doctest::Approx(0.9));
  const auto cor = SlackSpec::corollary_beta_mu(1.0, 0.1);
  CHECK(cor.resolve(100) ==
        doctest::Approx((beta_fn(1.0, 0.1, 100) + mu_fn(0.1, 100)) / 10.0));
  CHECK(cor.confidence() == doctest::Approx(0.8));
  for (auto mode : {SlackSpec::Mode::OracleZero, SlackSpec::Mode::AssumptionBeta,
                    SlackSpec::Mode::CorollaryBetaMu}) {
    CHECK(slack_mode_from_string(to_string(mode)) == mode);
  }
  CHECK(tail_mode_from_string(to_string(TailMode::PaperLiteral)) == TailMode::PaperLiteral);
  CHECK_THROWS(slack_mode_from_string("nope"));
}

TEST_CASE("binomial tail reference values") {
  CHECK(binomial_tail_exact(2, 0.5, 1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(binomial_tail_exact(10, 0.9, 8) == doctest::Approx(0.2639010709).epsilon(1e-10));
  CHECK(binomial_tail_exact(37, 0.3, 37) == 1.0);
  CHECK(binomial_tail_exact(5, 0.0, 0) == 1.0);
  CHECK(binomial_tail_exact(5, 1.0, 4) == 0.0);
  CHECK_THROWS(binomial_tail_exact(5, 0.5, 6));
  CHECK_THROWS(binomial_tail_exact(5, 1.5, 2));
}

TEST_CASE("binomial tail matches direct summation") {
  for (std::size_t n : {1u, 7u, 30u, 60u}) {
    for (double p : {0.05, 0.3, 0.5, 0.77, 0.99}) {
      double term = std::pow(1.0 - p, static_cast<double>(n));
      double cum = 0.0;
      for (std::size_t k = 0; k <= n; ++k) {
        cum += term;
        CHECK(binomial_tail_exact(n, p, k) == doctest::Approx(std::min(cum, 1.0)).epsilon(1e-9));
        term *= static_cast<double>(n - k) / static_cast<double>(k + 1) * p / (1.0 - p);
      }
    }
  }
}

TEST_CASE("Chernoff factor dominates the binomial tail on a small grid") {
  std::size_t violations = 0;
  for (std::size_t n = 1; n <= 60; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      const double a = static_cast<double>(k) / static_cast<double>(n);
      for (int j = 1; a + j / 100.0 < 1.0; ++j) {
        const double p = a + j / 100.0;
        const double chernoff = std::exp(-static_cast<double>(n) * binary_kl(a, p));
        if (chernoff < binomial_tail_exact(n, p, k) * (1.0 - 1e-12)) ++violations;
      }
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("r_min on a step c.d.f.") {
  std::vector<double> samples(10, 0.2);
  samples.insert(samples.end(), 9, 0.7);
  samples.push_back(0.9);
  const auto cdf = CdfEstimate::strict_step(samples, CdfSource::Analytic);
  CHECK(cdf(0.5) == doctest::Approx(0.5));
  CHECK(cdf(0.8) == doctest::Approx(0.95));
  CHECK(r_min(cdf, 0.9, 1.0) == doctest::Approx(0.7));
  CHECK(r_min(cdf, 0.0, 1.0) == 0.0);
  CHECK(r_min(cdf, 1.2, 1.0) == 1.0);
}

TEST_CASE("classification bound worked values") {
  const auto zero = SlackSpec::oracle_zero();
  const auto r = bound_classification(0.95, 10, 100, 0.1, zero, 500);
  CHECK(r.normalized_bound == doctest::Approx(0.2140883184902407).epsilon(1e-6));
  CHECK(r.normalized_bound ==
        doctest::Approx(0.1 + 0.9 * std::exp(-100.0 * kl_direct(0.9, 0.95))).epsilon(1e-12));
  CHECK(r.tail_term == doctest::Approx(0.1));
  CHECK(r.r_min == 0.0);
  CHECK_FALSE(r.clamped);

  CHECK(bound_classification(0.85, 10, 100, 0.1, zero, 500).normalized_bound == 1.0);
  CHECK(bound_classification(0.85, 10, 100, 0.1, SlackSpec::assumption_beta(1.0, 0.1), 500)
            .normalized_bound == 1.0);
  CHECK(bound_classification(0.9, 10, 100, 0.1, zero, 500).normalized_bound ==
        doctest::Approx(1.0));
  CHECK(bound_classification(1.0, 10, 100, 0.1, zero, 500).normalized_bound ==
        doctest::Approx(0.1));
  CHECK_THROWS(bound_classification(1.2, 10, 100, 0.1, zero, 500));
  CHECK_THROWS(bound_classification(0.9, 1, 100, 0.1, zero, 500));
  CHECK_THROWS(bound_classification(0.9, 10, 0, 0.1, zero, 500));
  CHECK_THROWS(bound_classification(0.9, 10, 100, 1.0, zero, 500));
}

TEST_CASE("general bound with atom density reproduces the classification bound") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double p_hat = unit(rng);
    const int k = 2 + static_cast<int>(unit(rng) * 20);
    const std::size_t n_cal = 1 + static_cast<std::size_t>(unit(rng) * 500);
    const double alpha = 0.01 + 0.98 * unit(rng);
    const auto space = LabelSpace::discrete(k);
    std::vector<double> samples;
    const int n_tr = 200;
    const int correct = static_cast<int>(std::lround(p_hat * n_tr));
    for (int j = 0; j < n_tr; ++j) samples.push_back(j < correct ? 0.0 : 1.0);
    const auto cdf = CdfEstimate::strict_step(samples, CdfSource::TrainingAveraged);
    const BoundQuery q{.n_tr = n_tr,
                       .n_cal = n_cal,
                       .alpha = alpha,
                       .cdf = cdf,
                       .gamma = gamma_closed_form(ScoreSpec::zero_one(), space),
                       .slack = SlackSpec::oracle_zero(),
                       .r_max = 1.0};
    const auto thm = bound_theorem1(q);
    const auto cls =
        bound_classification(cdf.right_limit(0.0), k, n_cal, alpha, SlackSpec::oracle_zero(), n_tr);
    CHECK(std::abs(thm.normalized_bound - cls.normalized_bound) <= 1e-12);
  }
}

TEST_CASE("general bound: perfect fit gives zero") {
  const auto cdf = CdfEstimate::strict_step(std::vector<double>(50, 0.0), CdfSource::Analytic);
  for (auto tail : {TailMode::PaperLiteral, TailMode::ExactIntegral}) {
    const BoundQuery q{.n_tr = 50,
                       .n_cal = 100,
                       .alpha = 0.1,
                       .cdf = cdf,
                       .gamma = GammaDensity::lp_power(1.0, 1.0),
                       .r_max = 1.0,
                       .tail_mode = tail};
    const auto r = bound_theorem1(q);
    CHECK(r.normalized_bound == 0.0);
    CHECK(r.r_min == 0.0);
  }
  const auto reg = bound_regression(cdf, 2.0, 0.0, 1.0, 100, 0.1, SlackSpec::oracle_zero(), 50);
  CHECK(reg.normalized_bound == 0.0);
}

TEST_CASE("general bound: uniform scores clamp") {
  const BoundQuery q{.n_tr = 50,
                     .n_cal = 100,
                     .alpha = 0.1,
                     .cdf = linear_grid({{0.0, 0.0}, {1.0, 1.0}}),
                     .gamma = GammaDensity::lp_power(1.0, 1.0),
                     .r_max = 1.0,
                     .tail_mode = TailMode::PaperLiteral};
  const auto r = bound_theorem1(q);
  CHECK(r.r_min == doctest::Approx(0.9));
  CHECK(r.tail_term == doctest::Approx(1.8));
  CHECK(r.integral_term > 0.0);
  CHECK(r.normalized_bound == 1.0);
  CHECK(r.clamped);
}

TEST_CASE("regression bound p=1 linear c.d.f.") {
  const auto cdf = linear_grid({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}});
  const auto r = bound_regression(cdf, 1.0, 0.0, 1.0, 100, 0.1, SlackSpec::oracle_zero(), 100);
  CHECK(r.r_min == doctest::Approx(0.45).epsilon(1e-14));
  CHECK(r.tail_term == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(r.integral_term == doctest::Approx(0.03228848971879248).epsilon(1e-9));
  CHECK(r.normalized_bound == doctest::Approx(0.93228848971879248).epsilon(1e-9));
}

TEST_CASE("exact tail exceeds the literal tail by the factor p") {
  const auto cdf = linear_grid({{0.0, 0.0}, {0.25, 1.0}, {1.0, 1.0}});
  const auto lit = bound_regression(cdf, 2.0, 0.0, 1.0, 100, 0.1, SlackSpec::oracle_zero(), 100,
                                    TailMode::PaperLiteral);
  const auto exact = bound_regression(cdf, 2.0, 0.0, 1.0, 100, 0.1, SlackSpec::oracle_zero(), 100,
                                      TailMode::ExactIntegral);
  CHECK(lit.r_min == exact.r_min);
  CHECK(exact.tail_term == doctest::Approx(2.0 * std::sqrt(exact.r_min)).epsilon(1e-14));
  CHECK(lit.tail_term == doctest::Approx(std::sqrt(lit.r_min)).epsilon(1e-14));
  CHECK(exact.tail_term >= lit.tail_term);
  CHECK(exact.integral_term == doctest::Approx(lit.integral_term).epsilon(1e-14));
}

TEST_CASE("quadrature on a piecewise-constant c.d.f. matches the antiderivative") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s(37);
    for (auto& v : s) v = unit(rng);
    std::sort(s.begin(), s.end());
    const auto cdf = CdfEstimate::strict_step(s, CdfSource::Analytic);
    const std::size_t n_cal = 100;
    const double alpha = 0.15;
    const double a = static_cast<double>(n_alpha(n_cal, alpha)) / static_cast<double>(n_cal);
    const std::size_t k = static_cast<std::size_t>(std::ceil(a * 37.0));
    const double rmin = s[k - 1];
    double oracle = 0.0;
    for (std::size_t j = k - 1; j + 1 < s.size(); ++j) {
      const double f = static_cast<double>(j + 1) / 37.0;
      const double factor = f <= a ? 1.0 : std::exp(-static_cast<double>(n_cal) * kl_direct(a, f));
      oracle += factor * 2.0 * (std::sqrt(s[j + 1]) - std::sqrt(s[j]));
    }
    const auto r = bound_regression(cdf, 2.0, 0.0, 1.0, n_cal, alpha, SlackSpec::oracle_zero(), 37,
                                    TailMode::ExactIntegral);
    CHECK(r.r_min == doctest::Approx(rmin).epsilon(1e-15));
    CHECK(r.tail_term == doctest::Approx(2.0 * std::sqrt(rmin)).epsilon(1e-13));
    CHECK(r.integral_term == doctest::Approx(oracle).epsilon(1e-6));
  }
}

TEST_CASE("bound is non-decreasing in the calibration rank") {
  const std::vector<CdfEstimate> cdfs = {
      linear_grid({{0.0, 0.0}, {0.3, 0.6}, {1.0, 1.0}}),
      linear_grid({{0.0, 0.2}, {0.1, 0.9}, {0.6, 1.0}, {1.0, 1.0}}),
      CdfEstimate::strict_step({0.0, 0.05, 0.1, 0.2, 0.2, 0.4, 0.8}, CdfSource::Analytic)};
  for (const auto& cdf : cdfs) {
    for (std::size_t n_cal : {20u, 100u, 1000u}) {
      std::vector<std::pair<std::size_t, double>> pts;
      for (int i = 1; i < 100; ++i) {
        const double alpha = i / 100.0;
        const BoundQuery q{.n_tr = 100,
                           .n_cal = n_cal,
                           .alpha = alpha,
                           .cdf = cdf,
                           .gamma = GammaDensity::lp_power(1.0, 1.0),
                           .r_max = 1.0};
        pts.emplace_back(n_alpha(n_cal, alpha), bound_theorem1(q).normalized_bound);
      }
      std::sort(pts.begin(), pts.end());
      for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].second >= pts[i - 1].second - 1e-9);
    }
  }
}

TEST_CASE("bound approaches the tail term for large calibration sets") {
  const auto cdf = linear_grid({{0.0, 0.0}, {0.1, 1.0}, {1.0, 1.0}});
  const BoundQuery q{.n_tr = 100,
                     .n_cal = 100000,
                     .alpha = 0.1,
                     .cdf = cdf,
                     .gamma = GammaDensity::lp_power(1.0, 1.0),
                     .r_max = 1.0};
  const auto r = bound_theorem1(q);
  CHECK(r.integral_term < 1e-3);
  CHECK(std::abs(r.normalized_bound - r.tail_term) < 1e-3);
}

TEST_CASE("integral term decays as n^-1/2 for a continuous c.d.f.") {
  const auto cdf = linear_grid({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}});
  const auto integral = [&](std::size_t n) {
    return bound_theorem1({.n_tr = 100,
                           .n_cal = n,
                           .alpha = 0.1,
                           .cdf = cdf,
                           .gamma = GammaDensity::lp_power(1.0, 1.0),
                           .r_max = 1.0})
        .integral_term;
  };
  const double small = integral(10000);
  const double large = integral(100000);
  CHECK(small / large == doctest::Approx(std::sqrt(10.0)).epsilon(0.05));
  // gamma = 2 and F' = 2 near the quantile
  CHECK(large == doctest::Approx(std::sqrt(std::acos(-1.0) * 0.9 * 0.1 / 2e5)).epsilon(0.05));
}

TEST_CASE("slack shifts the c.d.f. down") {
  const auto cdf = linear_grid({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}});
  const auto zero = bound_regression(cdf, 1.0, 0.0, 1.0, 100, 0.1, SlackSpec::oracle_zero(), 400);
  const auto beta =
      bound_regression(cdf, 1.0, 0.0, 1.0, 100, 0.1, SlackSpec::assumption_beta(0.01, 0.1), 1000000);
  CHECK(beta.normalized_bound >= zero.normalized_bound);
  CHECK(beta.confidence == doctest::Approx(0.9));
  const auto vac =
      bound_regression(cdf, 1.0, 0.0, 1.0, 100, 0.1, SlackSpec::assumption_beta(1.0, 0.1), 100);
  CHECK(vac.normalized_bound == 1.0);
}

TEST_CASE("query validation") {
  const auto cdf = linear_grid({{0.0, 0.0}, {1.0, 1.0}});
  BoundQuery q{.n_tr = 10, .n_cal = 100, .alpha = 0.1, .cdf = cdf,
               .gamma = GammaDensity::lp_power(1.0, 2.0), .r_max = 1.0};
  CHECK_THROWS(bound_theorem1(q));
  q.gamma = GammaDensity::lp_power(1.0, 1.0);
  q.n_cal = 0;
  CHECK_THROWS(bound_theorem1(q));
  q.n_cal = 100;
  q.alpha = 0.0;
  CHECK_THROWS(bound_theorem1(q));
}

TEST_CASE("quadrature non-convergence is reported") {
  const auto f = [](double x) { return x < 0.3 ? 0.0 : 1.0; };
  CHECK_THROWS_AS(adaptive_simpson(f, 0.0, 1.0, {.tolerance = 1e-300, .max_depth = 3}),
                  QuadratureError);
  CHECK(adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const BoundQuery q{.n_tr = 10,
                     .n_cal = 100,
                     .alpha = 0.1,
                     .cdf = linear_grid({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.0}}),
                     .gamma = GammaDensity::lp_power(2.0, 1.0),
                     .r_max = 1.0,
                     .quadrature = {.tolerance = 1e-300, .max_depth = 1}};
  CHECK_THROWS_AS(bound_theorem1(q), QuadratureError);
}

TEST_CASE("bound result serialization") {
  const auto r = bound_classification(0.95, 10, 100, 0.1, SlackSpec::oracle_zero(), 500);
  const auto j = r.to_json();
  for (const char* key :
       {"normalized_bound", "r_min", "integral_term", "tail_term", "clamped", "confidence"}) {
    CHECK(j.contains(key));
  }
  CHECK(j.size() == 6);
  CHECK(j["normalized_bound"].get<double>() == r.normalized_bound);
  CHECK(BoundResult::csv_header() ==
        "normalized_bound,r_min,integral_term,tail_term,clamped,confidence");
  CHECK(r.csv_row().find(',') != std::string::npos);
}
