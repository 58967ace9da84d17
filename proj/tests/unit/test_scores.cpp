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


#include <cmath>
#include <random>

#include "cpsize/scores.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cpsize;
using cpsize::testing::ConstantPredictor;

TEST_CASE("zero-one and lp scores") {
  const auto k10 = LabelSpace::discrete(10);
  const auto unit = LabelSpace::interval(0.0, 1.0);
  const auto zo = ScoreSpec::zero_one();
  CHECK(nc_score(zo, k10, Label{3}, Label{3}) == 0.0);
  CHECK(nc_score(zo, k10, Label{3}, Label{5}) == 1.0);
  const auto l2 = ScoreSpec::lp_power(2.0, unit);
  CHECK(l2.r_max() == 1.0);
  CHECK(nc_score(l2, unit, 0.5, 0.3) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(ScoreSpec::lp_power(3.0, LabelSpace::interval(-1.0, 1.0)).r_max() == doctest::Approx(8.0));
  CHECK_THROWS(nc_score(zo, k10, 0.5, Label{1}));
  CHECK_THROWS(nc_score(zo, k10, Label{10}, Label{1}));
  CHECK_THROWS(nc_score(l2, unit, 1.5, 0.3));
  CHECK_THROWS(nc_score(l2, unit, Label{1}, 0.3));
  CHECK_THROWS(ScoreSpec::lp_power(0.5, unit));
  CHECK_THROWS(ScoreSpec::lp_power(2.0, k10));
  CHECK_THROWS(LabelSpace::discrete(1));
  CHECK_THROWS(LabelSpace::interval(1.0, 1.0));
}

TEST_CASE("scores stay in range") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double lo = -5.0 + 10.0 * u(rng);
    const double hi = lo + 0.01 + 5.0 * u(rng);
    const auto space = LabelSpace::interval(lo, hi);
    const auto spec = ScoreSpec::lp_power(1.0 + 3.0 * u(rng), space);
    const double f = lo + (hi - lo) * u(rng);
    const double y = lo + (hi - lo) * u(rng);
    const double s = nc_score(spec, space, f, y);
    CHECK(s >= 0.0);
    CHECK(s <= spec.r_max());
    const int k = 2 + static_cast<int>(u(rng) * 30);
    const auto ks = LabelSpace::discrete(k);
    const Label a = static_cast<Label>(u(rng) * k);
    const Label b = static_cast<Label>(u(rng) * k);
    const double z = nc_score(ScoreSpec::zero_one(), ks, a, b);
    CHECK((z == 0.0 || z == 1.0));
  }
}

TEST_CASE("closed-form densities") {
  const auto g = gamma_closed_form(ScoreSpec::zero_one(), LabelSpace::discrete(10));
  REQUIRE(g.is_atomic());
  REQUIRE(g.atom_list().size() == 2);
  CHECK(g.atom_list()[0].r == 0.0);
  CHECK(g.atom_list()[0].mass == doctest::Approx(0.1));
  CHECK(g.atom_list()[1].mass == doctest::Approx(0.9));

  const auto wide = LabelSpace::interval(0.0, 2.0);
  const auto g1 = gamma_closed_form(ScoreSpec::lp_power(1.0, wide), wide);
  for (double r : {0.1, 0.7, 1.3, 1.9}) CHECK(g1.at(r) == doctest::Approx(1.0));
  const auto unit = LabelSpace::interval(0.0, 1.0);
  const auto g2 = gamma_closed_form(ScoreSpec::lp_power(2.0, unit), unit);
  CHECK(g2.at(0.25) == doctest::Approx(2.0));
  CHECK_THROWS(gamma_closed_form(ScoreSpec::zero_one(), unit));
  CHECK_THROWS(gamma_closed_form(ScoreSpec::lp_power(2.0, unit), LabelSpace::discrete(3)));
}

TEST_CASE("closed-form densities normalize") {
  for (int k = 2; k <= 50; ++k) {
    const auto g = gamma_closed_form(ScoreSpec::zero_one(), LabelSpace::discrete(k));
    double total = 0.0;
    for (const auto& a : g.atom_list()) total += a.mass;
    CHECK(std::abs(total - 1.0) <= 1e-9);
    CHECK(g.non_decreasing());
  }
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0}) {
    for (double w : {0.5, 1.0, 4.0}) {
      const auto g = GammaDensity::lp_power(p, w);
      CHECK(g.cumulative(std::pow(w / 2.0, p)) == doctest::Approx(1.0).epsilon(1e-15));
      CHECK(g.cumulative(0.0) == 0.0);
      CHECK(g.non_decreasing() == (p == 1.0));
      // grid scan agrees with the flag
      bool increasing = true;
      for (int i = 1; i < 200; ++i) {
        const double r0 = std::pow(w, p) * i / 200.0;
        const double r1 = std::pow(w, p) * (i + 1) / 200.0;
        if (g.at(r1) < g.at(r0) - 1e-12) increasing = false;
      }
      CHECK(increasing == g.non_decreasing());
    }
  }
}

TEST_CASE("cumulative matches numerical integration") {
  const auto g = GammaDensity::lp_power(2.5, 1.5);
  const double hi = 0.7;
  const int n = 2000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += g.at((i + 0.5) * hi / n);
  CHECK(sum * hi / n == doctest::Approx(g.cumulative(hi)).epsilon(1e-3));
}

TEST_CASE("empirical density for the zero-one score") {
  const auto space = LabelSpace::discrete(10);
  ConstantPredictor model(Label{4}, 3);
  FeatureMatrix inputs = FeatureMatrix::Zero(50, 3);
  const ModelSampler sampler = [&](Rng&) -> const PointPredictor& { return model; };
  const auto g = gamma_empirical(ScoreSpec::zero_one(), space, sampler, inputs,
                                 {.n_samples = 100000, .seed = 1});
  REQUIRE(g.is_atomic());
  CHECK(std::abs(g.atom_list()[0].mass - 0.1) <= 0.01);
  CHECK(g.atom_list()[0].mass + g.atom_list()[1].mass == doctest::Approx(1.0));
  CHECK_THROWS(gamma_empirical(ScoreSpec::zero_one(), space, sampler, FeatureMatrix(0, 3)));
  CHECK_THROWS(gamma_empirical(ScoreSpec::zero_one(), space, sampler, inputs, {.n_samples = 0}));
}

TEST_CASE("empirical density for the lp score lies under the envelope") {
  const auto space = LabelSpace::interval(0.0, 1.0);
  const auto spec = ScoreSpec::lp_power(1.0, space);
  ConstantPredictor model(0.3, 2);
  FeatureMatrix inputs = FeatureMatrix::Zero(10, 2);
  const ModelSampler sampler = [&](Rng&) -> const PointPredictor& { return model; };
  const std::size_t n = 100000;
  const auto g = gamma_empirical(spec, space, sampler, inputs, {.n_samples = n, .bins = 50, .seed = 2});
  REQUIRE(g.is_tabulated());
  const auto& h = g.histogram();
  CHECK(h.edges.size() == 51);
  double total = 0.0;
  for (std::size_t b = 0; b < h.density.size(); ++b) {
    const double lo = h.edges[b];
    const double hi = h.edges[b + 1];
    const double width = hi - lo;
    // |0.3 - Y| with Y uniform: density 2 below 0.3, 1 up to 0.7, 0 beyond
    const double mass = 2.0 * std::max(0.0, std::min(hi, 0.3) - lo) +
                        std::max(0.0, std::min(hi, 0.7) - std::max(lo, 0.3));
    const double se = std::sqrt(mass * (1.0 - mass) / static_cast<double>(n));
    CHECK(std::abs(h.density[b] * width - mass) <= 5.0 * se + 1e-12);
    CHECK(h.density[b] <= 2.0 + 5.0 * se / width);
    total += h.density[b] * width;
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS(gamma_empirical(spec, space, sampler, inputs, {.bins = 0}));
}

TEST_CASE("empirical zero-one density converges with more samples") {
  const auto space = LabelSpace::discrete(10);
  ConstantPredictor model(Label{0}, 1);
  FeatureMatrix inputs = FeatureMatrix::Zero(5, 1);
  const ModelSampler sampler = [&](Rng&) -> const PointPredictor& { return model; };
  double dev_small = 0.0;
  double dev_large = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto a = gamma_empirical(ScoreSpec::zero_one(), space, sampler, inputs,
                                   {.n_samples = 2000, .seed = seed});
    const auto b = gamma_empirical(ScoreSpec::zero_one(), space, sampler, inputs,
                                   {.n_samples = 6000, .seed = 1000 + seed});
    dev_small += std::abs(a.atom_list()[0].mass - 0.1);
    dev_large += std::abs(b.atom_list()[0].mass - 0.1);
  }
  CHECK(dev_large < dev_small);
}
