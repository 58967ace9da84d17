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
#include <filesystem>
#include <random>
#include <vector>

#include "cpsize/learners.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cpsize;
using cpsize::testing::gradient_gap;
using cpsize::testing::random_dataset;
using cpsize::testing::randomize;

namespace {

Dataset separable(std::size_t n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  Dataset d;
  d.space = LabelSpace::discrete(2);
  d.features.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = i % 2 == 0 ? -2.0 : 2.0;
    d.features(static_cast<Eigen::Index>(i), 0) = c + jitter(rng);
    d.features(static_cast<Eigen::Index>(i), 1) = c + jitter(rng);
    d.targets.push_back(i % 2 == 0 ? 0.0 : 1.0);
  }
  return d;
}

Dataset constant_target(std::size_t n, double y) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset d;
  d.space = LabelSpace::interval(0.0, 1.0);
  d.features.resize(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index i = 0; i < d.features.size(); ++i) d.features.data()[i] = normal(rng);
  d.targets.assign(n, y);
  return d;
}

}  // namespace

TEST_CASE("separable data is fit exactly") {
  const auto data = separable(200);
  TrainConfig cfg;
  cfg.kind = LearnerKind::Logistic;
  cfg.epochs = 500;
  cfg.learning_rate = 0.1;
  cfg.ensemble_size = 1;
  cfg.seed = 3;
  const auto model = train_classifier(data, cfg);
  CHECK(training_accuracy(model, data) == 1.0);
  CHECK_FALSE(model.metadata().single_class);
}

TEST_CASE("training preconditions") {
  TrainConfig cfg;
  Dataset empty;
  empty.features.resize(0, 2);
  CHECK_THROWS(train_classifier(empty, cfg));
  empty.space = LabelSpace::interval(0.0, 1.0);
  CHECK_THROWS(train_regressor(empty, cfg));
  auto bad = constant_target(10, 0.5);
  bad.targets[3] = 1.5;
  CHECK_THROWS(train_regressor(bad, cfg));
  cfg.learning_rate = 0.0;
  CHECK_THROWS(train_classifier(separable(10), cfg));
  cfg = TrainConfig{};
  cfg.ensemble_size = 0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("single-class data trains and is flagged") {
  auto data = separable(20);
  for (auto& y : data.targets) y = 1.0;
  TrainConfig cfg;
  cfg.ensemble_size = 1;
  cfg.epochs = 5;
  const auto model = train_classifier(data, cfg);
  CHECK(model.metadata().single_class);
}

TEST_CASE("training is reproducible") {
  std::mt19937_64 rng(6);
  const auto data = random_dataset(TaskKind::Classification, 4, 3, 60, rng);
  TrainConfig cfg;
  cfg.kind = LearnerKind::Mlp;
  cfg.hidden = {8, 5};
  cfg.epochs = 10;
  cfg.ensemble_size = 3;
  cfg.seed = 99;
  const auto a = train_classifier(data, cfg);
  const auto b = train_classifier(data, cfg, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.member(i).params() == b.member(i).params());
  CHECK(a.to_json().dump() == b.to_json().dump());
  cfg.seed = 100;
  const auto c = train_classifier(data, cfg);
  CHECK(c.member(0).params() != a.member(0).params());

  const auto reg = random_dataset(TaskKind::Regression, 3, 0, 40, rng);
  TrainConfig rcfg = cfg;
  rcfg.temperature = 1e-4;
  const auto r1 = train_regressor(reg, rcfg);
  const auto r2 = train_regressor(reg, rcfg);
  CHECK(r1.to_json().dump() == r2.to_json().dump());
  CHECK(r1.size() == 3);
  CHECK(r1.member(0).params() != r1.member(1).params());
}

TEST_CASE("constant target regression") {
  const auto data = constant_target(100, 0.5);
  TrainConfig cfg;
  cfg.kind = LearnerKind::Mlp;
  cfg.hidden = {10};
  cfg.learning_rate = 0.1;
  cfg.epochs = 1000;
  cfg.ensemble_size = 1;
  cfg.seed = 2;
  const auto model = train_regressor(data, cfg);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(std::get<double>(model.member(0).predict(data.row(i))) == doctest::Approx(0.5).epsilon(0.02));
  }
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(123);
  for (int rep = 0; rep < 20; ++rep) {
    const auto cls = random_dataset(TaskKind::Classification, 4, 3, 15, rng);
    DenseModel logistic(TaskKind::Classification, {4, 3}, cls.space);
    DenseModel mlp(TaskKind::Classification, {4, 6, 5, 3}, cls.space);
    randomize(logistic, rng);
    randomize(mlp, rng);
    CHECK(gradient_gap(logistic, cls, 0.0) <= 1e-5);
    CHECK(gradient_gap(mlp, cls, rep % 2 ? 0.01 : 0.0) <= 1e-5);
    const auto reg = random_dataset(TaskKind::Regression, 3, 0, 15, rng);
    DenseModel rmlp(TaskKind::Regression, {3, 7, 1}, reg.space);
    randomize(rmlp, rng);
    CHECK(gradient_gap(rmlp, reg, 0.0) <= 1e-5);
  }
}

TEST_CASE("model draws") {
  std::mt19937_64 rng(8);
  const auto data = random_dataset(TaskKind::Classification, 2, 2, 10, rng);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.ensemble_size = 1;
  const auto one = train_classifier(data, cfg);
  Rng r = make_rng(1);
  for (int i = 0; i < 20; ++i) CHECK(&draw_model(one, r) == &one.member(0));

  cfg.ensemble_size = 4;
  const auto four = train_classifier(data, cfg);
  std::vector<int> counts(4, 0);
  Rng r4 = make_rng(5);
  for (int i = 0; i < 100000; ++i) {
    const DenseModel* m = &draw_model(four, r4);
    counts[static_cast<std::size_t>(m - &four.member(0))]++;
  }
  for (int c : counts) CHECK(std::abs(c / 100000.0 - 0.25) <= 0.01);

  Rng ra = make_rng(77);
  Rng rb = make_rng(77);
  for (int i = 0; i < 50; ++i) CHECK(&draw_model(four, ra) == &draw_model(four, rb));
}

TEST_CASE("prediction rules") {
  const auto k10 = LabelSpace::discrete(10);
  DenseModel zero(TaskKind::Classification, {3, 10}, k10);
  const std::vector<double> x{0.3, -1.0, 2.0};
  CHECK(std::get<Label>(zero.predict(x)) == 0);

  DenseModel three(TaskKind::Classification, {2, 3}, LabelSpace::discrete(3));
  three.params().tail(3) << 0.1, 2.3, -1.0;
  CHECK(std::get<Label>(three.predict(std::vector<double>{1.0, 1.0})) == 1);

  DenseModel reg(TaskKind::Regression, {2, 1}, LabelSpace::interval(0.0, 1.0));
  reg.params()(2) = 1.4;
  CHECK(reg.raw_output(std::vector<double>{0.0, 0.0})(0) == doctest::Approx(1.4));
  CHECK(std::get<double>(reg.predict(std::vector<double>{0.0, 0.0})) == 1.0);
  CHECK_THROWS(reg.predict(std::vector<double>{0.0}));
}

TEST_CASE("regressor predictions stay in range") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double lo = normal(rng);
    const auto space = LabelSpace::interval(lo, lo + 0.5 + std::abs(normal(rng)));
    DenseModel m(TaskKind::Regression, {2, 4, 1}, space);
    randomize(m, rng, 5.0);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x{normal(rng), normal(rng)};
      const double y = std::get<double>(m.predict(x));
      CHECK(y >= space.lower());
      CHECK(y <= space.upper());
    }
  }
}

TEST_CASE("full-batch descent is monotone") {
  std::mt19937_64 rng(4);
  const auto data = random_dataset(TaskKind::Classification, 3, 3, 80, rng);
  TrainConfig cfg;
  cfg.kind = LearnerKind::Mlp;
  cfg.hidden = {6};
  cfg.learning_rate = 0.05;
  cfg.epochs = 100;
  cfg.batch_size = 80;
  cfg.ensemble_size = 1;
  cfg.record_loss = true;
  const auto model = train_classifier(data, cfg);
  const auto& h = model.metadata().loss_history;
  REQUIRE(h.size() == 100);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-12);
  CHECK(h.back() < h.front());
}

TEST_CASE("ensemble files round trip") {
  std::mt19937_64 rng(10);
  const auto data = random_dataset(TaskKind::Regression, 2, 0, 30, rng);
  TrainConfig cfg;
  cfg.kind = LearnerKind::Mlp;
  cfg.hidden = {4};
  cfg.epochs = 3;
  cfg.ensemble_size = 2;
  cfg.seed = 5;
  const auto model = train_regressor(data, cfg);
  const auto path = std::filesystem::temp_directory_path() / "cpsize_test_ensemble.json";
  model.save(path);
  const auto back = ModelEnsemble::load(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(back.member(i).params() == model.member(i).params());
  CHECK(back.metadata().config.seed == 5);
  CHECK(back.member(0).space() == model.member(0).space());
  CHECK_THROWS(ModelEnsemble::from_json(nlohmann::json{{"format", "other"}}));
  CHECK_THROWS(ModelEnsemble::load("/nonexistent/dir/file.json"));
}

TEST_CASE("train config json") {
  TrainConfig cfg;
  cfg.kind = LearnerKind::Mlp;
  cfg.hidden = {3, 2};
  cfg.temperature = 0.5;
  const auto back = train_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK_THROWS(train_config_from_json(nlohmann::json{{"epoch", 3}}));
  CHECK(learner_kind_from_string("mlp") == LearnerKind::Mlp);
  CHECK_THROWS(learner_kind_from_string("svm"));
}
