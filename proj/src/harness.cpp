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

#include "cpsize/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "cpsize/calibration.hpp"
#include "cpsize/cdf.hpp"
#include "cpsize/numeric.hpp"

namespace cpsize {

namespace {

std::size_t max_of(const std::vector<std::size_t>& v) { return *std::max_element(v.begin(), v.end()); }

template <typename T>
std::size_t index_of(const std::vector<T>& v, const T& x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

nlohmann::json data_to_json(const DataSource& src) {
  if (const auto* csv = std::get_if<CsvSource>(&src)) {
    nlohmann::json j = {{"csv", csv->path.string()},
                        {"target_column", csv->schema.target_column},
                        {"feature_columns", csv->schema.feature_columns}};
    if (csv->schema.space.is_discrete()) {
      j["num_labels"] = csv->schema.space.num_labels();
    } else {
      j["lower"] = csv->schema.space.lower();
      j["upper"] = csv->schema.space.upper();
    }
    return j;
  }
  const auto& spec = std::get<SyntheticSpec>(src);
  if (const auto* c = std::get_if<ClassificationSpec>(&spec)) {
    return {{"generator", "classification"},
            {"num_classes", c->num_classes},
            {"dim", c->dim},
            {"separation", c->separation}};
  }
  const auto& r = std::get<RegressionSpec>(spec);
  return {{"generator", "regression"},
          {"dim", r.dim},
          {"noise", r.noise},
          {"lower", r.lower},
          {"upper", r.upper}};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
}

DataSource data_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config 'data' must be an object");
  if (j.contains("csv")) {
    reject_unknown(j, {"csv", "target_column", "feature_columns", "num_labels", "lower", "upper"},
                   "config data");
    CsvSource src;
    src.path = j.at("csv").get<std::string>();
    src.schema.target_column = j.value("target_column", std::string("y"));
    src.schema.feature_columns = j.value("feature_columns", std::vector<std::string>{});
    if (j.contains("num_labels")) {
      src.schema.space = LabelSpace::discrete(j.at("num_labels").get<int>());
    } else {
      src.schema.space = LabelSpace::interval(j.value("lower", 0.0), j.value("upper", 1.0));
    }
    return src;
  }
  const std::string gen = j.value("generator", std::string());
  if (gen == "classification") {
    reject_unknown(j, {"generator", "num_classes", "dim", "separation"}, "config data");
    ClassificationSpec s;
    s.num_classes = j.value("num_classes", s.num_classes);
    s.dim = j.value("dim", s.dim);
    s.separation = j.value("separation", s.separation);
    return SyntheticSpec{s};
  }
  if (gen == "regression") {
    reject_unknown(j, {"generator", "dim", "noise", "lower", "upper"}, "config data");
    RegressionSpec s;
    s.dim = j.value("dim", s.dim);
    s.noise = j.value("noise", s.noise);
    s.lower = j.value("lower", s.lower);
    s.upper = j.value("upper", s.upper);
    return SyntheticSpec{s};
  }
  throw std::invalid_argument("config 'data' needs \"csv\" or \"generator\": classification|regression");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_tr.empty() || n_cal.empty() || alpha.empty()) throw std::invalid_argument("config: grids must be nonempty");
  for (auto n : n_tr) {
    if (n < 2) throw std::invalid_argument("config: n_tr values must be >= 2");
  }
  for (auto n : n_cal) {
    if (n < 1) throw std::invalid_argument("config: n_cal values must be >= 1");
  }
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("config: alpha values must lie in (0, 1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("config: delta must lie in (0, 1)");
  if (!(c > 0.0)) throw std::invalid_argument("config: c must be positive");
  if (slack_modes.empty()) throw std::invalid_argument("config: slack_modes must be nonempty");
  if (n_trials < 1) throw std::invalid_argument("config: n_trials must be >= 1");
  if (n_test < 1) throw std::invalid_argument("config: n_test must be >= 1");
  if (!(p >= 1.0)) throw std::invalid_argument("config: p must be >= 1");
  if (population_samples < 1) throw std::invalid_argument("config: population_samples must be >= 1");
  train.validate();
  const LabelSpace s = space();
  if ((task == TaskKind::Classification) != s.is_discrete()) {
    throw std::invalid_argument("config: task does not match the data's label space");
  }
}

LabelSpace ExperimentConfig::space() const {
  if (const auto* csv = std::get_if<CsvSource>(&data)) return csv->schema.space;
  return label_space_of(std::get<SyntheticSpec>(data));
}

ScoreSpec ExperimentConfig::score() const {
  if (task == TaskKind::Classification) return ScoreSpec::zero_one();
  return ScoreSpec::lp_power(p, space());
}

SlackSpec ExperimentConfig::slack(SlackSpec::Mode mode) const {
  switch (mode) {
    case SlackSpec::Mode::OracleZero:
      return SlackSpec::oracle_zero();
    case SlackSpec::Mode::AssumptionBeta:
      return SlackSpec::assumption_beta(c, delta);
    case SlackSpec::Mode::CorollaryBetaMu:
      return SlackSpec::corollary_beta_mu(c, delta);
  }
  return SlackSpec::oracle_zero();
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  std::vector<std::string> modes;
  for (auto m : cfg.slack_modes) modes.emplace_back(to_string(m));
  return {{"task", to_string(cfg.task)},
          {"data", data_to_json(cfg.data)},
          {"train", to_json(cfg.train)},
          {"n_tr", cfg.n_tr},
          {"n_cal", cfg.n_cal},
          {"alpha", cfg.alpha},
          {"delta", cfg.delta},
          {"c", cfg.c},
          {"slack_modes", modes},
          {"tail_mode", to_string(cfg.tail_mode)},
          {"n_trials", cfg.n_trials},
          {"n_test", cfg.n_test},
          {"seed", cfg.seed},
          {"out_dir", cfg.out_dir},
          {"p", cfg.p},
          {"per_point_draws", cfg.per_point_draws},
          {"record_wall_time", cfg.record_wall_time},
          {"population_samples", cfg.population_samples}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig cfg;
  bool has_data = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "task") {
        cfg.task = task_kind_from_string(value.get<std::string>());
      } else if (key == "data") {
        cfg.data = data_from_json(value);
        has_data = true;
      } else if (key == "train") {
        cfg.train = train_config_from_json(value);
      } else if (key == "n_tr") {
        cfg.n_tr = value.get<std::vector<std::size_t>>();
      } else if (key == "n_cal") {
        cfg.n_cal = value.get<std::vector<std::size_t>>();
      } else if (key == "alpha") {
        cfg.alpha = value.get<std::vector<double>>();
      } else if (key == "delta") {
        cfg.delta = value.get<double>();
      } else if (key == "c") {
        cfg.c = value.get<double>();
      } else if (key == "slack_modes") {
        cfg.slack_modes.clear();
        for (const auto& m : value) cfg.slack_modes.push_back(slack_mode_from_string(m.get<std::string>()));
      } else if (key == "tail_mode") {
        cfg.tail_mode = tail_mode_from_string(value.get<std::string>());
      } else if (key == "n_trials") {
        cfg.n_trials = value.get<std::size_t>();
      } else if (key == "n_test") {
        cfg.n_test = value.get<std::size_t>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "out_dir") {
        cfg.out_dir = value.get<std::string>();
      } else if (key == "p") {
        cfg.p = value.get<double>();
      } else if (key == "per_point_draws") {
        cfg.per_point_draws = value.get<bool>();
      } else if (key == "record_wall_time") {
        cfg.record_wall_time = value.get<bool>();
      } else if (key == "population_samples") {
        cfg.population_samples = value.get<std::size_t>();
      } else {
        throw std::invalid_argument("unknown key");
      }
    } catch (const std::exception& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
  }
  if (!has_data && cfg.task == TaskKind::Regression) cfg.data = SyntheticSpec{RegressionSpec{}};
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> cols = {
      "seed",      "n_tr",       "n_cal",     "alpha",     "coverage",         "coverage_se",
      "mean_size_norm", "size_se", "bound_thm1", "bound_cls_or_reg", "bound_cor1", "r_min",
      "slack_mode", "tail_mode", "clamped",   "wall_ms"};
  return cols;
}

void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : records) {
    os << r.seed << ',' << r.n_tr << ',' << r.n_cal << ',' << format_double(r.alpha) << ','
       << format_double(r.coverage) << ',' << format_double(r.coverage_se) << ','
       << format_double(r.mean_size_norm) << ',' << format_double(r.size_se) << ','
       << format_double(r.bound_thm1) << ',' << format_double(r.bound_cls_or_reg) << ','
       << format_double(r.bound_cor1) << ',' << format_double(r.r_min) << ','
       << to_string(r.slack_mode) << ',' << to_string(r.tail_mode) << ','
       << (r.clamped ? "true" : "false") << ',' << format_double(r.wall_ms) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::uint64_t parse_unsigned(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<TrialRecord> read_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("records CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const auto& cols = record_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i >= header.size()) throw std::invalid_argument("records CSV: missing column '" + cols[i] + "'");
    if (header[i] != cols[i]) {
      throw std::invalid_argument("records CSV: column " + std::to_string(i + 1) + " is '" + header[i] +
                                  "', expected '" + cols[i] + "'");
    }
  }
  if (header.size() > cols.size()) {
    throw std::invalid_argument("records CSV: unexpected column '" + header[cols.size()] + "'");
  }
  std::vector<TrialRecord> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != cols.size()) {
      throw std::invalid_argument("records CSV row " + std::to_string(row) + ": expected " +
                                  std::to_string(cols.size()) + " fields");
    }
    std::size_t col = 0;
    try {
      TrialRecord r;
      r.seed = parse_unsigned(f[col]);
      r.n_tr = parse_unsigned(f[++col]);
      r.n_cal = parse_unsigned(f[++col]);
      r.alpha = parse_double(f[++col]);
      r.coverage = parse_double(f[++col]);
      r.coverage_se = parse_double(f[++col]);
      r.mean_size_norm = parse_double(f[++col]);
      r.size_se = parse_double(f[++col]);
      r.bound_thm1 = parse_double(f[++col]);
      r.bound_cls_or_reg = parse_double(f[++col]);
      r.bound_cor1 = parse_double(f[++col]);
      r.r_min = parse_double(f[++col]);
      r.slack_mode = slack_mode_from_string(f[++col]);
      r.tail_mode = tail_mode_from_string(f[++col]);
      ++col;
      if (f[col] != "true" && f[col] != "false") throw std::invalid_argument("expected true or false");
      r.clamped = f[col] == "true";
      r.wall_ms = parse_double(f[++col]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw std::invalid_argument("records CSV row " + std::to_string(row) + ", column '" + cols[col] +
                                  "': " + e.what());
    }
  }
  if (out.empty()) throw std::invalid_argument("records CSV has no data rows");
  return out;
}

nlohmann::json to_json(const TrialRecord& r) {
  return {{"seed", r.seed},
          {"trial", r.trial},
          {"n_tr", r.n_tr},
          {"n_cal", r.n_cal},
          {"alpha", r.alpha},
          {"coverage", r.coverage},
          {"coverage_se", r.coverage_se},
          {"mean_size_norm", r.mean_size_norm},
          {"size_se", r.size_se},
          {"bound_thm1", r.bound_thm1},
          {"bound_cls_or_reg", r.bound_cls_or_reg},
          {"bound_cor1", r.bound_cor1},
          {"r_min", r.r_min},
          {"slack_mode", to_string(r.slack_mode)},
          {"tail_mode", to_string(r.tail_mode)},
          {"clamped", r.clamped},
          {"wall_ms", r.wall_ms},
          {"p_tr_hat", r.p_tr_hat}};
}

TrialRecord trial_record_from_json(const nlohmann::json& j) {
  TrialRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.trial = j.at("trial").get<std::size_t>();
  r.n_tr = j.at("n_tr").get<std::size_t>();
  r.n_cal = j.at("n_cal").get<std::size_t>();
  r.alpha = j.at("alpha").get<double>();
  r.coverage = j.at("coverage").get<double>();
  r.coverage_se = j.at("coverage_se").get<double>();
  r.mean_size_norm = j.at("mean_size_norm").get<double>();
  r.size_se = j.at("size_se").get<double>();
  r.bound_thm1 = j.at("bound_thm1").get<double>();
  r.bound_cls_or_reg = j.at("bound_cls_or_reg").get<double>();
  r.bound_cor1 = j.at("bound_cor1").get<double>();
  r.r_min = j.at("r_min").get<double>();
  r.slack_mode = slack_mode_from_string(j.at("slack_mode").get<std::string>());
  r.tail_mode = tail_mode_from_string(j.at("tail_mode").get<std::string>());
  r.clamped = j.at("clamped").get<bool>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.p_tr_hat = j.at("p_tr_hat").get<double>();
  return r;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t trial) {
  return derive_seed(master, {stream_tag("trial"), trial});
}

namespace {

struct TrialData {
  Dataset train_all;
  Dataset cal_all;
  Dataset test;
};

TrialData draw_trial_data(const ExperimentConfig& cfg, std::size_t max_tr, std::size_t max_cal,
                          std::uint64_t seed, const Dataset* csv) {
  if (csv) {
    Split s = split_dataset(*csv, max_tr, max_cal, cfg.n_test, derive_seed(seed, {stream_tag("split")}));
    return {std::move(s.train), std::move(s.cal), std::move(s.test)};
  }
  const auto& spec = std::get<SyntheticSpec>(cfg.data);
  return {generate_synthetic(spec, max_tr, derive_seed(seed, {stream_tag("train")})),
          generate_synthetic(spec, max_cal, derive_seed(seed, {stream_tag("cal")})),
          generate_synthetic(spec, cfg.n_test, derive_seed(seed, {stream_tag("test")}))};
}

template <typename F>
auto stage(const char* name, std::size_t n_tr, std::size_t trial, std::uint64_t seed, F&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage '") + name + "' (n_tr=" + std::to_string(n_tr) +
                             ", trial=" + std::to_string(trial) + ", seed=" + std::to_string(seed) +
                             "): " + e.what());
  }
}

ModelEnsemble fit(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t seed) {
  TrainConfig tcfg = cfg.train;
  tcfg.seed = seed;
  return cfg.task == TaskKind::Classification ? train_classifier(train, tcfg)
                                              : train_regressor(train, tcfg);
}

/// All records for one (n_tr, trial): every requested n_cal, alpha and slack mode.
std::vector<TrialRecord> evaluate_group(const ExperimentConfig& cfg, std::size_t n_tr,
                                        std::size_t trial, const std::vector<std::size_t>& n_cals,
                                        const std::vector<double>& alphas, const Dataset* csv) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t seed = trial_seed(cfg.seed, trial);
  const std::size_t max_tr = std::max(max_of(cfg.n_tr), n_tr);
  const std::size_t max_cal = std::max(max_of(cfg.n_cal), max_of(n_cals));
  const LabelSpace space = cfg.space();
  const ScoreSpec spec = cfg.score();

  const TrialData data =
      stage("data", n_tr, trial, seed, [&] { return draw_trial_data(cfg, max_tr, max_cal, seed, csv); });
  const Dataset train = data.train_all.head(n_tr);
  const ModelEnsemble ensemble = stage("train", n_tr, trial, seed, [&] {
    return fit(cfg, train, derive_seed(seed, {stream_tag("fit"), n_tr}));
  });

  std::vector<double> cal_scores(max_cal);
  std::vector<Outcome> test_preds(cfg.n_test);
  std::vector<double> test_scores(cfg.n_test);
  stage("score", n_tr, trial, seed, [&] {
    Rng cal_rng = make_rng(derive_seed(seed, {stream_tag("cal_draw"), n_tr}));
    Rng test_rng = make_rng(derive_seed(seed, {stream_tag("test_draw"), n_tr}));
    const DenseModel* fixed = cfg.per_point_draws ? nullptr : &ensemble.draw(cal_rng);
    for (std::size_t i = 0; i < max_cal; ++i) {
      const DenseModel& m = fixed ? *fixed : ensemble.draw(cal_rng);
      cal_scores[i] = nc_score(spec, space, m.predict(data.cal_all.row(i)), data.cal_all.target(i));
    }
    for (std::size_t j = 0; j < cfg.n_test; ++j) {
      const DenseModel& m = fixed ? *fixed : ensemble.draw(test_rng);
      test_preds[j] = m.predict(data.test.row(j));
      test_scores[j] = nc_score(spec, space, test_preds[j], data.test.target(j));
    }
    return 0;
  });

  struct TrainingSide {
    CdfEstimate averaged;
    CdfEstimate doubly;
    double p_tr_hat;
  };
  const TrainingSide side = stage("training_cdf", n_tr, trial, seed, [&] {
    const auto all = ensemble.pointers();
    Rng de_rng = make_rng(derive_seed(seed, {stream_tag("de_draw"), n_tr}));
    std::vector<const PointPredictor*> per_point(train.size());
    for (auto& ptr : per_point) ptr = &ensemble.draw(de_rng);
    return TrainingSide{
        training_cdf(all, train, spec, TrainingCdfMode::Averaged),
        training_cdf(per_point, train, spec, TrainingCdfMode::DoublyEmpirical),
        cfg.task == TaskKind::Classification ? training_accuracy(ensemble, train) : 0.0};
  });

  const GammaDensity gamma = gamma_closed_form(spec, space);
  std::vector<TrialRecord> out;
  for (std::size_t n_cal : n_cals) {
    const CalibrationSet cal(std::vector<double>(cal_scores.begin(),
                                                 cal_scores.begin() + static_cast<std::ptrdiff_t>(n_cal)),
                             spec.r_max());
    for (double alpha : alphas) {
      const ConformalQuantile q = conformal_quantile(cal, alpha);
      MeanAccumulator covered;
      MeanAccumulator size;
      for (std::size_t j = 0; j < cfg.n_test; ++j) {
        const PredictionSet set = predict_set(spec, space, test_preds[j], q);
        covered.add(set.contains(data.test.target(j)) ? 1.0 : 0.0);
        size.add(set.size(space) / space.size());
      }
      for (auto mode : cfg.slack_modes) {
        stage("bound", n_tr, trial, seed, [&] {
          const SlackSpec slack = cfg.slack(mode);
          const BoundResult thm1 = bound_theorem1(BoundQuery{.n_tr = n_tr,
                                                             .n_cal = n_cal,
                                                             .alpha = alpha,
                                                             .cdf = side.averaged,
                                                             .gamma = gamma,
                                                             .slack = slack,
                                                             .r_max = spec.r_max(),
                                                             .tail_mode = cfg.tail_mode});
          const BoundResult special =
              cfg.task == TaskKind::Classification
                  ? bound_classification(side.p_tr_hat, space.num_labels(), n_cal, alpha, slack, n_tr)
                  : bound_regression(side.averaged, cfg.p, space.lower(), space.upper(), n_cal, alpha,
                                     slack, n_tr, TailMode::PaperLiteral);
          const SlackSpec cor_slack = mode == SlackSpec::Mode::OracleZero
                                          ? slack
                                          : SlackSpec::corollary_beta_mu(cfg.c, cfg.delta);
          const BoundResult cor1 = bound_theorem1(BoundQuery{.n_tr = n_tr,
                                                             .n_cal = n_cal,
                                                             .alpha = alpha,
                                                             .cdf = side.doubly,
                                                             .gamma = gamma,
                                                             .slack = cor_slack,
                                                             .r_max = spec.r_max(),
                                                             .tail_mode = cfg.tail_mode});
          TrialRecord r;
          r.seed = seed;
          r.trial = trial;
          r.n_tr = n_tr;
          r.n_cal = n_cal;
          r.alpha = alpha;
          r.coverage = covered.mean();
          r.coverage_se = covered.standard_error();
          r.mean_size_norm = size.mean();
          r.size_se = size.standard_error();
          r.bound_thm1 = thm1.normalized_bound;
          r.bound_cls_or_reg = special.normalized_bound;
          r.bound_cor1 = cor1.normalized_bound;
          r.r_min = thm1.r_min;
          r.slack_mode = mode;
          r.tail_mode = cfg.tail_mode;
          r.clamped = thm1.clamped;
          r.p_tr_hat = side.p_tr_hat;
          out.push_back(r);
          return 0;
        });
      }
    }
  }
  if (cfg.record_wall_time) {
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : out) r.wall_ms = ms;
  }
  return out;
}

std::optional<Dataset> load_source(const ExperimentConfig& cfg) {
  if (const auto* src = std::get_if<CsvSource>(&cfg.data)) {
    Dataset d = load_csv(src->path, src->schema);
    if (d.size() < max_of(cfg.n_tr) + max_of(cfg.n_cal) + cfg.n_test) {
      throw std::invalid_argument("CSV has " + std::to_string(d.size()) +
                                  " rows, fewer than max n_tr + max n_cal + n_test");
    }
    return d;
  }
  return std::nullopt;
}

}  // namespace

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, std::size_t n_tr, std::size_t n_cal,
                                   double alpha, std::size_t trial) {
  cfg.validate();
  const auto source = load_source(cfg);
  return evaluate_group(cfg, n_tr, trial, {n_cal}, {alpha}, source ? &*source : nullptr);
}

std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records) {
  using Key = std::tuple<std::size_t, std::size_t, double, int, int>;
  struct Acc {
    MeanAccumulator cov, size, thm1, special, cor1, rmin;
  };
  std::map<Key, Acc> groups;
  for (const auto& r : records) {
    auto& a = groups[Key{r.n_tr, r.n_cal, r.alpha, static_cast<int>(r.slack_mode),
                         static_cast<int>(r.tail_mode)}];
    a.cov.add(r.coverage);
    a.size.add(r.mean_size_norm);
    a.thm1.add(r.bound_thm1);
    a.special.add(r.bound_cls_or_reg);
    a.cor1.add(r.bound_cor1);
    a.rmin.add(r.r_min);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, a] : groups) {
    SummaryRow s;
    s.n_tr = std::get<0>(key);
    s.n_cal = std::get<1>(key);
    s.alpha = std::get<2>(key);
    s.slack_mode = static_cast<SlackSpec::Mode>(std::get<3>(key));
    s.tail_mode = static_cast<TailMode>(std::get<4>(key));
    s.n_trials = a.cov.count();
    s.coverage_mean = a.cov.mean();
    s.coverage_se = a.cov.standard_error();
    s.size_mean = a.size.mean();
    s.size_se = a.size.standard_error();
    s.bound_thm1_mean = a.thm1.mean();
    s.bound_cls_or_reg_mean = a.special.mean();
    s.bound_cor1_mean = a.cor1.mean();
    s.r_min_mean = a.rmin.mean();
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "n_tr,n_cal,alpha,slack_mode,tail_mode,n_trials,coverage_mean,coverage_se,size_mean,size_se,"
        "bound_thm1_mean,bound_cls_or_reg_mean,bound_cor1_mean,r_min_mean\n";
  for (const auto& s : rows) {
    os << s.n_tr << ',' << s.n_cal << ',' << format_double(s.alpha) << ',' << to_string(s.slack_mode)
       << ',' << to_string(s.tail_mode) << ',' << s.n_trials << ',' << format_double(s.coverage_mean)
       << ',' << format_double(s.coverage_se) << ',' << format_double(s.size_mean) << ','
       << format_double(s.size_se) << ',' << format_double(s.bound_thm1_mean) << ','
       << format_double(s.bound_cls_or_reg_mean) << ',' << format_double(s.bound_cor1_mean) << ','
       << format_double(s.r_min_mean) << '\n';
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

namespace {

nlohmann::json partial_header(const ExperimentConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("out_dir");
  return {{"config", j}};
}

/// Reads completed groups from a partial file, ignoring a truncated final line.
std::map<std::pair<std::size_t, std::size_t>, std::vector<TrialRecord>> read_partial(
    const std::filesystem::path& path, const ExperimentConfig& cfg) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<TrialRecord>> done;
  std::ifstream in(path);
  if (!in) return done;
  std::string line;
  if (!std::getline(in, line)) return done;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const std::exception&) {
    return done;
  }
  if (header != partial_header(cfg)) {
    throw std::runtime_error("'" + path.string() +
                             "' was written by a different configuration; remove it to start over");
  }
  while (std::getline(in, line)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception&) {
      break;
    }
    std::vector<TrialRecord> recs;
    for (const auto& r : j.at("records")) recs.push_back(trial_record_from_json(r));
    done[{j.at("n_tr").get<std::size_t>(), j.at("trial").get<std::size_t>()}] = std::move(recs);
  }
  return done;
}

std::string group_line(std::size_t n_tr, std::size_t trial, const std::vector<TrialRecord>& recs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : recs) arr.push_back(to_json(r));
  return nlohmann::json{{"n_tr", n_tr}, {"trial", trial}, {"records", arr}}.dump() + "\n";
}

void sort_records(std::vector<TrialRecord>& records, const ExperimentConfig& cfg) {
  auto key = [&](const TrialRecord& r) {
    return std::make_tuple(index_of(cfg.n_tr, r.n_tr), index_of(cfg.n_cal, r.n_cal),
                           index_of(cfg.alpha, r.alpha), index_of(cfg.slack_modes, r.slack_mode),
                           r.trial);
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const TrialRecord& a, const TrialRecord& b) { return key(a) < key(b); });
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& options) {
  cfg.validate();
  const std::filesystem::path out_dir(cfg.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto partial_path = out_dir / "records.partial.jsonl";
  const auto source = load_source(cfg);
  const Dataset* csv = source ? &*source : nullptr;

  auto done = read_partial(partial_path, cfg);
  {
    std::string content = partial_header(cfg).dump() + "\n";
    for (const auto& [key, recs] : done) content += group_line(key.first, key.second, recs);
    write_file_atomic(partial_path, content);
  }

  SweepResult result;
  result.groups_resumed = done.size();
  std::vector<std::pair<std::size_t, std::size_t>> pending;
  for (std::size_t n_tr : cfg.n_tr) {
    for (std::size_t t = 0; t < cfg.n_trials; ++t) {
      if (!done.count({n_tr, t})) pending.emplace_back(n_tr, t);
    }
  }

  std::mutex mu;
  std::ofstream partial(partial_path, std::ios::app);
  std::atomic<std::size_t> started{0};
  bool stopped = false;
  parallel_for(pending.size(), options.workers, [&](std::size_t i) {
    if (options.stop_after_groups && started.fetch_add(1) >= *options.stop_after_groups) {
      std::lock_guard lock(mu);
      stopped = true;
      return;
    }
    const auto [n_tr, trial] = pending[i];
    try {
      auto recs = evaluate_group(cfg, n_tr, trial, cfg.n_cal, cfg.alpha, csv);
      std::lock_guard lock(mu);
      partial << group_line(n_tr, trial, recs);
      partial.flush();
      done[{n_tr, trial}] = std::move(recs);
      ++result.groups_run;
      if (options.verbose) {
        std::cerr << "done n_tr=" << n_tr << " trial=" << trial << " (" << done.size() << "/"
                  << cfg.n_tr.size() * cfg.n_trials << ")\n";
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      result.failures.push_back({n_tr, trial, e.what()});
    }
  });
  partial.close();

  for (auto& [key, recs] : done) result.records.insert(result.records.end(), recs.begin(), recs.end());
  sort_records(result.records, cfg);
  std::sort(result.failures.begin(), result.failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.n_tr, a.trial) < std::tie(b.n_tr, b.trial);
  });
  result.summary = summarize(result.records);
  result.complete = !stopped && result.failures.empty();
  if (!result.complete) return result;

  std::ostringstream records_csv;
  write_records_csv(records_csv, result.records);
  write_file_atomic(out_dir / "records.csv", records_csv.str());
  std::ostringstream summary_csv;
  write_summary_csv(summary_csv, result.summary);
  write_file_atomic(out_dir / "summary.csv", summary_csv.str());
  write_file_atomic(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
  std::filesystem::remove(partial_path);
  return result;
}

std::vector<OperatingPointRow> population_operating_points(const ExperimentConfig& cfg,
                                                           std::size_t cal_trials,
                                                           std::size_t workers) {
  cfg.validate();
  const auto* synth = std::get_if<SyntheticSpec>(&cfg.data);
  if (!synth) throw std::invalid_argument("population operating points need a synthetic data source");
  const LabelSpace space = cfg.space();
  const ScoreSpec spec = cfg.score();
  const GammaDensity gamma = gamma_closed_form(spec, space);
  const DataSampler data_sampler = synthetic_sampler(*synth);

  std::vector<OperatingPointRow> rows;
  for (std::size_t n_tr : cfg.n_tr) {
    const std::uint64_t seed = derive_seed(cfg.seed, {stream_tag("operating_point"), n_tr});
    const Dataset train = generate_synthetic(*synth, n_tr, derive_seed(seed, {stream_tag("train")}));
    const ModelEnsemble ensemble = fit(cfg, train, derive_seed(seed, {stream_tag("fit")}));
    const CdfEstimate pop =
        population_cdf_mc(ensemble.sampler(), data_sampler, spec, space, cfg.population_samples,
                          derive_seed(seed, {stream_tag("population")}));
    for (std::size_t n_cal : cfg.n_cal) {
      const TrialSampler sampler = [&](Rng& rng, std::size_t) {
        TrialDraw d;
        d.cal_scores.resize(n_cal);
        const DenseModel* fixed = cfg.per_point_draws ? nullptr : &ensemble.draw(rng);
        for (auto& s : d.cal_scores) {
          const LabeledPoint z = data_sampler(rng);
          const DenseModel& m = fixed ? *fixed : ensemble.draw(rng);
          s = nc_score(spec, space, m.predict(z.x), z.y);
        }
        const LabeledPoint z = data_sampler(rng);
        const DenseModel& m = fixed ? *fixed : ensemble.draw(rng);
        const Outcome pred = m.predict(z.x);
        d.test_score = nc_score(spec, space, pred, z.y);
        d.normalized_size = [pred, &spec, &space](const ConformalQuantile& q) {
          return predict_set(spec, space, pred, q).size(space) / space.size();
        };
        return d;
      };
      const std::uint64_t trials_seed = derive_seed(seed, {stream_tag("calibration"), n_cal});
      for (double alpha : cfg.alpha) {
        const CoverageEstimate est =
            estimate_coverage_and_size(sampler, alpha, spec.r_max(), cal_trials, trials_seed, workers);
        BoundQuery q{.n_tr = n_tr,
                     .n_cal = n_cal,
                     .alpha = alpha,
                     .cdf = pop,
                     .gamma = gamma,
                     .slack = SlackSpec::oracle_zero(),
                     .r_max = spec.r_max(),
                     .tail_mode = TailMode::ExactIntegral};
        const BoundResult exact = bound_theorem1(q);
        q.tail_mode = TailMode::PaperLiteral;
        const BoundResult literal = bound_theorem1(q);
        OperatingPointRow row;
        row.n_tr = n_tr;
        row.n_cal = n_cal;
        row.alpha = alpha;
        row.coverage = est.coverage;
        row.coverage_se = est.coverage_se;
        row.mean_size_norm = est.mean_normalized_size;
        row.size_se = est.size_se;
        row.bound = exact.normalized_bound;
        row.bound_paper_literal = literal.normalized_bound;
        row.r_min = exact.r_min;
        row.vacuous = exact.normalized_bound >= 1.0;
        row.n_trials = est.n_trials;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace cpsize
