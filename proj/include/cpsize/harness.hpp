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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cpsize/bounds.hpp"
#include "cpsize/dataio.hpp"
#include "cpsize/learners.hpp"

#include "json.hpp"

namespace cpsize {

struct CsvSource {
  std::filesystem::path path;
  CsvSchema schema;
};

using DataSource = std::variant<SyntheticSpec, CsvSource>;

struct ExperimentConfig {
  TaskKind task = TaskKind::Classification;
  DataSource data = ClassificationSpec{};
  TrainConfig train;
  std::vector<std::size_t> n_tr = {100, 500};
  std::vector<std::size_t> n_cal = {50, 100, 200};
  std::vector<double> alpha = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  double delta = 0.1;
  /// Mutual-information constant in beta.
  double c = 1.0;
  std::vector<SlackSpec::Mode> slack_modes = {SlackSpec::Mode::OracleZero};
  TailMode tail_mode = TailMode::ExactIntegral;
  std::size_t n_trials = 20;
  std::size_t n_test = 2000;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  /// Exponent of the |f - y|^p regression score.
  double p = 2.0;
  /// Fresh model draw per calibration / test point; false uses one draw per trial.
  bool per_point_draws = true;
  bool record_wall_time = true;
  /// Held-out draws for population c.d.f. estimates.
  std::size_t population_samples = 100000;

  void validate() const;
  LabelSpace space() const;
  ScoreSpec score() const;
  SlackSpec slack(SlackSpec::Mode mode) const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Keys match the field names; missing keys keep defaults, unknown keys are errors.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct TrialRecord {
  std::uint64_t seed = 0;
  std::size_t trial = 0;
  std::size_t n_tr = 0;
  std::size_t n_cal = 0;
  double alpha = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_size_norm = 0.0;
  double size_se = 0.0;
  double bound_thm1 = 1.0;
  double bound_cls_or_reg = 1.0;
  double bound_cor1 = 1.0;
  double r_min = 0.0;
  SlackSpec::Mode slack_mode = SlackSpec::Mode::OracleZero;
  TailMode tail_mode = TailMode::ExactIntegral;
  bool clamped = false;
  double wall_ms = 0.0;
  /// Ensemble-averaged training accuracy (classification only).
  double p_tr_hat = 0.0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// seed,n_tr,n_cal,alpha,coverage,coverage_se,mean_size_norm,size_se,bound_thm1,
/// bound_cls_or_reg,bound_cor1,r_min,slack_mode,tail_mode,clamped,wall_ms
const std::vector<std::string>& record_columns();
void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records);
/// Throws on an empty file or a header that differs from record_columns(),
/// naming the first offending column.
std::vector<TrialRecord> read_records_csv(std::istream& is);

nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_record_from_json(const nlohmann::json& j);

/// Seed of trial `trial` under the master seed.
std::uint64_t trial_seed(std::uint64_t master, std::size_t trial);

/// One grid point and trial: one record per configured slack mode. Data,
/// training and model draws are shared with every other grid point of the
/// same (n_tr, trial), so the records equal the corresponding sweep records.
std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, std::size_t n_tr, std::size_t n_cal,
                                   double alpha, std::size_t trial);

struct SummaryRow {
  std::size_t n_tr = 0;
  std::size_t n_cal = 0;
  double alpha = 0.0;
  SlackSpec::Mode slack_mode = SlackSpec::Mode::OracleZero;
  TailMode tail_mode = TailMode::ExactIntegral;
  std::size_t n_trials = 0;
  double coverage_mean = 0.0;
  double coverage_se = 0.0;
  double size_mean = 0.0;
  double size_se = 0.0;
  double bound_thm1_mean = 0.0;
  double bound_cls_or_reg_mean = 0.0;
  double bound_cor1_mean = 0.0;
  double r_min_mean = 0.0;
};

/// Mean and across-trial standard error per (n_tr, n_cal, alpha, slack_mode).
std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);

struct SweepFailure {
  std::size_t n_tr = 0;
  std::size_t trial = 0;
  std::string message;
};

struct SweepOptions {
  std::size_t workers = 1;
  /// Stop after this many newly completed (n_tr, trial) groups; the partial
  /// file is kept so a later run resumes.
  std::optional<std::size_t> stop_after_groups;
  bool verbose = false;
};

struct SweepResult {
  std::vector<TrialRecord> records;
  std::vector<SummaryRow> summary;
  std::vector<SweepFailure> failures;
  std::size_t groups_run = 0;
  std::size_t groups_resumed = 0;
  bool complete = false;
};

/// Runs every (n_tr, trial) group, evaluating all (n_cal, alpha, slack mode)
/// combinations per group. Completed groups are appended to
/// out_dir/records.partial.jsonl; a rerun skips them. When every group has
/// succeeded, records.csv, summary.csv and config.json are written atomically
/// and the partial file is removed.
SweepResult run_sweep(const ExperimentConfig& cfg, const SweepOptions& options = {});

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

struct OperatingPointRow {
  std::size_t n_tr = 0;
  std::size_t n_cal = 0;
  double alpha = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_size_norm = 0.0;
  double size_se = 0.0;
  /// General bound with the population c.d.f., zero slack, exact tail.
  double bound = 1.0;
  /// The same bound with the literal tail term.
  double bound_paper_literal = 1.0;
  double r_min = 0.0;
  bool vacuous = false;
  std::size_t n_trials = 0;
};

/// For each n_tr: train once, estimate the population c.d.f. of the NC score
/// from cfg.population_samples fresh draws, and run `cal_trials` independent
/// calibration + test draws per (n_cal, alpha). Requires a synthetic source.
std::vector<OperatingPointRow> population_operating_points(const ExperimentConfig& cfg,
                                                           std::size_t cal_trials,
                                                           std::size_t workers = 1);

}  // namespace cpsize
