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

// Command-line front end: simulate, sweep, bound, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cpsize/bounds.hpp"
#include "cpsize/cdf.hpp"
#include "cpsize/harness.hpp"
#include "cpsize/numeric.hpp"
#include "cpsize/report.hpp"
#include "json.hpp"

using namespace cpsize;
using nlohmann::json;

namespace {

CdfEstimate cdf_from_json(const json& j) {
  if (j.contains("samples")) {
    return CdfEstimate::strict_step(j.at("samples").get<std::vector<double>>(),
                                    cdf_source_from_string(j.value("source", "training_averaged")));
  }
  if (j.contains("grid")) {
    std::vector<std::pair<double, double>> nodes;
    for (const auto& node : j.at("grid")) nodes.emplace_back(node.at(0).get<double>(), node.at(1).get<double>());
    return CdfEstimate::grid(std::move(nodes), cdf_source_from_string(j.value("source", "analytic")));
  }
  if (j.contains("csv")) {
    const std::string path = j.at("csv").get<std::string>();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open c.d.f. file '" + path + "'");
    return CdfEstimate::read_csv(in);
  }
  throw std::invalid_argument("query 'cdf' needs \"samples\", \"grid\" or \"csv\"");
}

GammaDensity gamma_from_json(const json& j) {
  if (j.contains("zero_one")) {
    const int k = j.at("zero_one").at("num_labels").get<int>();
    return gamma_closed_form(ScoreSpec::zero_one(), LabelSpace::discrete(k));
  }
  if (j.contains("lp_power")) {
    const auto& g = j.at("lp_power");
    const LabelSpace space = LabelSpace::interval(g.value("lower", 0.0), g.value("upper", 1.0));
    return gamma_closed_form(ScoreSpec::lp_power(g.at("p").get<double>(), space), space);
  }
  if (j.contains("atoms")) {
    std::vector<GammaDensity::Atom> atoms;
    for (const auto& a : j.at("atoms")) atoms.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    return GammaDensity::atoms(std::move(atoms));
  }
  if (j.contains("histogram")) {
    const auto& h = j.at("histogram");
    return GammaDensity::tabulated(h.at("edges").get<std::vector<double>>(),
                                   h.at("density").get<std::vector<double>>());
  }
  throw std::invalid_argument("query 'gamma' needs zero_one, lp_power, atoms or histogram");
}

SlackSpec slack_from_json(const json& j) {
  const auto mode = slack_mode_from_string(j.value("mode", "oracle_zero"));
  const double c = j.value("c", 1.0);
  const double delta = j.value("delta", 0.1);
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

BoundResult evaluate_query(const json& q) {
  const std::string variant = q.value("variant", "theorem1");
  const auto n_tr = q.value("n_tr", std::size_t{100});
  const auto n_cal = q.at("n_cal").get<std::size_t>();
  const double alpha = q.at("alpha").get<double>();
  SlackSpec slack = slack_from_json(q.value("slack", json::object()));
  if (variant == "classification") {
    return bound_classification(q.at("p_tr_hat").get<double>(), q.at("num_labels").get<int>(), n_cal, alpha,
                                slack, n_tr);
  }
  const TailMode default_tail = variant == "regression" ? TailMode::PaperLiteral : TailMode::ExactIntegral;
  const TailMode tail =
      q.contains("tail_mode") ? tail_mode_from_string(q.at("tail_mode").get<std::string>()) : default_tail;
  const CdfEstimate cdf = cdf_from_json(q.at("cdf"));
  if (variant == "regression") {
    return bound_regression(cdf, q.at("p").get<double>(), q.value("lower", 0.0), q.value("upper", 1.0), n_cal,
                            alpha, slack, n_tr, tail);
  }
  if (variant == "corollary1") {
    const auto& s = q.value("slack", json::object());
    slack = SlackSpec::corollary_beta_mu(s.value("c", 1.0), s.value("delta", 0.1));
  } else if (variant != "theorem1") {
    throw std::invalid_argument("unknown bound variant '" + variant + "'");
  }
  const GammaDensity gamma = gamma_from_json(q.at("gamma"));
  QuadratureOptions quad;
  quad.tolerance = q.value("tolerance", quad.tolerance);
  return bound_theorem1(BoundQuery{.n_tr = n_tr,
                                   .n_cal = n_cal,
                                   .alpha = alpha,
                                   .cdf = cdf,
                                   .gamma = gamma,
                                   .slack = slack,
                                   .r_max = q.value("r_max", gamma.support_max()),
                                   .tail_mode = tail,
                                   .quadrature = quad});
}

ExperimentConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                             const std::string& out) {
  ExperimentConfig cfg = load_experiment_config(path);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.out_dir = out;
  return cfg;
}

int finish_sweep(const SweepResult& result, const ExperimentConfig& cfg) {
  for (const auto& f : result.failures) {
    std::cerr << "failed: n_tr=" << f.n_tr << " trial=" << f.trial << ": " << f.message << '\n';
  }
  if (!result.complete) {
    std::cerr << result.failures.size() << " group(s) failed; completed groups are kept in "
              << (std::filesystem::path(cfg.out_dir) / "records.partial.jsonl").string() << '\n';
    return 1;
  }
  std::cout << "wrote " << result.records.size() << " records (" << result.groups_run << " groups run, "
            << result.groups_resumed << " resumed) to "
            << (std::filesystem::path(cfg.out_dir) / "records.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split conformal prediction set-size bounds and experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;

  auto* simulate = app.add_subcommand("simulate", "Run all trials of one grid point");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Override the master seed");
  simulate->add_option("--out", out, "Override the output directory");
  std::optional<std::size_t> point_n_tr;
  std::optional<std::size_t> point_n_cal;
  std::optional<double> point_alpha;
  simulate->add_option("--n-tr", point_n_tr, "Training size (default: first grid value)");
  simulate->add_option("--n-cal", point_n_cal, "Calibration size (default: first grid value)");
  simulate->add_option("--alpha", point_alpha, "Miscoverage level (default: first grid value)");

  auto* sweep = app.add_subcommand("sweep", "Run the full (n_tr, n_cal, alpha) grid");
  sweep->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "Override the master seed");
  sweep->add_option("--out", out, "Override the output directory");
  bool verbose = false;
  sweep->add_flag("--verbose", verbose, "Log each completed group");

  auto* bound = app.add_subcommand("bound", "Evaluate a bound from a JSON query");
  std::string query_path = "-";
  std::string format = "json";
  bound->add_option("--query", query_path, "Query file, or - for stdin");
  bound->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  auto* report = app.add_subcommand("report", "Render SVG and markdown from a records CSV");
  std::string records_path;
  std::string task;
  report->add_option("--records", records_path, "records.csv")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "Output directory")->required();
  report->add_option("--task", task, "Task name used in file names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      ExperimentConfig cfg = load_config(config_path, seed, out);
      cfg.n_tr = {point_n_tr.value_or(cfg.n_tr.front())};
      cfg.n_cal = {point_n_cal.value_or(cfg.n_cal.front())};
      cfg.alpha = {point_alpha.value_or(cfg.alpha.front())};
      const SweepResult result = run_sweep(cfg, {.workers = worker_count()});
      const int rc = finish_sweep(result, cfg);
      if (rc == 0) write_summary_csv(std::cout, result.summary);
      return rc;
    }
    if (*sweep) {
      const ExperimentConfig cfg = load_config(config_path, seed, out);
      return finish_sweep(run_sweep(cfg, {.workers = worker_count(), .verbose = verbose}), cfg);
    }
    if (*bound) {
      json q;
      if (query_path == "-") {
        q = json::parse(std::cin);
      } else {
        std::ifstream in(query_path);
        if (!in) throw std::runtime_error("cannot open query file '" + query_path + "'");
        q = json::parse(in);
      }
      const BoundResult r = evaluate_query(q);
      if (format == "csv") {
        std::cout << BoundResult::csv_header() << '\n' << r.csv_row() << '\n';
      } else {
        std::cout << r.to_json().dump(2) << '\n';
      }
      return 0;
    }
    if (*report) {
      const ReportFiles files = render_report(records_path, out, task);
      std::cout << "wrote " << files.svg.string() << " and " << files.markdown.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
