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

#include "cpsize/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cpsize {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 200.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string fixed(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* kind,
                     const char* color, const char* dash) {
  std::string s = "<polyline class=\"" + std::string(kind) + "\" fill=\"none\" stroke=\"" +
                  std::string(color) + "\" stroke-width=\"1.6\"";
  if (*dash) s += " stroke-dasharray=\"" + std::string(dash) + "\"";
  s += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s += (i ? " " : "") + fixed(pts[i].first) + "," + fixed(pts[i].second);
  }
  return s + "\"/>\n";
}

}  // namespace

std::string render_svg(const std::vector<SummaryRow>& all_rows, const std::string& title) {
  if (all_rows.empty()) throw std::invalid_argument("render_svg: no rows");
  const SlackSpec::Mode mode =
      std::min_element(all_rows.begin(), all_rows.end(), [](const auto& a, const auto& b) {
        return static_cast<int>(a.slack_mode) < static_cast<int>(b.slack_mode);
      })->slack_mode;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<SummaryRow>> curves;
  std::set<double> levels;
  for (const auto& r : all_rows) {
    if (r.slack_mode != mode) continue;
    curves[{r.n_tr, r.n_cal}].push_back(r);
    levels.insert(1.0 - r.alpha);
  }
  double x_lo = *levels.begin();
  double x_hi = *levels.rbegin();
  if (x_hi - x_lo < 1e-9) {
    x_lo -= 0.05;
    x_hi += 0.05;
  }
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto sy = [&](double y) { return kTop + (1.0 - std::clamp(y, 0.0, 1.0)) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
  svg << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(plot_w)
      << "\" height=\"" << fixed(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = i / 5.0;
    svg << "<line x1=\"" << fixed(kLeft - 4) << "\" y1=\"" << fixed(sy(y)) << "\" x2=\"" << fixed(kLeft)
        << "\" y2=\"" << fixed(sy(y)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(sy(y) + 4) << "\" text-anchor=\"end\">"
        << fixed(y, 1) << "</text>\n";
  }
  for (double x : levels) {
    svg << "<line x1=\"" << fixed(sx(x)) << "\" y1=\"" << fixed(kTop + plot_h) << "\" x2=\"" << fixed(sx(x))
        << "\" y2=\"" << fixed(kTop + plot_h + 4) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fixed(sx(x)) << "\" y=\"" << fixed(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << fixed(x) << "</text>\n";
  }
  svg << "<text x=\"" << fixed(kLeft + plot_w / 2) << "\" y=\"" << fixed(kHeight - 16)
      << "\" text-anchor=\"middle\">1 - alpha</text>\n";
  svg << "<text x=\"18\" y=\"" << fixed(kTop + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << fixed(kTop + plot_h / 2) << ")\">normalized set size</text>\n";

  std::size_t color = 0;
  double legend_y = kTop + 10;
  const double legend_x = kLeft + plot_w + 16;
  for (auto& [key, rows] : curves) {
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.alpha > b.alpha; });
    const char* c = kPalette[color++ % std::size(kPalette)];
    std::vector<std::pair<double, double>> emp;
    std::vector<std::pair<double, double>> thm1;
    std::vector<std::pair<double, double>> special;
    for (const auto& r : rows) {
      const double x = sx(1.0 - r.alpha);
      emp.emplace_back(x, sy(r.size_mean));
      thm1.emplace_back(x, sy(r.bound_thm1_mean));
      special.emplace_back(x, sy(r.bound_cls_or_reg_mean));
      svg << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(sy(r.size_mean - r.size_se)) << "\" x2=\""
          << fixed(x) << "\" y2=\"" << fixed(sy(r.size_mean + r.size_se)) << "\" stroke=\"" << c
          << "\"/>\n";
      svg << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(sy(r.size_mean)) << "\" r=\"2.5\" fill=\""
          << c << "\"/>\n";
    }
    svg << polyline(emp, "empirical", c, "");
    svg << polyline(thm1, "bound-general", c, "6,4");
    svg << polyline(special, "bound-task", c, "2,3");
    svg << "<line x1=\"" << fixed(legend_x) << "\" y1=\"" << fixed(legend_y) << "\" x2=\""
        << fixed(legend_x + 20) << "\" y2=\"" << fixed(legend_y) << "\" stroke=\"" << c
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fixed(legend_x + 26) << "\" y=\"" << fixed(legend_y + 4) << "\">n_tr=" << key.first
        << ", n_cal=" << key.second << "</text>\n";
    legend_y += 18;
  }
  legend_y += 8;
  const std::pair<const char*, const char*> styles[] = {
      {"", "empirical"}, {"6,4", "general bound"}, {"2,3", "task bound"}};
  for (const auto& [dash, label] : styles) {
    svg << "<line x1=\"" << fixed(legend_x) << "\" y1=\"" << fixed(legend_y) << "\" x2=\""
        << fixed(legend_x + 20) << "\" y2=\"" << fixed(legend_y) << "\" stroke=\"black\"";
    if (*dash) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << "/>\n<text x=\"" << fixed(legend_x + 26) << "\" y=\"" << fixed(legend_y + 4) << "\">" << label
        << "</text>\n";
    legend_y += 18;
  }
  svg << "<text x=\"" << fixed(legend_x) << "\" y=\"" << fixed(legend_y + 8) << "\">slack: " << to_string(mode)
      << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_markdown(const std::vector<SummaryRow>& rows, const std::string& task,
                            std::size_t n_records) {
  std::ostringstream md;
  md << "# " << task << " summary\n\n";
  md << n_records << " records, " << rows.size() << " grid points.\n\n";
  md << "| n_tr | n_cal | alpha | slack | trials | coverage | size | bound_thm1 | bound_cls_or_reg | bound_cor1 |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    md << "| " << r.n_tr << " | " << r.n_cal << " | " << fixed(r.alpha, 3) << " | " << to_string(r.slack_mode)
       << " | " << r.n_trials << " | " << fixed(r.coverage_mean, 4) << " ± " << fixed(r.coverage_se, 4)
       << " | " << fixed(r.size_mean, 4) << " ± " << fixed(r.size_se, 4) << " | "
       << fixed(r.bound_thm1_mean, 4) << " | " << fixed(r.bound_cls_or_reg_mean, 4) << " | "
       << fixed(r.bound_cor1_mean, 4) << " |\n";
  }
  return md.str();
}

ReportFiles render_report(const std::filesystem::path& records_csv, const std::filesystem::path& out_dir,
                          std::string task) {
  std::ifstream in(records_csv);
  if (!in) throw std::runtime_error("cannot open records file '" + records_csv.string() + "'");
  const std::vector<TrialRecord> records = read_records_csv(in);
  if (task.empty()) {
    const auto cfg_path = records_csv.parent_path() / "config.json";
    std::ifstream cfg_in(cfg_path);
    if (cfg_in) {
      const auto j = nlohmann::json::parse(cfg_in, nullptr, false);
      if (j.is_object() && j.contains("task") && j["task"].is_string()) task = j["task"].get<std::string>();
    }
    if (task.empty()) task = "experiment";
  }
  const auto rows = summarize(records);
  std::filesystem::create_directories(out_dir);
  ReportFiles files{out_dir / (task + "_size_vs_level.svg"), out_dir / (task + "_summary.md")};
  write_file_atomic(files.svg, render_svg(rows, "Normalized set size vs 1 - alpha (" + task + ")"));
  write_file_atomic(files.markdown, render_markdown(rows, task, records.size()));
  return files;
}

}  // namespace cpsize
