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

#include <filesystem>
#include <string>
#include <vector>

#include "cpsize/harness.hpp"

namespace cpsize {

struct ReportFiles {
  std::filesystem::path svg;
  std::filesystem::path markdown;
};

/// Normalized set size and bounds against 1 - alpha: one empirical curve with
/// error bars per (n_tr, n_cal), bound curves dashed. Uses the first slack
/// mode present in the rows. Output depends only on the rows.
std::string render_svg(const std::vector<SummaryRow>& rows, const std::string& title);

std::string render_markdown(const std::vector<SummaryRow>& rows, const std::string& task,
                            std::size_t n_records);

/// Reads a records CSV and writes <task>_size_vs_level.svg and <task>_summary.md
/// into out_dir. An empty task is taken from config.json next to the records
/// file when present, else "experiment".
ReportFiles render_report(const std::filesystem::path& records_csv,
                          const std::filesystem::path& out_dir, std::string task = "");

}  // namespace cpsize
