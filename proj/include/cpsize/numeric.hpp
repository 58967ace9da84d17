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
#include <functional>
#include <string>

namespace cpsize {

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

/// Running mean / standard error with compensated sums.
class MeanAccumulator {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const;
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const;
  /// Standard error of the mean.
  double standard_error() const;

 private:
  std::size_t n_ = 0;
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
};

/// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double x);

/// Parses a full string as a double; throws std::invalid_argument otherwise.
double parse_double(const std::string& text);

/// Worker count from CPSIZE_WORKERS, else hardware concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown (the one with the lowest index wins) after all workers finish.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace cpsize
