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

#include <functional>
#include <stdexcept>

namespace cpsize {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureOptions {
  /// Absolute error target for the whole interval; split in proportion to width.
  double tolerance = 1e-9;
  int max_depth = 30;
};

/// Adaptive composite Simpson with Richardson correction. Throws
/// QuadratureError when a panel fails to converge within max_depth bisections.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& options = {});

}  // namespace cpsize
