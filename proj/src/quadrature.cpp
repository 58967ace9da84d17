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

#include "cpsize/quadrature.hpp"

#include <cmath>
#include <sstream>

namespace cpsize {

namespace {

struct Panel {
  double a, b;
  double fa, fm, fb;
  double whole;
};

double refine(const std::function<double(double)>& f, const Panel& p, double eps, int depth,
              const QuadratureOptions& options) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
  const double right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
  const double both = left + right;
  const double err = both - p.whole;
  const bool resolved = lm <= p.a || rm >= p.b || lm >= m || rm <= m;
  if (std::abs(err) <= 15.0 * eps || std::abs(err) <= 1e-15 * std::abs(both) || resolved) {
    return both + err / 15.0;
  }
  if (depth >= options.max_depth) {
    std::ostringstream os;
    os << "adaptive Simpson did not converge on [" << p.a << ", " << p.b << "] after "
       << options.max_depth << " bisections (error estimate " << std::abs(err) / 15.0 << ")";
    throw QuadratureError(os.str());
  }
  return refine(f, {p.a, m, p.fa, flm, p.fm, left}, eps / 2.0, depth + 1, options) +
         refine(f, {m, p.b, p.fm, frm, p.fb, right}, eps / 2.0, depth + 1, options);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const QuadratureOptions& options) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return refine(f, {a, b, fa, fm, fb, whole}, options.tolerance, 0, options);
}

}  // namespace cpsize
