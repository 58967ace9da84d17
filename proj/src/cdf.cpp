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

#include "cpsize/cdf.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cpsize/numeric.hpp"

namespace cpsize {

const char* to_string(CdfSource source) {
  switch (source) {
    case CdfSource::TrainingAveraged:
      return "training_averaged";
    case CdfSource::DoublyEmpirical:
      return "doubly_empirical";
    case CdfSource::PopulationMC:
      return "population_mc";
    case CdfSource::Analytic:
      return "analytic";
  }
  return "unknown";
}

CdfSource cdf_source_from_string(const std::string& name) {
  for (CdfSource s : {CdfSource::TrainingAveraged, CdfSource::DoublyEmpirical,
                      CdfSource::PopulationMC, CdfSource::Analytic}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown c.d.f. source '" + name + "'");
}

CdfEstimate::CdfEstimate(Kind kind, CdfSource source, std::shared_ptr<const std::vector<double>> xs,
                         std::shared_ptr<const std::vector<double>> vs)
    : kind_(kind), source_(source), xs_(std::move(xs)), vs_(std::move(vs)) {}

CdfEstimate CdfEstimate::strict_step(std::vector<double> samples, CdfSource source) {
  if (samples.empty()) throw std::invalid_argument("strict-step c.d.f. needs at least one sample");
  for (double s : samples) {
    if (!std::isfinite(s)) throw std::invalid_argument("c.d.f. samples must be finite");
  }
  std::sort(samples.begin(), samples.end());
  return CdfEstimate(Kind::StrictStep, source,
                     std::make_shared<const std::vector<double>>(std::move(samples)),
                     std::make_shared<const std::vector<double>>());
}

CdfEstimate CdfEstimate::grid(std::vector<std::pair<double, double>> nodes, CdfSource source) {
  if (nodes.empty()) throw std::invalid_argument("grid c.d.f. needs at least one node");
  std::vector<double> xs;
  std::vector<double> vs;
  xs.reserve(nodes.size());
  vs.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto [r, v] = nodes[i];
    if (!std::isfinite(r) || !(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("grid c.d.f. values must lie in [0, 1]");
    }
    if (i > 0 && !(r > xs.back())) throw std::invalid_argument("grid c.d.f. abscissae must increase");
    if (i > 0 && v < vs.back()) throw std::invalid_argument("grid c.d.f. must be non-decreasing");
    xs.push_back(r);
    vs.push_back(v);
  }
  return CdfEstimate(Kind::Grid, source, std::make_shared<const std::vector<double>>(std::move(xs)),
                     std::make_shared<const std::vector<double>>(std::move(vs)));
}

double CdfEstimate::operator()(double r) const {
  const auto& xs = *xs_;
  if (kind_ == Kind::StrictStep) {
    const auto count = std::lower_bound(xs.begin(), xs.end(), r) - xs.begin();
    return static_cast<double>(count) / static_cast<double>(xs.size());
  }
  const auto& vs = *vs_;
  if (r <= xs.front()) return vs.front();
  if (r >= xs.back()) return vs.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), r) - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (r - xs[lo]) / (xs[hi] - xs[lo]);
  return std::clamp(vs[lo] + w * (vs[hi] - vs[lo]), vs[lo], vs[hi]);
}

double CdfEstimate::right_limit(double r) const {
  if (kind_ == Kind::StrictStep) {
    const auto& xs = *xs_;
    const auto count = std::upper_bound(xs.begin(), xs.end(), r) - xs.begin();
    return static_cast<double>(count) / static_cast<double>(xs.size());
  }
  return (*this)(r);
}

std::vector<double> CdfEstimate::breakpoints() const {
  std::vector<double> out(xs_->begin(), xs_->end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<double> CdfEstimate::inverse(double t) const {
  const auto& xs = *xs_;
  if (kind_ == Kind::StrictStep) {
    const std::size_t n = xs.size();
    const double dn = static_cast<double>(n);
    if (t <= 0.0) return 0.0;
    // Smallest count k with k / n >= t, using the same expression as operator().
    std::size_t lo = 0;
    std::size_t hi = n + 1;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (mid <= n && static_cast<double>(mid) / dn >= t) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    if (lo > n) return std::nullopt;
    // F(r) >= k/n  <=>  more than k-1 samples below r  <=>  r > xs[k-1].
    return std::max(0.0, xs[lo - 1]);
  }
  const auto& vs = *vs_;
  if (vs.front() >= t) return 0.0;
  if (vs.back() < t) return std::nullopt;
  const auto it = std::lower_bound(vs.begin(), vs.end(), t);
  const auto hi = static_cast<std::size_t>(it - vs.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - vs[lo]) / (vs[hi] - vs[lo]);
  return std::max(0.0, xs[lo] + w * (xs[hi] - xs[lo]));
}

void CdfEstimate::write_csv(std::ostream& os) const {
  os << "r,value,source\n";
  const char* src = to_string(source_);
  if (kind_ == Kind::Grid) {
    for (std::size_t i = 0; i < xs_->size(); ++i) {
      os << format_double((*xs_)[i]) << ',' << format_double((*vs_)[i]) << ',' << src << '\n';
    }
    return;
  }
  for (double b : breakpoints()) {
    const double after = std::nextafter(b, std::numeric_limits<double>::infinity());
    os << format_double(b) << ',' << format_double((*this)(b)) << ',' << src << '\n';
    os << format_double(after) << ',' << format_double(right_limit(b)) << ',' << src << '\n';
  }
}

CdfEstimate CdfEstimate::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("c.d.f. CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "r,value,source") throw std::invalid_argument("c.d.f. CSV header must be r,value,source");
  std::vector<std::pair<double, double>> nodes;
  std::optional<CdfSource> source;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string r;
    std::string v;
    std::string s;
    if (!std::getline(ss, r, ',') || !std::getline(ss, v, ',') || !std::getline(ss, s)) {
      throw std::invalid_argument("c.d.f. CSV row " + std::to_string(row) + ": expected 3 fields");
    }
    try {
      nodes.emplace_back(parse_double(r), parse_double(v));
      source = cdf_source_from_string(s);
    } catch (const std::exception& e) {
      throw std::invalid_argument("c.d.f. CSV row " + std::to_string(row) + ": " + e.what());
    }
  }
  if (nodes.empty()) throw std::invalid_argument("c.d.f. CSV has no rows");
  return grid(std::move(nodes), *source);
}

CdfEstimate training_cdf(std::span<const PointPredictor* const> models, const Dataset& train,
                         const ScoreSpec& spec, TrainingCdfMode mode) {
  if (models.empty()) throw std::invalid_argument("training_cdf: no model draws");
  if (train.size() == 0) throw std::invalid_argument("training_cdf: no training points");
  std::vector<double> scores;
  if (mode == TrainingCdfMode::Averaged) {
    scores.reserve(models.size() * train.size());
    for (const PointPredictor* model : models) {
      for (std::size_t i = 0; i < train.size(); ++i) {
        scores.push_back(nc_score(spec, train.space, model->predict(train.row(i)), train.target(i)));
      }
    }
    return CdfEstimate::strict_step(std::move(scores), CdfSource::TrainingAveraged);
  }
  if (models.size() != train.size()) {
    throw std::invalid_argument("training_cdf: doubly-empirical mode needs one model draw per point (" +
                                std::to_string(models.size()) + " draws, " +
                                std::to_string(train.size()) + " points)");
  }
  scores.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    scores.push_back(nc_score(spec, train.space, models[i]->predict(train.row(i)), train.target(i)));
  }
  return CdfEstimate::strict_step(std::move(scores), CdfSource::DoublyEmpirical);
}

CdfEstimate population_cdf_mc(const ModelSampler& model_sampler, const DataSampler& data_sampler,
                              const ScoreSpec& spec, const LabelSpace& space,
                              std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("population_cdf_mc: n_samples must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<double> scores;
  scores.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const PointPredictor& model = model_sampler(rng);
    const LabeledPoint z = data_sampler(rng);
    scores.push_back(nc_score(spec, space, model.predict(z.x), z.y));
  }
  return CdfEstimate::strict_step(std::move(scores), CdfSource::PopulationMC);
}

std::vector<double> refined_grid(const CdfEstimate& a, const CdfEstimate& b, double lo, double hi) {
  std::vector<double> grid{lo, hi};
  for (const CdfEstimate* c : {&a, &b}) {
    for (double x : c->breakpoints()) {
      for (double y : {x, std::nextafter(x, std::numeric_limits<double>::infinity())}) {
        if (y >= lo && y <= hi) grid.push_back(y);
      }
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double generalization_gap(const CdfEstimate& pop, const CdfEstimate& train,
                          std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("generalization_gap: empty grid");
  double gap = 0.0;
  for (double r : grid) gap = std::max(gap, std::abs(pop(r) - train(r)));
  return gap;
}

}  // namespace cpsize
