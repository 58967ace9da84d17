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

#include "cpsize/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cpsize {

LabelSpace LabelSpace::discrete(int num_labels) {
  if (num_labels < 2) throw std::invalid_argument("discrete label space needs K >= 2");
  LabelSpace s;
  s.discrete_ = true;
  s.num_labels_ = num_labels;
  return s;
}

LabelSpace LabelSpace::interval(double lower, double upper) {
  if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper)) {
    throw std::invalid_argument("interval label space needs finite lower < upper");
  }
  LabelSpace s;
  s.discrete_ = false;
  s.lower_ = lower;
  s.upper_ = upper;
  return s;
}

int LabelSpace::num_labels() const {
  if (!discrete_) throw std::logic_error("num_labels() on an interval label space");
  return num_labels_;
}

double LabelSpace::lower() const {
  if (discrete_) throw std::logic_error("lower() on a discrete label space");
  return lower_;
}

double LabelSpace::upper() const {
  if (discrete_) throw std::logic_error("upper() on a discrete label space");
  return upper_;
}

double LabelSpace::size() const {
  return discrete_ ? static_cast<double>(num_labels_) : upper_ - lower_;
}

bool LabelSpace::contains(const Outcome& y) const {
  if (discrete_) {
    const auto* label = std::get_if<Label>(&y);
    return label != nullptr && *label >= 0 && *label < num_labels_;
  }
  const auto* value = std::get_if<double>(&y);
  return value != nullptr && *value >= lower_ && *value <= upper_;
}

bool is_label(const Outcome& y) { return std::holds_alternative<Label>(y); }

std::string describe(const Outcome& y) {
  std::ostringstream os;
  if (is_label(y)) {
    os << "label " << std::get<Label>(y);
  } else {
    os << "value " << std::get<double>(y);
  }
  return os.str();
}

ScoreSpec ScoreSpec::zero_one() { return ScoreSpec(ScoreKind::ZeroOne, 0.0, 1.0); }

ScoreSpec ScoreSpec::lp_power(double p, const LabelSpace& space) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("lp_power score needs p >= 1");
  if (space.is_discrete()) throw std::invalid_argument("lp_power score needs an interval label space");
  return ScoreSpec(ScoreKind::LpPower, p, std::pow(space.size(), p));
}

double nc_score(const ScoreSpec& spec, const LabelSpace& space, const Outcome& prediction,
                const Outcome& truth) {
  if (spec.kind() == ScoreKind::ZeroOne) {
    if (!is_label(prediction) || !is_label(truth)) {
      throw std::invalid_argument("0-1 score needs discrete labels, got " + describe(prediction) +
                                  " and " + describe(truth));
    }
    if (!space.contains(prediction) || !space.contains(truth)) {
      throw std::invalid_argument("label outside the label space");
    }
    return std::get<Label>(prediction) == std::get<Label>(truth) ? 0.0 : 1.0;
  }
  if (is_label(prediction) || is_label(truth)) {
    throw std::invalid_argument("lp score needs real values, got " + describe(prediction) +
                                " and " + describe(truth));
  }
  if (space.is_discrete()) throw std::invalid_argument("lp score needs an interval label space");
  if (!space.contains(prediction) || !space.contains(truth)) {
    throw std::invalid_argument("lp score argument outside [" + std::to_string(space.lower()) +
                                ", " + std::to_string(space.upper()) + "]: " +
                                describe(prediction) + ", " + describe(truth));
  }
  const double diff = std::abs(std::get<double>(prediction) - std::get<double>(truth));
  return std::min(std::pow(diff, spec.p()), spec.r_max());
}

GammaDensity::GammaDensity(Rep rep) : rep_(std::move(rep)) {
  if (const auto* list = std::get_if<std::vector<Atom>>(&rep_)) {
    non_decreasing_ = true;
    for (std::size_t i = 1; i < list->size(); ++i) {
      if ((*list)[i].mass < (*list)[i - 1].mass) non_decreasing_ = false;
    }
  } else if (const auto* form = std::get_if<LpPowerForm>(&rep_)) {
    // Scan the density on a grid over (0, r_max].
    constexpr int kScan = 256;
    const double r_max = std::pow(form->width, form->p);
    non_decreasing_ = true;
    double prev = at(r_max / kScan);
    for (int i = 2; i <= kScan; ++i) {
      const double cur = at(r_max * i / kScan);
      if (cur < prev * (1.0 - 1e-12)) {
        non_decreasing_ = false;
        break;
      }
      prev = cur;
    }
  } else {
    const auto& h = std::get<Histogram>(rep_);
    non_decreasing_ = std::is_sorted(h.density.begin(), h.density.end());
  }
}

GammaDensity GammaDensity::atoms(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("atomic gamma needs at least one atom");
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.r < b.r; });
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!(atoms[i].mass > 0.0)) throw std::invalid_argument("atom masses must be positive");
    if (!(atoms[i].r >= 0.0)) throw std::invalid_argument("atom locations must be nonnegative");
    if (i > 0 && atoms[i].r == atoms[i - 1].r) throw std::invalid_argument("duplicate atom location");
    total += atoms[i].mass;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("atom masses must sum to 1");
  return GammaDensity(std::move(atoms));
}

GammaDensity GammaDensity::lp_power(double p, double width) {
  if (!(p >= 1.0) || !(width > 0.0)) throw std::invalid_argument("lp_power gamma needs p >= 1, width > 0");
  return GammaDensity(LpPowerForm{p, width});
}

GammaDensity GammaDensity::tabulated(std::vector<double> edges, std::vector<double> density) {
  if (edges.size() < 2 || density.size() + 1 != edges.size()) {
    throw std::invalid_argument("tabulated gamma needs bins + 1 edges");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("tabulated gamma edges must increase");
  }
  if (edges.front() < 0.0) throw std::invalid_argument("tabulated gamma must start at r >= 0");
  for (double d : density) {
    if (!(d >= 0.0)) throw std::invalid_argument("tabulated densities must be nonnegative");
  }
  return GammaDensity(Histogram{std::move(edges), std::move(density)});
}

const std::vector<GammaDensity::Atom>& GammaDensity::atom_list() const {
  return std::get<std::vector<Atom>>(rep_);
}
const GammaDensity::LpPowerForm& GammaDensity::closed_form() const {
  return std::get<LpPowerForm>(rep_);
}
const GammaDensity::Histogram& GammaDensity::histogram() const { return std::get<Histogram>(rep_); }

double GammaDensity::at(double r) const {
  if (const auto* list = std::get_if<std::vector<Atom>>(&rep_)) {
    for (const auto& a : *list) {
      if (a.r == r) return a.mass;
    }
    return 0.0;
  }
  if (const auto* form = std::get_if<LpPowerForm>(&rep_)) {
    const double r_max = std::pow(form->width, form->p);
    if (r < 0.0 || r > r_max) return 0.0;
    if (r == 0.0) return form->p == 1.0 ? 2.0 / form->width : std::numeric_limits<double>::infinity();
    return 2.0 * std::pow(r, 1.0 / form->p - 1.0) / (form->p * form->width);
  }
  const auto& h = std::get<Histogram>(rep_);
  if (r < h.edges.front() || r > h.edges.back()) return 0.0;
  auto it = std::upper_bound(h.edges.begin(), h.edges.end(), r);
  std::size_t bin = static_cast<std::size_t>(std::distance(h.edges.begin(), it));
  bin = bin == 0 ? 0 : std::min(bin - 1, h.density.size() - 1);
  return h.density[bin];
}

double GammaDensity::cumulative(double r) const {
  if (const auto* list = std::get_if<std::vector<Atom>>(&rep_)) {
    double total = 0.0;
    for (const auto& a : *list) {
      if (a.r < r) total += a.mass;
    }
    return total;
  }
  if (const auto* form = std::get_if<LpPowerForm>(&rep_)) {
    const double r_max = std::pow(form->width, form->p);
    const double clipped = std::clamp(r, 0.0, r_max);
    return 2.0 * std::pow(clipped, 1.0 / form->p) / form->width;
  }
  const auto& h = std::get<Histogram>(rep_);
  double total = 0.0;
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    const double lo = h.edges[i];
    const double hi = std::min(h.edges[i + 1], r);
    if (hi <= lo) break;
    total += h.density[i] * (hi - lo);
  }
  return total;
}

double GammaDensity::support_max() const {
  if (const auto* list = std::get_if<std::vector<Atom>>(&rep_)) return list->back().r;
  if (const auto* form = std::get_if<LpPowerForm>(&rep_)) return std::pow(form->width, form->p);
  return std::get<Histogram>(rep_).edges.back();
}

GammaDensity gamma_closed_form(const ScoreSpec& spec, const LabelSpace& space) {
  if (spec.kind() == ScoreKind::ZeroOne && space.is_discrete()) {
    const double k = static_cast<double>(space.num_labels());
    return GammaDensity::atoms({{0.0, 1.0 / k}, {1.0, 1.0 - 1.0 / k}});
  }
  if (spec.kind() == ScoreKind::LpPower && !space.is_discrete()) {
    return GammaDensity::lp_power(spec.p(), space.size());
  }
  throw std::invalid_argument("gamma_closed_form: unsupported (score, label space) pairing");
}

GammaDensity gamma_empirical(const ScoreSpec& spec, const LabelSpace& space,
                             const ModelSampler& model_sampler, const FeatureMatrix& inputs,
                             const EmpiricalGammaOptions& options) {
  if (inputs.rows() == 0) throw std::invalid_argument("gamma_empirical: empty input sample");
  if (options.n_samples == 0) throw std::invalid_argument("gamma_empirical: zero samples");
  if (spec.kind() == ScoreKind::LpPower && options.bins == 0) {
    throw std::invalid_argument("gamma_empirical: zero bins");
  }
  if ((spec.kind() == ScoreKind::ZeroOne) != space.is_discrete()) {
    throw std::invalid_argument("gamma_empirical: unsupported (score, label space) pairing");
  }

  Rng rng = make_rng(options.seed);
  std::uniform_int_distribution<Eigen::Index> pick_row(0, inputs.rows() - 1);
  const double n = static_cast<double>(options.n_samples);

  if (spec.kind() == ScoreKind::ZeroOne) {
    std::uniform_int_distribution<Label> pick_label(0, space.num_labels() - 1);
    std::size_t zeros = 0;
    for (std::size_t s = 0; s < options.n_samples; ++s) {
      const auto row = inputs.row(pick_row(rng));
      const PointPredictor& model = model_sampler(rng);
      const Outcome pred = model.predict(std::span<const double>(row.data(), row.size()));
      const Label candidate = pick_label(rng);
      if (nc_score(spec, space, pred, candidate) == 0.0) ++zeros;
    }
    std::vector<GammaDensity::Atom> atoms;
    const std::size_t ones = options.n_samples - zeros;
    if (zeros > 0) atoms.push_back({0.0, static_cast<double>(zeros) / n});
    if (ones > 0) atoms.push_back({1.0, static_cast<double>(ones) / n});
    return GammaDensity::atoms(std::move(atoms));
  }

  std::uniform_real_distribution<double> pick_y(space.lower(), space.upper());
  const double r_max = spec.r_max();
  const std::size_t bins = options.bins;
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t s = 0; s < options.n_samples; ++s) {
    const auto row = inputs.row(pick_row(rng));
    const PointPredictor& model = model_sampler(rng);
    const Outcome pred = model.predict(std::span<const double>(row.data(), row.size()));
    const double y = std::clamp(pick_y(rng), space.lower(), space.upper());
    const double r = nc_score(spec, space, pred, y);
    auto bin = static_cast<std::size_t>(r / r_max * static_cast<double>(bins));
    counts[std::min(bin, bins - 1)]++;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) edges[i] = r_max * static_cast<double>(i) / static_cast<double>(bins);
  edges.back() = r_max;
  std::vector<double> density(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    density[i] = static_cast<double>(counts[i]) / (n * (edges[i + 1] - edges[i]));
  }
  return GammaDensity::tabulated(std::move(edges), std::move(density));
}

}  // namespace cpsize
