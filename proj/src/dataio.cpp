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

#include "cpsize/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cpsize/numeric.hpp"

namespace cpsize {

Outcome Dataset::target(std::size_t i) const {
  if (space.is_discrete()) return static_cast<Label>(targets[i]);
  return targets[i];
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.targets.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= size()) throw std::out_of_range("Dataset::subset: index out of range");
    out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(i));
    out.targets.push_back(targets[i]);
  }
  out.space = space;
  out.provenance = provenance;
  out.clip_rate = clip_rate;
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  if (n > size()) throw std::out_of_range("Dataset::head: n exceeds dataset size");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

void Dataset::validate() const {
  if (size() == 0) throw std::invalid_argument("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != size()) {
    throw std::invalid_argument("dataset feature rows do not match target count");
  }
  if (!features.allFinite()) throw std::invalid_argument("dataset features must be finite");
  for (std::size_t i = 0; i < size(); ++i) {
    const double t = targets[i];
    if (space.is_discrete()) {
      if (t != std::floor(t) || t < 0.0 || t >= space.num_labels()) {
        throw std::invalid_argument("row " + std::to_string(i) + ": label " + format_double(t) +
                                    " outside {0, ..., " + std::to_string(space.num_labels() - 1) +
                                    "}");
      }
    } else if (!(t >= space.lower() && t <= space.upper())) {
      throw std::invalid_argument("row " + std::to_string(i) + ": target " + format_double(t) +
                                  " outside [" + format_double(space.lower()) + ", " +
                                  format_double(space.upper()) + "]");
    }
  }
}

namespace {

void check_spec(const ClassificationSpec& s) {
  if (s.num_classes < 2) throw std::invalid_argument("classification generator: K must be >= 2");
  if (s.dim < 1) throw std::invalid_argument("classification generator: dim must be >= 1");
  if (!(s.separation >= 0.0)) throw std::invalid_argument("classification generator: separation must be >= 0");
}

void check_spec(const RegressionSpec& s) {
  if (s.dim < 1) throw std::invalid_argument("regression generator: dim must be >= 1");
  if (!(s.noise >= 0.0)) throw std::invalid_argument("regression generator: noise must be >= 0");
  if (!(s.lower < s.upper)) throw std::invalid_argument("regression generator: lower must be < upper");
}

/// Class means on a trigonometric moment curve with norm `separation`.
Eigen::MatrixXd class_means(const ClassificationSpec& s) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(s.num_classes, s.dim);
  const int pairs = std::max(1, s.dim / 2);
  const double scale = s.separation / std::sqrt(static_cast<double>(pairs));
  for (int k = 0; k < s.num_classes; ++k) {
    for (int j = 0; j < pairs; ++j) {
      const double angle = 2.0 * std::numbers::pi * (j + 1) * k / s.num_classes;
      mu(k, 2 * j) = scale * std::cos(angle);
      if (2 * j + 1 < s.dim) mu(k, 2 * j + 1) = scale * std::sin(angle);
    }
  }
  if (s.dim == 1) {
    for (int k = 0; k < s.num_classes; ++k) mu(k, 0) = s.separation * k;
  }
  return mu;
}

struct RegressionWeights {
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
};

RegressionWeights regression_weights(int dim) {
  RegressionWeights w{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  for (int i = 0; i < dim; ++i) {
    w.w1(i) = (i % 2 == 0 ? 1.5 : -1.5);
    w.w2(i) = std::cos(1.0 + i);
  }
  w.w1 /= std::sqrt(static_cast<double>(dim));
  w.w2 /= std::max(w.w2.norm(), 1e-12);
  return w;
}

/// One draw; returns whether the target was clipped.
bool draw_point(const ClassificationSpec& s, const Eigen::MatrixXd& mu, Rng& rng, double* x,
                double* y) {
  std::uniform_int_distribution<int> label(0, s.num_classes - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = label(rng);
  for (int j = 0; j < s.dim; ++j) x[j] = mu(k, j) + normal(rng);
  *y = k;
  return false;
}

bool draw_point(const RegressionSpec& s, const RegressionWeights& w, Rng& rng, double* x,
                double* y) {
  std::normal_distribution<double> normal(0.0, 1.0);
  double a = 0.0;
  double b = 0.0;
  for (int j = 0; j < s.dim; ++j) {
    x[j] = normal(rng);
    a += w.w1(j) * x[j];
    b += w.w2(j) * x[j];
  }
  const double g = 0.5 + 0.25 * std::sin(a) + 0.15 * std::tanh(b);
  const double raw = g + s.noise * normal(rng);
  const double unit = std::clamp(raw, 0.0, 1.0);
  *y = s.lower + (s.upper - s.lower) * unit;
  *y = std::clamp(*y, s.lower, s.upper);
  return unit != raw;
}

std::string describe_spec(const ClassificationSpec& s) {
  return "synthetic:classification(K=" + std::to_string(s.num_classes) +
         ",d=" + std::to_string(s.dim) + ",separation=" + format_double(s.separation) + ")";
}

std::string describe_spec(const RegressionSpec& s) {
  return "synthetic:regression(d=" + std::to_string(s.dim) + ",noise=" + format_double(s.noise) +
         ",interval=[" + format_double(s.lower) + "," + format_double(s.upper) + "])";
}

}  // namespace

LabelSpace label_space_of(const SyntheticSpec& spec) {
  if (const auto* c = std::get_if<ClassificationSpec>(&spec)) {
    return LabelSpace::discrete(c->num_classes);
  }
  const auto& r = std::get<RegressionSpec>(spec);
  return LabelSpace::interval(r.lower, r.upper);
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("generate_synthetic: n must be positive");
  Dataset out;
  out.space = label_space_of(spec);
  Rng rng = make_rng(seed);
  std::visit(
      [&](const auto& s) {
        check_spec(s);
        const auto params = [&] {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ClassificationSpec>) {
            return class_means(s);
          } else {
            return regression_weights(s.dim);
          }
        }();
        out.features.resize(static_cast<Eigen::Index>(n), s.dim);
        out.targets.resize(n);
        std::size_t clipped = 0;
        for (std::size_t i = 0; i < n; ++i) {
          double* x = out.features.data() + i * static_cast<std::size_t>(s.dim);
          if (draw_point(s, params, rng, x, &out.targets[i])) ++clipped;
        }
        out.clip_rate = static_cast<double>(clipped) / static_cast<double>(n);
        out.provenance = describe_spec(s) + " seed=" + std::to_string(seed);
      },
      spec);
  return out;
}

DataSampler synthetic_sampler(const SyntheticSpec& spec) {
  return std::visit(
      [](const auto& s) -> DataSampler {
        check_spec(s);
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ClassificationSpec>) {
          return [s, mu = class_means(s)](Rng& rng) {
            LabeledPoint p{std::vector<double>(static_cast<std::size_t>(s.dim)), Label{0}};
            double y = 0.0;
            draw_point(s, mu, rng, p.x.data(), &y);
            p.y = static_cast<Label>(y);
            return p;
          };
        } else {
          return [s, w = regression_weights(s.dim)](Rng& rng) {
            LabeledPoint p{std::vector<double>(static_cast<std::size_t>(s.dim)), 0.0};
            double y = 0.0;
            draw_point(s, w, rng, p.x.data(), &y);
            p.y = y;
            return p;
          };
        }
      },
      spec);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::invalid_argument(path.string() + ": header has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t target_col = column_of(schema.target_column);
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != target_col) feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) feature_cols.push_back(column_of(name));
  }
  if (feature_cols.empty()) throw std::invalid_argument(path.string() + ": no feature columns");

  std::vector<double> flat;
  std::vector<double> targets;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = path.string() + ": row " + std::to_string(row);
    if (fields.size() != header.size()) {
      throw std::invalid_argument(where + ": expected " + std::to_string(header.size()) +
                                  " fields, found " + std::to_string(fields.size()));
    }
    try {
      for (std::size_t c : feature_cols) {
        const double v = parse_double(fields[c]);
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite value");
        flat.push_back(v);
      }
      const double t = parse_double(fields[target_col]);
      if (schema.space.is_discrete()) {
        if (t != std::floor(t) || t < 0.0 || t >= schema.space.num_labels()) {
          throw std::invalid_argument("label " + fields[target_col] + " outside the label space");
        }
      } else if (!(t >= schema.space.lower() && t <= schema.space.upper())) {
        throw std::invalid_argument("target " + fields[target_col] + " outside [" +
                                    format_double(schema.space.lower()) + ", " +
                                    format_double(schema.space.upper()) + "]");
      }
      targets.push_back(t);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + ": " + e.what());
    }
  }
  if (targets.empty()) throw std::invalid_argument(path.string() + ": no data rows");

  Dataset out;
  const auto n = static_cast<Eigen::Index>(targets.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  out.features = Eigen::Map<const FeatureMatrix>(flat.data(), n, d);
  out.targets = std::move(targets);
  out.space = schema.space;
  out.provenance = "csv:" + path.string();
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file '" + path.string() + "'");
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << j << ',';
  out << "y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.row(i)) out << format_double(v) << ',';
    out << format_double(data.targets[i]) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing CSV file '" + path.string() + "'");
}

Split split_dataset(const Dataset& data, std::size_t n_tr, std::size_t n_cal, std::size_t n_test,
                    std::uint64_t seed) {
  const std::size_t n = data.size();
  if (n_tr > n || n_cal > n - n_tr || n_test > n - n_tr - n_cal) {
    throw std::invalid_argument("split_dataset: " + std::to_string(n_tr) + " + " +
                                std::to_string(n_cal) + " + " + std::to_string(n_test) +
                                " exceeds dataset size " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  Split s;
  s.train_index.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_tr));
  s.cal_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_tr),
                     perm.begin() + static_cast<std::ptrdiff_t>(n_tr + n_cal));
  s.test_index.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_tr + n_cal),
                      perm.begin() + static_cast<std::ptrdiff_t>(n_tr + n_cal + n_test));
  s.train = data.subset(s.train_index);
  s.cal = data.subset(s.cal_index);
  s.test = data.subset(s.test_index);
  return s;
}

}  // namespace cpsize
