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

#include "cpsize/learners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cpsize/numeric.hpp"

namespace cpsize {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;

constexpr int kFormatVersion = 1;

struct LayerOffsets {
  std::size_t weights;
  std::size_t bias;
  int in;
  int out;
};

std::vector<LayerOffsets> layer_offsets(const std::vector<int>& sizes) {
  std::vector<LayerOffsets> out;
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto o = static_cast<std::size_t>(sizes[l + 1]);
    out.push_back({at, at + in * o, sizes[l], sizes[l + 1]});
    at += in * o + o;
  }
  return out;
}

nlohmann::json space_to_json(const LabelSpace& s) {
  if (s.is_discrete()) return {{"kind", "discrete"}, {"num_labels", s.num_labels()}};
  return {{"kind", "interval"}, {"lower", s.lower()}, {"upper", s.upper()}};
}

LabelSpace space_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "discrete") return LabelSpace::discrete(j.at("num_labels").get<int>());
  if (kind == "interval") {
    return LabelSpace::interval(j.at("lower").get<double>(), j.at("upper").get<double>());
  }
  throw std::invalid_argument("unknown label space kind '" + kind + "'");
}

double unit_target(const LabelSpace& space, double y) {
  return (y - space.lower()) / (space.upper() - space.lower());
}

}  // namespace

const char* to_string(LearnerKind kind) { return kind == LearnerKind::Logistic ? "logistic" : "mlp"; }

const char* to_string(TaskKind kind) {
  return kind == TaskKind::Classification ? "classification" : "regression";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "logistic") return LearnerKind::Logistic;
  if (name == "mlp") return LearnerKind::Mlp;
  throw std::invalid_argument("unknown learner kind '" + name + "'");
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "classification") return TaskKind::Classification;
  if (name == "regression") return TaskKind::Regression;
  throw std::invalid_argument("unknown task '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("train: temperature must be >= 0");
  if (ensemble_size < 1) throw std::invalid_argument("train: ensemble_size must be >= 1");
  if (snapshot_stride < 1) throw std::invalid_argument("train: snapshot_stride must be >= 1");
  if (!(l2 >= 0.0)) throw std::invalid_argument("train: l2 must be >= 0");
  if (kind == LearnerKind::Mlp) {
    for (int h : hidden) {
      if (h < 1) throw std::invalid_argument("train: hidden widths must be >= 1");
    }
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"kind", to_string(cfg.kind)},
          {"hidden", cfg.hidden},
          {"learning_rate", cfg.learning_rate},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"temperature", cfg.temperature},
          {"ensemble_size", cfg.ensemble_size},
          {"snapshot_stride", cfg.snapshot_stride},
          {"l2", cfg.l2},
          {"seed", cfg.seed},
          {"record_loss", cfg.record_loss}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("train config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") {
      cfg.kind = learner_kind_from_string(value.get<std::string>());
    } else if (key == "hidden") {
      cfg.hidden = value.get<std::vector<int>>();
    } else if (key == "learning_rate") {
      cfg.learning_rate = value.get<double>();
    } else if (key == "epochs") {
      cfg.epochs = value.get<int>();
    } else if (key == "batch_size") {
      cfg.batch_size = value.get<int>();
    } else if (key == "temperature") {
      cfg.temperature = value.get<double>();
    } else if (key == "ensemble_size") {
      cfg.ensemble_size = value.get<int>();
    } else if (key == "snapshot_stride") {
      cfg.snapshot_stride = value.get<int>();
    } else if (key == "l2") {
      cfg.l2 = value.get<double>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "record_loss") {
      cfg.record_loss = value.get<bool>();
    } else {
      throw std::invalid_argument("train config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

DenseModel::DenseModel(TaskKind task, std::vector<int> layer_sizes, LabelSpace space)
    : task_(task), sizes_(std::move(layer_sizes)), space_(space) {
  if (sizes_.size() < 2) throw std::invalid_argument("DenseModel needs input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("DenseModel layer sizes must be positive");
  }
  if (task_ == TaskKind::Classification) {
    if (!space_.is_discrete() || sizes_.back() != space_.num_labels()) {
      throw std::invalid_argument("classifier output width must equal the number of labels");
    }
  } else if (space_.is_discrete() || sizes_.back() != 1) {
    throw std::invalid_argument("regressor needs an interval label space and one output");
  }
  const auto offs = layer_offsets(sizes_);
  params_ = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(offs.back().bias + static_cast<std::size_t>(offs.back().out)));
}

Eigen::VectorXd DenseModel::raw_output(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("feature dimension " + std::to_string(x.size()) +
                                " does not match model input " + std::to_string(input_dim()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const auto offs = layer_offsets(sizes_);
  for (std::size_t l = 0; l < offs.size(); ++l) {
    const auto& o = offs[l];
    ConstWeights w(params_.data() + o.weights, o.out, o.in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + o.bias, o.out);
    Eigen::VectorXd z = w * a + b;
    a = (l + 1 < offs.size()) ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  if (task_ == TaskKind::Regression) {
    a(0) = space_.lower() + (space_.upper() - space_.lower()) * a(0);
  }
  return a;
}

Outcome DenseModel::predict(std::span<const double> x) const {
  const Eigen::VectorXd out = raw_output(x);
  if (task_ == TaskKind::Classification) {
    Label best = 0;
    for (Eigen::Index k = 1; k < out.size(); ++k) {
      if (out(k) > out(best)) best = static_cast<Label>(k);
    }
    return best;
  }
  if (!std::isfinite(out(0))) throw std::runtime_error("regressor produced a non-finite output");
  return std::clamp(out(0), space_.lower(), space_.upper());
}

LossGradient loss_and_gradient(const DenseModel& model, const Dataset& data,
                               std::span<const std::size_t> rows, double l2) {
  if (rows.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  if (data.dim() != model.input_dim()) throw std::invalid_argument("loss_and_gradient: dimension mismatch");
  const auto offs = layer_offsets(model.layer_sizes());
  const Eigen::VectorXd& theta = model.params();
  const auto batch = static_cast<Eigen::Index>(rows.size());

  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(offs.size() + 1);
  acts.emplace_back(batch, static_cast<Eigen::Index>(data.dim()));
  for (Eigen::Index i = 0; i < batch; ++i) {
    acts[0].row(i) = data.features.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
  }
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < offs.size(); ++l) {
    const auto& o = offs[l];
    ConstWeights w(theta.data() + o.weights, o.out, o.in);
    Eigen::Map<const Eigen::RowVectorXd> b(theta.data() + o.bias, o.out);
    z = acts[l] * w.transpose();
    z.rowwise() += b;
    if (l + 1 < offs.size()) acts.emplace_back(z.array().tanh());
  }

  LossGradient out;
  Eigen::MatrixXd dz(z.rows(), z.cols());
  const double inv_b = 1.0 / static_cast<double>(batch);
  CompensatedSum loss;
  if (model.task() == TaskKind::Classification) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      const auto y = static_cast<Eigen::Index>(data.targets[rows[static_cast<std::size_t>(i)]]);
      const double top = z.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (z.row(i).array() - top).exp();
      const double total = e.sum();
      loss.add(std::log(total) + top - z(i, y));
      dz.row(i) = e / total;
      dz(i, y) -= 1.0;
    }
  } else {
    for (Eigen::Index i = 0; i < batch; ++i) {
      const double t = unit_target(model.space(), data.targets[rows[static_cast<std::size_t>(i)]]);
      const double r = z(i, 0) - t;
      loss.add(0.5 * r * r);
      dz(i, 0) = r;
    }
  }
  dz *= inv_b;
  out.loss = loss.value() * inv_b;

  out.gradient = Eigen::VectorXd::Zero(theta.size());
  for (std::size_t l = offs.size(); l-- > 0;) {
    const auto& o = offs[l];
    Eigen::Map<RowMatrix> gw(out.gradient.data() + o.weights, o.out, o.in);
    Eigen::Map<Eigen::RowVectorXd> gb(out.gradient.data() + o.bias, o.out);
    gw = dz.transpose() * acts[l];
    gb = dz.colwise().sum();
    if (l > 0) {
      ConstWeights w(theta.data() + o.weights, o.out, o.in);
      Eigen::MatrixXd da = dz * w;
      dz = da.array() * (1.0 - acts[l].array().square());
    }
  }
  if (l2 > 0.0) {
    out.loss += 0.5 * l2 * theta.squaredNorm();
    out.gradient += l2 * theta;
  }
  return out;
}

double dataset_loss(const DenseModel& model, const Dataset& data, double l2) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_and_gradient(model, data, rows, l2).loss;
}

ModelEnsemble::ModelEnsemble(std::vector<DenseModel> members, EnsembleMetadata metadata)
    : members_(std::move(members)), meta_(std::move(metadata)) {
  if (members_.empty()) throw std::invalid_argument("ModelEnsemble needs at least one member");
  for (const auto& m : members_) {
    if (m.layer_sizes() != members_.front().layer_sizes() || m.task() != members_.front().task() ||
        !(m.space() == members_.front().space())) {
      throw std::invalid_argument("ensemble members must share one architecture");
    }
  }
}

const DenseModel& ModelEnsemble::draw(Rng& rng) const {
  std::uniform_int_distribution<std::size_t> pick(0, members_.size() - 1);
  return members_[pick(rng)];
}

std::vector<const PointPredictor*> ModelEnsemble::pointers() const {
  std::vector<const PointPredictor*> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(&m);
  return out;
}

ModelSampler ModelEnsemble::sampler() const {
  return [this](Rng& rng) -> const PointPredictor& { return draw(rng); };
}

nlohmann::json ModelEnsemble::to_json() const {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : members_) {
    members.push_back(std::vector<double>(m.params().data(), m.params().data() + m.params().size()));
  }
  const DenseModel& first = members_.front();
  return {{"format", "cpsize-ensemble"},
          {"version", kFormatVersion},
          {"learner", to_string(meta_.config.kind)},
          {"task", to_string(meta_.task)},
          {"layer_sizes", first.layer_sizes()},
          {"space", space_to_json(first.space())},
          {"seed", meta_.config.seed},
          {"config", cpsize::to_json(meta_.config)},
          {"single_class", meta_.single_class},
          {"n_train", meta_.n_train},
          {"loss_history", meta_.loss_history},
          {"members", members}};
}

ModelEnsemble ModelEnsemble::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "cpsize-ensemble") throw std::invalid_argument("not an ensemble file");
  if (j.at("version").get<int>() != kFormatVersion) {
    throw std::invalid_argument("unsupported ensemble file version");
  }
  EnsembleMetadata meta;
  meta.task = task_kind_from_string(j.at("task").get<std::string>());
  meta.config = train_config_from_json(j.at("config"));
  meta.single_class = j.at("single_class").get<bool>();
  meta.n_train = j.at("n_train").get<std::size_t>();
  meta.loss_history = j.at("loss_history").get<std::vector<double>>();
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  const LabelSpace space = space_from_json(j.at("space"));
  std::vector<DenseModel> members;
  for (const auto& p : j.at("members")) {
    DenseModel m(meta.task, sizes, space);
    const auto values = p.get<std::vector<double>>();
    if (values.size() != m.num_params()) throw std::invalid_argument("ensemble member has wrong shape");
    m.params() = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    members.push_back(std::move(m));
  }
  return ModelEnsemble(std::move(members), std::move(meta));
}

void ModelEnsemble::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ensemble file '" + path.string() + "'");
  out << to_json().dump() << '\n';
}

ModelEnsemble ModelEnsemble::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ensemble file '" + path.string() + "'");
  return from_json(nlohmann::json::parse(in));
}

void initialize_params(DenseModel& model, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  model.params().setZero();
  for (const auto& o : layer_offsets(model.layer_sizes())) {
    const double scale = std::sqrt(2.0 / o.in);
    for (std::size_t k = 0; k < static_cast<std::size_t>(o.in * o.out); ++k) {
      model.params()(static_cast<Eigen::Index>(o.weights + k)) = scale * normal(rng);
    }
  }
}

namespace {

void run_epochs(DenseModel& model, const Dataset& data, const TrainConfig& cfg, int epochs, Rng& rng,
                std::vector<double>* history) {
  const std::size_t n = data.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise = std::sqrt(2.0 * cfg.learning_rate * cfg.temperature);
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      const LossGradient lg =
          loss_and_gradient(model, data, std::span(order).subspan(start, len), cfg.l2);
      model.params() -= cfg.learning_rate * lg.gradient;
      if (noise > 0.0) {
        for (Eigen::Index k = 0; k < model.params().size(); ++k) {
          model.params()(k) += noise * normal(rng);
        }
      }
    }
    if (history) history->push_back(dataset_loss(model, data, cfg.l2));
  }
}

std::vector<int> architecture(const TrainConfig& cfg, std::size_t dim, int outputs) {
  std::vector<int> sizes{static_cast<int>(dim)};
  if (cfg.kind == LearnerKind::Mlp) sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(outputs);
  return sizes;
}

ModelEnsemble train_ensemble(const Dataset& data, const TrainConfig& cfg, TaskKind task,
                             std::size_t workers) {
  const int outputs = task == TaskKind::Classification ? data.space.num_labels() : 1;
  const std::vector<int> sizes = architecture(cfg, data.dim(), outputs);
  EnsembleMetadata meta;
  meta.task = task;
  meta.config = cfg;
  meta.n_train = data.size();
  if (task == TaskKind::Classification) {
    meta.single_class = std::set<double>(data.targets.begin(), data.targets.end()).size() == 1;
  }

  std::vector<DenseModel> members;
  const auto count = static_cast<std::size_t>(cfg.ensemble_size);
  if (cfg.temperature == 0.0) {
    members.assign(count, DenseModel(task, sizes, data.space));
    std::vector<std::vector<double>> histories(count);
    parallel_for(count, workers, [&](std::size_t i) {
      Rng rng = make_rng(derive_seed(cfg.seed, {stream_tag("member"), i}));
      initialize_params(members[i], rng);
      run_epochs(members[i], data, cfg, cfg.epochs, rng,
                 cfg.record_loss && i == 0 ? &histories[0] : nullptr);
    });
    meta.loss_history = std::move(histories[0]);
  } else {
    DenseModel chain(task, sizes, data.space);
    Rng rng = make_rng(derive_seed(cfg.seed, {stream_tag("chain")}));
    initialize_params(chain, rng);
    std::vector<double>* history = cfg.record_loss ? &meta.loss_history : nullptr;
    run_epochs(chain, data, cfg, cfg.epochs, rng, history);
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0) run_epochs(chain, data, cfg, cfg.snapshot_stride, rng, history);
      members.push_back(chain);
    }
  }
  return ModelEnsemble(std::move(members), std::move(meta));
}

}  // namespace

ModelEnsemble train_classifier(const Dataset& data, const TrainConfig& cfg, std::size_t workers) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train_classifier: empty dataset");
  if (!data.space.is_discrete()) throw std::invalid_argument("train_classifier: labels must be discrete");
  data.validate();
  return train_ensemble(data, cfg, TaskKind::Classification, workers);
}

ModelEnsemble train_regressor(const Dataset& data, const TrainConfig& cfg, std::size_t workers) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train_regressor: empty dataset");
  if (data.space.is_discrete()) throw std::invalid_argument("train_regressor: targets must be real");
  data.validate();
  return train_ensemble(data, cfg, TaskKind::Regression, workers);
}

double training_accuracy(const ModelEnsemble& ensemble, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("training_accuracy: empty dataset");
  CompensatedSum correct;
  for (const auto& m : ensemble.members()) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (std::get<Label>(m.predict(data.row(i))) == static_cast<Label>(data.targets[i])) ++hits;
    }
    correct.add(static_cast<double>(hits) / static_cast<double>(data.size()));
  }
  return correct.value() / static_cast<double>(ensemble.size());
}

}  // namespace cpsize
