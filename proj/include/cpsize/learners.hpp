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
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpsize/common.hpp"
#include "cpsize/dataio.hpp"

#include "json.hpp"

namespace cpsize {

enum class LearnerKind { Logistic, Mlp };
enum class TaskKind { Classification, Regression };

const char* to_string(LearnerKind kind);
const char* to_string(TaskKind kind);
LearnerKind learner_kind_from_string(const std::string& name);
TaskKind task_kind_from_string(const std::string& name);

struct TrainConfig {
  LearnerKind kind = LearnerKind::Logistic;
  /// Hidden layer widths (ignored for Logistic).
  std::vector<int> hidden = {50, 50};
  double learning_rate = 0.05;
  int epochs = 100;
  int batch_size = 32;
  /// 0 for plain SGD; > 0 adds Langevin noise sqrt(2 lr T) xi per step.
  double temperature = 0.0;
  int ensemble_size = 16;
  /// Epochs between Langevin snapshots after burn-in.
  int snapshot_stride = 5;
  double l2 = 0.0;
  std::uint64_t seed = 0;
  /// Keep the full-data loss after every epoch of the first member.
  bool record_loss = false;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Fully connected net: tanh hidden layers, linear output. Classifiers output
/// K logits; regressors output one value u and predict lower + width * u,
/// clipped to the label interval.
class DenseModel : public PointPredictor {
 public:
  DenseModel(TaskKind task, std::vector<int> layer_sizes, LabelSpace space);

  TaskKind task() const { return task_; }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  const LabelSpace& space() const { return space_; }

  /// Layer l contributes W_l (out x in, row-major) followed by b_l.
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  /// Logits, or the unclipped regression output in target units.
  Eigen::VectorXd raw_output(std::span<const double> x) const;
  Outcome predict(std::span<const double> x) const override;
  std::size_t input_dim() const override { return static_cast<std::size_t>(sizes_.front()); }

 private:
  TaskKind task_;
  std::vector<int> sizes_;
  LabelSpace space_;
  Eigen::VectorXd params_;
};

struct LossGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

/// Mean cross-entropy (classification) or mean 0.5 (u - y_unit)^2 (regression,
/// targets rescaled to [0, 1]) over the given rows, plus 0.5 l2 |theta|^2.
LossGradient loss_and_gradient(const DenseModel& model, const Dataset& data,
                               std::span<const std::size_t> rows, double l2 = 0.0);

/// The same loss over every row, without the gradient.
double dataset_loss(const DenseModel& model, const Dataset& data, double l2 = 0.0);

struct EnsembleMetadata {
  TaskKind task = TaskKind::Classification;
  TrainConfig config;
  /// Training data had a single distinct label.
  bool single_class = false;
  std::size_t n_train = 0;
  std::vector<double> loss_history;
};

/// A finite uniform ensemble standing in for Q(theta | D_tr).
class ModelEnsemble {
 public:
  ModelEnsemble(std::vector<DenseModel> members, EnsembleMetadata metadata);

  std::size_t size() const { return members_.size(); }
  const DenseModel& member(std::size_t i) const { return members_.at(i); }
  const std::vector<DenseModel>& members() const { return members_; }
  const EnsembleMetadata& metadata() const { return meta_; }

  /// Uniform draw over members.
  const DenseModel& draw(Rng& rng) const;
  std::vector<const PointPredictor*> pointers() const;
  /// Sampler bound to this ensemble; the ensemble must outlive it.
  ModelSampler sampler() const;

  nlohmann::json to_json() const;
  static ModelEnsemble from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ModelEnsemble load(const std::filesystem::path& path);

 private:
  std::vector<DenseModel> members_;
  EnsembleMetadata meta_;
};

inline const DenseModel& draw_model(const ModelEnsemble& ensemble, Rng& rng) {
  return ensemble.draw(rng);
}

/// He-scaled normal weights, zero biases.
void initialize_params(DenseModel& model, Rng& rng);

ModelEnsemble train_classifier(const Dataset& data, const TrainConfig& cfg, std::size_t workers = 1);
ModelEnsemble train_regressor(const Dataset& data, const TrainConfig& cfg, std::size_t workers = 1);

/// Ensemble-averaged fraction of rows classified correctly.
double training_accuracy(const ModelEnsemble& ensemble, const Dataset& data);

}  // namespace cpsize
