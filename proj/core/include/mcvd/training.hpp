#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "mcvd/nn/model.hpp"

namespace mcvd {

/// Training regimen shared by both architectures. Batch size defaults follow
/// the model kind: 32 sequential, 8 graph.
struct TrainConfig {
  double learning_rate = 5e-5;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int batch_size = 32;
  int patience = 3;
  double min_delta = 0.0;  // delta for early stopping
  double threshold = 0.5;
  int max_epochs = 50;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static int default_batch_size(nn::ModelKind kind) {
    return kind == nn::ModelKind::Graph ? 8 : 32;
  }
};

/// Owned samples for one split.
struct SampleSet {
  std::vector<SeqTensor> seq;
  std::vector<GraphTensor> graph;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

/// Patience-based stop rule on validation loss: an epoch improves when its
/// loss beats the best by more than min_delta; training stops after
/// `patience` consecutive non-improving epochs.
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  /// Records one epoch; returns true when training should stop.
  bool observe(double val_loss);

  bool last_improved() const { return last_improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  double min_delta_;
  int epoch_ = 0;
  int bad_epochs_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool last_improved_ = false;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<double> loss_history;

  static MetricsReport from_counts(long tp, long fp, long fn, long tn);
  nlohmann::json to_json() const;
  std::string table(const std::string& title) const;
};

/// Mean binary cross-entropy; probabilities clamped away from {0,1}.
double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels);

/// Scales all trainable gradients so the global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_global_norm(nn::ParamStore& params, double max_norm);

/// Adam with decoupled-from-clipping L2 weight decay (decay is added to the
/// clipped gradient inside the step).
class Adam {
 public:
  Adam(nn::ParamStore& params, const TrainConfig& cfg);
  void step();

 private:
  nn::ParamStore& params_;
  TrainConfig cfg_;
  std::vector<nn::Mat> m_, v_;
  int t_ = 0;
};

nn::Batch make_batch(const SampleSet& set, const std::vector<int>& indices,
                     nn::ModelKind kind);

/// Full regimen: shuffled mini-batches, Adam + BCE + global-norm clipping,
/// per-epoch validation, early stopping with best-checkpoint restoration.
/// Throws NonFiniteLoss when training diverges.
TrainHistory train(nn::Model& model, const TrainConfig& cfg, const SampleSet& train_set,
                   const SampleSet& val_set, bool verbose = false);

/// Thresholded evaluation; vulnerable (label 1) is the positive class.
MetricsReport evaluate(nn::Model& model, const SampleSet& test_set, double threshold,
                       int batch_size = 32);

/// Mean inference-mode BCE of the model on one batch (finite-difference probe).
double loss_on(nn::Model& model, const nn::Batch& batch, const std::vector<double>& labels);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
};

/// Central-difference check of every trainable parameter against the
/// analytic gradients (dropout off, batch norm in inference mode after one
/// priming training-mode forward).
GradCheckResult grad_check(nn::Model& model, const nn::Batch& batch,
                           const std::vector<double>& labels, double fd_step = 1e-5);

}  // namespace mcvd
