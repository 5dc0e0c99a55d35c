#include "mcvd/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcvd/errors.hpp"

namespace mcvd {

using nn::Batch;
using nn::Mat;
using nn::Model;
using nn::ModelKind;
using nn::Param;
using nlohmann::json;

json TrainConfig::to_json() const {
  return json{{"learning_rate", learning_rate},
              {"weight_decay", weight_decay},
              {"beta1", beta1},
              {"beta2", beta2},
              {"adam_eps", adam_eps},
              {"clip_norm", clip_norm},
              {"batch_size", batch_size},
              {"patience", patience},
              {"min_delta", min_delta},
              {"threshold", threshold},
              {"max_epochs", max_epochs},
              {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.patience = j.value("patience", c.patience);
  c.min_delta = j.value("min_delta", c.min_delta);
  c.threshold = j.value("threshold", c.threshold);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seed = j.value("seed", c.seed);
  return c;
}

json TrainHistory::to_json() const {
  json epochs_json = json::array();
  for (const EpochStats& e : epochs)
    epochs_json.push_back(
        json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  return json{{"epochs", epochs_json},
              {"best_epoch", best_epoch},
              {"best_val_loss", best_val_loss},
              {"stopped_early", stopped_early}};
}

bool EarlyStopper::observe(double val_loss) {
  ++epoch_;
  if (val_loss < best_loss_ - min_delta_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    last_improved_ = true;
    return false;
  }
  last_improved_ = false;
  ++bad_epochs_;
  return bad_epochs_ >= patience_;
}

MetricsReport MetricsReport::from_counts(long tp, long fp, long fn, long tn) {
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.tn = tn;
  const double total = static_cast<double>(tp + fp + fn + tn);
  r.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

json MetricsReport::to_json() const {
  return json{{"accuracy", accuracy}, {"precision", precision}, {"recall", recall},
              {"f1", f1},             {"tp", tp},               {"fp", fp},
              {"fn", fn},             {"tn", tn},               {"loss_history", loss_history}};
}

std::string MetricsReport::table(const std::string& title) const {
  std::ostringstream out;
  char line[96];
  out << title << "\n";
  out << "  Metric      Value\n";
  out << "  ---------   ------\n";
  std::snprintf(line, sizeof(line), "  Accuracy    %.4f\n", accuracy);
  out << line;
  std::snprintf(line, sizeof(line), "  Precision   %.4f\n", precision);
  out << line;
  std::snprintf(line, sizeof(line), "  Recall      %.4f\n", recall);
  out << line;
  std::snprintf(line, sizeof(line), "  F1-Score    %.4f\n", f1);
  out << line;
  std::snprintf(line, sizeof(line), "  Confusion   TP=%ld FP=%ld FN=%ld TN=%ld\n", tp, fp,
                fn, tn);
  out << line;
  return out.str();
}

double bce_loss(const std::vector<double>& probs, const std::vector<double>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    total += -(labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p));
  }
  return probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
}

double clip_global_norm(nn::ParamStore& params, double max_norm) {
  double sq = 0.0;
  for (const Param& p : params.all())
    if (p.trainable) sq += p.grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Param& p : params.all())
      if (p.trainable) p.grad *= scale;
  }
  return norm;
}

Adam::Adam(nn::ParamStore& params, const TrainConfig& cfg) : params_(params), cfg_(cfg) {
  for (const Param& p : params_.all()) {
    if (!p.trainable) continue;
    m_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  std::size_t k = 0;
  for (Param& p : params_.all()) {
    if (!p.trainable) continue;
    const Mat g = p.grad + cfg_.weight_decay * p.value;
    m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
    v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const Mat mhat = m_[k] / bc1;
    const Mat vhat = v_[k] / bc2;
    p.value -= cfg_.learning_rate *
               mhat.cwiseQuotient(vhat.cwiseSqrt().array().matrix() +
                                  Mat::Constant(vhat.rows(), vhat.cols(), cfg_.adam_eps));
    ++k;
  }
}

Batch make_batch(const SampleSet& set, const std::vector<int>& indices, ModelKind kind) {
  Batch batch;
  for (int i : indices) {
    if (kind == ModelKind::Sequential)
      batch.seq.push_back(&set.seq[static_cast<std::size_t>(i)]);
    else
      batch.graph.push_back(&set.graph[static_cast<std::size_t>(i)]);
  }
  return batch;
}

namespace {

std::vector<double> batch_labels(const SampleSet& set, const std::vector<int>& indices) {
  std::vector<double> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(set.labels[static_cast<std::size_t>(i)]);
  return out;
}

double eval_loss(Model& model, const SampleSet& set, int batch_size) {
  double total = 0.0;
  std::vector<int> idx;
  for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch_size)); ++i)
      idx.push_back(static_cast<int>(i));
    const Batch batch = make_batch(set, idx, model.config().kind);
    const std::vector<double> probs = model.forward(batch, /*training=*/false, nullptr);
    total += bce_loss(probs, batch_labels(set, idx)) * static_cast<double>(idx.size());
  }
  return set.size() ? total / static_cast<double>(set.size()) : 0.0;
}

}  // namespace

TrainHistory train(Model& model, const TrainConfig& cfg, const SampleSet& train_set,
                   const SampleSet& val_set, bool verbose) {
  nn::Rng shuffle_rng(cfg.seed);
  nn::Rng dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  Adam adam(model.params(), cfg);
  EarlyStopper stopper(cfg.patience, cfg.min_delta);
  TrainHistory history;

  std::vector<nn::Mat> best = model.params().snapshot();
  std::vector<int> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<int> idx(
          order.begin() + static_cast<std::ptrdiff_t>(start),
          order.begin() + static_cast<std::ptrdiff_t>(
                              std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size))));
      const Batch batch = make_batch(train_set, idx, model.config().kind);
      const std::vector<double> labels = batch_labels(train_set, idx);
      const std::vector<double> probs = model.forward(batch, /*training=*/true, &dropout_rng);
      const double loss = bce_loss(probs, labels);
      if (!std::isfinite(loss))
        throw NonFiniteLoss("training loss is not finite at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(idx.size());

      std::vector<double> dlogits(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        dlogits[i] = (probs[i] - labels[i]) / static_cast<double>(idx.size());
      model.params().zero_grad();
      model.backward(dlogits);
      clip_global_norm(model.params(), cfg.clip_norm);
      adam.step();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_set.size()
                           ? epoch_loss / static_cast<double>(train_set.size())
                           : 0.0;
    stats.val_loss = eval_loss(model, val_set, cfg.batch_size);
    if (!std::isfinite(stats.val_loss))
      throw NonFiniteLoss("validation loss is not finite at epoch " + std::to_string(epoch));
    history.epochs.push_back(stats);
    if (verbose)
      std::fprintf(stderr, "epoch %d train_loss=%.6f val_loss=%.6f\n", epoch,
                   stats.train_loss, stats.val_loss);

    const bool stop = stopper.observe(stats.val_loss);
    if (stopper.last_improved()) best = model.params().snapshot();
    if (stop) {
      history.stopped_early = true;
      break;
    }
  }

  model.params().restore(best);
  history.best_epoch = stopper.best_epoch();
  history.best_val_loss = stopper.best_loss();
  return history;
}

MetricsReport evaluate(Model& model, const SampleSet& test_set, double threshold,
                       int batch_size) {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::vector<int> idx;
  for (std::size_t start = 0; start < test_set.size();
       start += static_cast<std::size_t>(batch_size)) {
    idx.clear();
    for (std::size_t i = start;
         i < std::min(test_set.size(), start + static_cast<std::size_t>(batch_size)); ++i)
      idx.push_back(static_cast<int>(i));
    const Batch batch = make_batch(test_set, idx, model.config().kind);
    const std::vector<double> probs = model.forward(batch, /*training=*/false, nullptr);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const bool pred = probs[i] >= threshold;
      const bool truth = test_set.labels[static_cast<std::size_t>(idx[i])] >= 0.5;
      if (pred && truth) ++tp;
      else if (pred && !truth) ++fp;
      else if (!pred && truth) ++fn;
      else ++tn;
    }
  }
  return MetricsReport::from_counts(tp, fp, fn, tn);
}

double loss_on(Model& model, const Batch& batch, const std::vector<double>& labels) {
  const std::vector<double> probs = model.forward(batch, /*training=*/false, nullptr);
  return bce_loss(probs, labels);
}

GradCheckResult grad_check(Model& model, const Batch& batch,
                           const std::vector<double>& labels, double fd_step) {
  // Prime the batch-norm running statistics, then hold them fixed by staying
  // in inference mode for both the analytic and numeric passes.
  nn::Rng prime_rng(7);
  model.forward(batch, /*training=*/true, &prime_rng);

  const std::vector<double> probs = model.forward(batch, /*training=*/false, nullptr);
  std::vector<double> dlogits(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    dlogits[i] = (probs[i] - labels[i]) / static_cast<double>(probs.size());
  model.params().zero_grad();
  model.backward(dlogits);

  std::vector<Mat> analytic;
  for (const Param& p : model.params().all()) analytic.push_back(p.grad);

  GradCheckResult result;
  std::size_t pi = 0;
  for (Param& p : model.params().all()) {
    const Mat& a = analytic[pi++];
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        const double saved = p.value(i, j);
        p.value(i, j) = saved + fd_step;
        const double lp = loss_on(model, batch, labels);
        p.value(i, j) = saved - fd_step;
        const double lm = loss_on(model, batch, labels);
        p.value(i, j) = saved;
        const double numeric = (lp - lm) / (2.0 * fd_step);
        const double rel = std::abs(a(i, j) - numeric) /
                           std::max({1.0, std::abs(a(i, j)), std::abs(numeric)});
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param = p.name;
        }
      }
    }
  }
  return result;
}

}  // namespace mcvd
