#pragma once

#include <json.hpp>
#include <memory>
#include <vector>

#include "mcvd/nn/common.hpp"
#include "mcvd/nn/ops.hpp"
#include "mcvd/representation.hpp"

namespace mcvd::nn {

enum class ModelKind { Sequential, Graph };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Architecture hyperparameters for both classifiers. Defaults follow the
/// full-scale configuration; desk-scale runs shrink the dimensions through
/// the CLI.
struct ModelConfig {
  ModelKind kind = ModelKind::Sequential;
  int vocab_size = 3;

  int embed_dim = 512;  // instruction embedding
  int func_dim = 512;   // function embedding entering attention
  int prog_dim = 256;   // program embedding entering the classifier
  int heads = 8;

  // sequential branch: single size {3|5|7} with 768 filters, or the hybrid
  // {3,5,7} with 256 per branch
  std::vector<int> filter_sizes{7};
  int filters_per_size = 768;

  // graph branch
  int graph_filter_size = 3;
  int graph_filters = 512;  // block embedding dim
  int gcn_layers = 2;       // 1..4
  int gcn_hidden = 512;
  double topk_ratio = 0.1;
  double temperature = 0.1;
  int scorer_hidden = 64;
  int n_blk = 16;  // graph tensor shape the parameters are sized for

  double dropout = 0.3;
  std::vector<int> ffn_hidden{256, 128, 64};

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// One training/eval batch. Sequential models read `seq`, graph models read
/// `graph`.
struct Batch {
  std::vector<const SeqTensor*> seq;
  std::vector<const GraphTensor*> graph;

  std::size_t size() const { return seq.empty() ? graph.size() : seq.size(); }
};

/// Shared tail of both architectures: self-attention over function
/// embeddings, masked mean pooling, projection to the program embedding and
/// the feed-forward classifier.
struct Head {
  AttentionParams attn;
  Param* prog_w = nullptr;
  Param* prog_b = nullptr;
  std::vector<Param*> ffn_w;
  std::vector<Param*> ffn_b;
};

struct HeadCache {
  Mat xfunc;
  AttentionCache attn;
  Mat attended;
  LinearCache prog;
  std::vector<Mat> ffn_pre;  // pre-activation of each hidden layer
  std::vector<LinearCache> ffn_lin;
  double logit = 0.0;
};

class Model {
 public:
  virtual ~Model() = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Returns per-sample probabilities; caches everything backward() needs.
  virtual std::vector<double> forward(const Batch& batch, bool training,
                                      Rng* dropout_rng) = 0;

  /// dlogits = dLoss/dlogit per sample of the last forward call.
  virtual void backward(const std::vector<double>& dlogits) = 0;

  /// Attention received per function for one sample (inference mode): the
  /// column mean of the head-averaged score matrix over non-padded
  /// functions. Sums to 1. Padded functions report 0.
  virtual std::vector<double> attention_received(const Batch& sample) = 0;

  static std::unique_ptr<Model> create(const ModelConfig& cfg, std::uint64_t init_seed);

 protected:
  Model(const ModelConfig& cfg) : cfg_(cfg) {}

  ModelConfig cfg_;
  ParamStore params_;
};

}  // namespace mcvd::nn
