#include "mcvd/errors.hpp"
#include "model_internal.hpp"

namespace mcvd::nn {
namespace {

using detail::head_backward;
using detail::head_forward;

class GraphModel final : public Model {
 public:
  GraphModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg) {
    if (cfg.gcn_layers < 1) throw Error("graph model needs at least one GCN layer");
    Rng rng(seed);
    embedding_ = params_.add("embedding", cfg.vocab_size, cfg.embed_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    for (Eigen::Index i = 0; i < embedding_->value.rows(); ++i)
      for (Eigen::Index j = 0; j < embedding_->value.cols(); ++j)
        embedding_->value(i, j) = rng.uniform(-bound, bound);

    conv_w_ = detail::add_linear(params_, rng, "conv" + std::to_string(cfg.graph_filter_size),
                                 cfg.graph_filter_size * cfg.embed_dim, cfg.graph_filters,
                                 &conv_b_);
    bn_ = detail::add_batchnorm(params_, "bn" + std::to_string(cfg.graph_filter_size),
                                cfg.graph_filters);

    int in = cfg.graph_filters;
    for (int l = 0; l < cfg.gcn_layers; ++l) {
      Param* w = params_.add("gcn" + std::to_string(l) + ".w", in, cfg.gcn_hidden);
      detail::init_fan_in(rng, w->value, in);
      gcn_w_.push_back(w);
      in = cfg.gcn_hidden;
    }

    topk_.ratio = cfg.topk_ratio;
    topk_.temperature = cfg.temperature;
    topk_.w1 = detail::add_linear(params_, rng, "topk.score1", cfg.gcn_hidden,
                                  cfg.scorer_hidden, &topk_.b1);
    topk_.w2 = detail::add_linear(params_, rng, "topk.score2", cfg.scorer_hidden, 1,
                                  &topk_.b2);

    slots_ = topk_slots(cfg.topk_ratio, cfg.n_blk);
    func_w_ = detail::add_linear(params_, rng, "func_proj", slots_ * cfg.gcn_hidden,
                                 cfg.func_dim, &func_b_);
    head_ = detail::make_head(params_, rng, cfg);
  }

  std::vector<double> forward(const Batch& batch, bool training, Rng* dropout_rng) override {
    const auto& samples = batch.graph;
    if (samples.empty()) throw Error("graph model got an empty batch");
    cache_ = Cache{};
    cache_.batch = samples;
    const int n_blk = samples[0]->n_blk;
    if (n_blk != cfg_.n_blk)
      throw Error("graph tensor n_blk does not match the model configuration");
    if (n_blk < cfg_.graph_filter_size) throw Error("n_blk shorter than filter size");

    // Enumerate active blocks and active functions across the batch.
    cache_.fn_rows.assign(samples.size(), {});
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const GraphTensor& t = *samples[s];
      if (t.n_blk != n_blk) throw Error("mixed tensor shapes in one batch");
      for (int f = 0; f < t.p; ++f) {
        FnCache fn;
        fn.sample = static_cast<int>(s);
        fn.func = f;
        fn.active_mask.assign(static_cast<std::size_t>(n_blk), false);
        for (int b = 0; b < n_blk; ++b) {
          bool active = false;
          for (int i = 0; i < n_blk && !active; ++i)
            active = t.feature_at(f, i, b) != kPadId;
          if (active) {
            fn.active_mask[static_cast<std::size_t>(b)] = true;
            fn.block_rows.push_back(static_cast<int>(cache_.blks.size()));
            fn.block_ids.push_back(b);
            cache_.blks.push_back({static_cast<int>(s), f, b});
          }
        }
        if (!fn.block_ids.empty()) {
          cache_.fn_rows[s].push_back(static_cast<int>(cache_.fns.size()));
          cache_.fns.push_back(std::move(fn));
        }
      }
    }

    const int total_blks = static_cast<int>(cache_.blks.size());
    Mat block_embed(total_blks, cfg_.graph_filters);
    if (total_blks > 0) {
      Mat x(static_cast<Eigen::Index>(total_blks) * n_blk, cfg_.embed_dim);
      cache_.ids.resize(static_cast<std::size_t>(total_blks) * n_blk);
      for (int r = 0; r < total_blks; ++r) {
        const auto& blk = cache_.blks[static_cast<std::size_t>(r)];
        const GraphTensor& t = *samples[static_cast<std::size_t>(blk.sample)];
        for (int i = 0; i < n_blk; ++i) {
          const std::int32_t id = t.feature_at(blk.func, i, blk.blk);
          if (id < 0 || id >= cfg_.vocab_size)
            throw IdOutOfRange("token id " + std::to_string(id) + " out of range");
          cache_.ids[static_cast<std::size_t>(r) * n_blk + i] = id;
          x.row(static_cast<Eigen::Index>(r) * n_blk + i) = embedding_->value.row(id);
        }
      }
      Mat y = conv1d_forward(x, total_blks, n_blk, cfg_.graph_filter_size, *conv_w_,
                             *conv_b_, &cache_.conv);
      y = batchnorm_forward(bn_, y, training, &cache_.bn);
      cache_.relu_pre = y;
      y = relu(y);
      y = dropout_forward(y, cfg_.dropout, training, dropout_rng, &cache_.drop);
      cache_.lout = n_blk - cfg_.graph_filter_size + 1;
      for (int r = 0; r < total_blks; ++r)
        block_embed.row(r) =
            y.middleRows(static_cast<Eigen::Index>(r) * cache_.lout, cache_.lout)
                .colwise().mean();
    }

    // Per-function GCN stack and top-K pooling.
    Mat z(static_cast<Eigen::Index>(cache_.fns.size()), slots_ * cfg_.gcn_hidden);
    for (std::size_t fi = 0; fi < cache_.fns.size(); ++fi) {
      FnCache& fn = cache_.fns[fi];
      const GraphTensor& t = *samples[static_cast<std::size_t>(fn.sample)];
      fn.h0 = Mat::Zero(n_blk, cfg_.graph_filters);
      for (std::size_t k = 0; k < fn.block_ids.size(); ++k)
        fn.h0.row(fn.block_ids[k]) = block_embed.row(fn.block_rows[k]);
      fn.norm = gcn_normalize(t.adjacency[static_cast<std::size_t>(fn.func)], n_blk);
      fn.gcn.assign(gcn_w_.size(), GcnCache{});
      Mat h = fn.h0;
      for (std::size_t l = 0; l < gcn_w_.size(); ++l)
        h = gcn_forward(fn.norm, h, *gcn_w_[l], &fn.gcn[l]);
      const Vec pooled = topk_forward(topk_, h, fn.active_mask, &fn.topk);
      z.row(static_cast<Eigen::Index>(fi)) = pooled.transpose();
    }
    cache_.z = z;
    cache_.xfunc = cache_.fns.empty()
                       ? Mat(0, cfg_.func_dim)
                       : linear_forward(z, *func_w_, *func_b_, &cache_.func_lin);

    cache_.heads.assign(samples.size(), HeadCache{});
    std::vector<double> probs(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& rows = cache_.fn_rows[s];
      Mat xf(static_cast<Eigen::Index>(rows.size()), cfg_.func_dim);
      for (std::size_t r = 0; r < rows.size(); ++r)
        xf.row(static_cast<Eigen::Index>(r)) = cache_.xfunc.row(rows[r]);
      Mat* capture = (capture_attention_ && s == 0) ? &captured_scores_ : nullptr;
      const double logit = head_forward(head_, xf, &cache_.heads[s], capture);
      probs[s] = sigmoid(logit);
    }
    cache_.valid = true;
    return probs;
  }

  void backward(const std::vector<double>& dlogits) override {
    if (!cache_.valid) throw Error("backward without a cached forward");
    const int n_blk = cfg_.n_blk;
    const int total_fns = static_cast<int>(cache_.fns.size());

    Mat dxfunc = Mat::Zero(total_fns, cfg_.func_dim);
    for (std::size_t s = 0; s < cache_.heads.size(); ++s) {
      Mat d = head_backward(head_, dlogits[s], cache_.heads[s]);
      const auto& rows = cache_.fn_rows[s];
      for (std::size_t r = 0; r < rows.size(); ++r)
        dxfunc.row(rows[r]) = d.row(static_cast<Eigen::Index>(r));
    }
    if (total_fns == 0) return;

    const Mat dz = linear_backward(dxfunc, *func_w_, *func_b_, cache_.func_lin);

    const int total_blks = static_cast<int>(cache_.blks.size());
    Mat dblock_embed = Mat::Zero(total_blks, cfg_.graph_filters);
    for (std::size_t fi = 0; fi < cache_.fns.size(); ++fi) {
      FnCache& fn = cache_.fns[fi];
      Mat dh = topk_backward(topk_, dz.row(static_cast<Eigen::Index>(fi)).transpose(),
                             fn.topk);
      for (std::size_t l = gcn_w_.size(); l-- > 0;)
        dh = gcn_backward(fn.norm, dh, *gcn_w_[l], fn.gcn[l]);
      for (std::size_t k = 0; k < fn.block_ids.size(); ++k)
        dblock_embed.row(fn.block_rows[k]) += dh.row(fn.block_ids[k]);
    }

    // Through pooling, dropout, ReLU, batch norm, conv and the embedding.
    Mat dy(static_cast<Eigen::Index>(total_blks) * cache_.lout, cfg_.graph_filters);
    for (int r = 0; r < total_blks; ++r)
      dy.middleRows(static_cast<Eigen::Index>(r) * cache_.lout, cache_.lout) =
          Mat::Ones(cache_.lout, 1) *
          (dblock_embed.row(r) / static_cast<double>(cache_.lout));
    dy = dropout_backward(dy, cache_.drop);
    dy = (cache_.relu_pre.array() > 0.0).cast<double>().matrix().cwiseProduct(dy);
    dy = batchnorm_backward(bn_, dy, cache_.bn);
    const Mat dx = conv1d_backward(dy, *conv_w_, *conv_b_, cache_.conv);
    for (Eigen::Index r = 0; r < dx.rows(); ++r)
      embedding_->grad.row(cache_.ids[static_cast<std::size_t>(r)]) += dx.row(r);
  }

  std::vector<double> attention_received(const Batch& sample) override {
    capture_attention_ = true;
    captured_scores_ = Mat();
    forward(sample, /*training=*/false, nullptr);
    capture_attention_ = false;

    const GraphTensor& t = *sample.graph[0];
    std::vector<double> out(static_cast<std::size_t>(t.p), 0.0);
    const auto& rows = cache_.fn_rows[0];
    if (rows.empty()) return out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int func = cache_.fns[static_cast<std::size_t>(rows[r])].func;
      out[static_cast<std::size_t>(func)] =
          captured_scores_.col(static_cast<Eigen::Index>(r)).mean();
    }
    return out;
  }

 private:
  struct BlkRef {
    int sample;
    int func;
    int blk;
  };
  struct FnCache {
    int sample = 0;
    int func = 0;
    std::vector<bool> active_mask;
    std::vector<int> block_rows;  // rows into block_embed
    std::vector<int> block_ids;   // block index within the function
    Mat h0;
    Mat norm;
    std::vector<GcnCache> gcn;
    TopkCache topk;
  };
  struct Cache {
    std::vector<const GraphTensor*> batch;
    std::vector<BlkRef> blks;
    std::vector<FnCache> fns;
    std::vector<std::vector<int>> fn_rows;
    std::vector<std::int32_t> ids;
    Conv1dCache conv;
    BatchNormCache bn;
    Mat relu_pre;
    DropoutCache drop;
    int lout = 0;
    Mat z;
    LinearCache func_lin;
    Mat xfunc;
    std::vector<HeadCache> heads;
    bool valid = false;
  };

  Param* embedding_ = nullptr;
  Param* conv_w_ = nullptr;
  Param* conv_b_ = nullptr;
  BatchNorm bn_;
  std::vector<Param*> gcn_w_;
  TopkParams topk_;
  int slots_ = 1;
  Param* func_w_ = nullptr;
  Param* func_b_ = nullptr;
  Head head_;
  Cache cache_;
  bool capture_attention_ = false;
  Mat captured_scores_;
};

}  // namespace

namespace detail {
std::unique_ptr<Model> make_graph_model(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<GraphModel>(cfg, seed);
}
}  // namespace detail

}  // namespace mcvd::nn
