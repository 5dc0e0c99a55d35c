#include "mcvd/errors.hpp"
#include "model_internal.hpp"

namespace mcvd::nn {
namespace {

using detail::head_backward;
using detail::head_forward;

class SequentialModel final : public Model {
 public:
  SequentialModel(const ModelConfig& cfg, std::uint64_t seed) : Model(cfg) {
    Rng rng(seed);
    embedding_ = params_.add("embedding", cfg.vocab_size, cfg.embed_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    for (Eigen::Index i = 0; i < embedding_->value.rows(); ++i)
      for (Eigen::Index j = 0; j < embedding_->value.cols(); ++j)
        embedding_->value(i, j) = rng.uniform(-bound, bound);

    for (int k : cfg.filter_sizes) {
      Branch br;
      br.kernel = k;
      const std::string name = "conv" + std::to_string(k);
      br.w = detail::add_linear(params_, rng, name, k * cfg.embed_dim,
                                cfg.filters_per_size, &br.b);
      br.bn = detail::add_batchnorm(params_, "bn" + std::to_string(k),
                                    cfg.filters_per_size);
      branches_.push_back(br);
    }
    const int concat_dim = static_cast<int>(cfg.filter_sizes.size()) * cfg.filters_per_size;
    func_w_ = detail::add_linear(params_, rng, "func_proj", concat_dim, cfg.func_dim,
                                 &func_b_);
    head_ = detail::make_head(params_, rng, cfg);
  }

  std::vector<double> forward(const Batch& batch, bool training, Rng* dropout_rng) override {
    const auto& samples = batch.seq;
    if (samples.empty()) throw Error("sequential model got an empty batch");
    cache_ = Cache{};
    cache_.batch = samples;
    const int n_seq = samples[0]->n_seq;
    const int m_seq = samples[0]->m_seq;

    // Active (non-padded) functions across the batch.
    cache_.fn_rows.assign(samples.size(), {});
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s]->n_seq != n_seq || samples[s]->m_seq != m_seq)
        throw Error("mixed tensor shapes in one batch");
      for (int j = 0; j < m_seq; ++j) {
        bool active = false;
        for (int i = 0; i < n_seq && !active; ++i)
          active = samples[s]->at(i, j) != kPadId;
        if (active) {
          cache_.fn_rows[s].push_back(static_cast<int>(cache_.fns.size()));
          cache_.fns.push_back({static_cast<int>(s), j});
        }
      }
    }

    const int total_fns = static_cast<int>(cache_.fns.size());
    Mat pooled_concat(total_fns, static_cast<Eigen::Index>(branches_.size()) *
                                     cfg_.filters_per_size);
    if (total_fns > 0) {
      // Embedding gather for every active function sequence.
      Mat x(static_cast<Eigen::Index>(total_fns) * n_seq, cfg_.embed_dim);
      cache_.ids.resize(static_cast<std::size_t>(total_fns) * n_seq);
      for (int r = 0; r < total_fns; ++r) {
        const auto& fn = cache_.fns[static_cast<std::size_t>(r)];
        const SeqTensor& t = *samples[static_cast<std::size_t>(fn.sample)];
        for (int i = 0; i < n_seq; ++i) {
          const std::int32_t id = t.at(i, fn.col);
          if (id < 0 || id >= cfg_.vocab_size)
            throw IdOutOfRange("token id " + std::to_string(id) + " out of range");
          cache_.ids[static_cast<std::size_t>(r) * n_seq + i] = id;
          x.row(static_cast<Eigen::Index>(r) * n_seq + i) = embedding_->value.row(id);
        }
      }
      cache_.seg_len = n_seq;

      cache_.branches.assign(branches_.size(), {});
      for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
        Branch& br = branches_[bi];
        auto& bc = cache_.branches[bi];
        if (n_seq < br.kernel) throw Error("n_seq shorter than filter size");
        Mat y = conv1d_forward(x, total_fns, n_seq, br.kernel, *br.w, *br.b, &bc.conv);
        y = batchnorm_forward(br.bn, y, training, &bc.bn);
        bc.relu_pre = y;
        y = relu(y);
        y = dropout_forward(y, cfg_.dropout, training, dropout_rng, &bc.drop);
        bc.lout = n_seq - br.kernel + 1;
        // global average pooling per function
        for (int r = 0; r < total_fns; ++r)
          pooled_concat.block(r, static_cast<Eigen::Index>(bi) * cfg_.filters_per_size, 1,
                              cfg_.filters_per_size) =
              y.middleRows(static_cast<Eigen::Index>(r) * bc.lout, bc.lout).colwise().mean();
      }
    }
    cache_.pooled = pooled_concat;
    cache_.xfunc = total_fns > 0
                       ? linear_forward(pooled_concat, *func_w_, *func_b_, &cache_.func_lin)
                       : Mat(0, cfg_.func_dim);

    cache_.heads.assign(samples.size(), HeadCache{});
    std::vector<double> probs(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& rows = cache_.fn_rows[s];
      Mat xf(static_cast<Eigen::Index>(rows.size()), cfg_.func_dim);
      for (std::size_t r = 0; r < rows.size(); ++r) xf.row(static_cast<Eigen::Index>(r)) = cache_.xfunc.row(rows[r]);
      Mat* capture = (capture_attention_ && s == 0) ? &captured_scores_ : nullptr;
      const double logit = head_forward(head_, xf, &cache_.heads[s], capture);
      probs[s] = sigmoid(logit);
    }
    cache_.valid = true;
    return probs;
  }

  void backward(const std::vector<double>& dlogits) override {
    if (!cache_.valid) throw Error("backward without a cached forward");
    const int total_fns = static_cast<int>(cache_.fns.size());
    Mat dxfunc = Mat::Zero(total_fns, cfg_.func_dim);
    for (std::size_t s = 0; s < cache_.heads.size(); ++s) {
      Mat d = head_backward(head_, dlogits[s], cache_.heads[s]);
      const auto& rows = cache_.fn_rows[s];
      for (std::size_t r = 0; r < rows.size(); ++r)
        dxfunc.row(rows[r]) = d.row(static_cast<Eigen::Index>(r));
    }
    if (total_fns == 0) return;

    Mat dpooled = linear_backward(dxfunc, *func_w_, *func_b_, cache_.func_lin);
    Mat dx = Mat::Zero(static_cast<Eigen::Index>(total_fns) * cache_.seg_len, cfg_.embed_dim);
    for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
      Branch& br = branches_[bi];
      auto& bc = cache_.branches[bi];
      Mat dy(static_cast<Eigen::Index>(total_fns) * bc.lout, cfg_.filters_per_size);
      for (int r = 0; r < total_fns; ++r) {
        const Mat dgap =
            dpooled.block(r, static_cast<Eigen::Index>(bi) * cfg_.filters_per_size, 1,
                          cfg_.filters_per_size) /
            static_cast<double>(bc.lout);
        dy.middleRows(static_cast<Eigen::Index>(r) * bc.lout, bc.lout) =
            Mat::Ones(bc.lout, 1) * dgap;
      }
      dy = dropout_backward(dy, bc.drop);
      dy = (bc.relu_pre.array() > 0.0).cast<double>().matrix().cwiseProduct(dy);
      dy = batchnorm_backward(br.bn, dy, bc.bn);
      dx += conv1d_backward(dy, *br.w, *br.b, bc.conv);
    }
    for (Eigen::Index r = 0; r < dx.rows(); ++r)
      embedding_->grad.row(cache_.ids[static_cast<std::size_t>(r)]) += dx.row(r);
  }

  std::vector<double> attention_received(const Batch& sample) override {
    capture_attention_ = true;
    captured_scores_ = Mat();
    forward(sample, /*training=*/false, nullptr);
    capture_attention_ = false;

    const SeqTensor& t = *sample.seq[0];
    std::vector<double> out(static_cast<std::size_t>(t.m_seq), 0.0);
    const auto& rows = cache_.fn_rows[0];
    if (rows.empty()) return out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int col = cache_.fns[static_cast<std::size_t>(rows[r])].col;
      out[static_cast<std::size_t>(col)] =
          captured_scores_.col(static_cast<Eigen::Index>(r)).mean();
    }
    return out;
  }

 private:
  struct FnRef {
    int sample;
    int col;
  };
  struct BranchCache {
    Conv1dCache conv;
    BatchNormCache bn;
    Mat relu_pre;
    DropoutCache drop;
    int lout = 0;
  };
  struct Branch {
    int kernel = 0;
    Param* w = nullptr;
    Param* b = nullptr;
    BatchNorm bn;
  };
  struct Cache {
    std::vector<const SeqTensor*> batch;
    std::vector<FnRef> fns;
    std::vector<std::vector<int>> fn_rows;
    std::vector<std::int32_t> ids;
    int seg_len = 0;
    std::vector<BranchCache> branches;
    Mat pooled;
    LinearCache func_lin;
    Mat xfunc;
    std::vector<HeadCache> heads;
    bool valid = false;
  };

  Param* embedding_ = nullptr;
  std::vector<Branch> branches_;
  Param* func_w_ = nullptr;
  Param* func_b_ = nullptr;
  Head head_;
  Cache cache_;
  bool capture_attention_ = false;
  Mat captured_scores_;
};

}  // namespace

namespace detail {
std::unique_ptr<Model> make_sequential_model(const ModelConfig& cfg, std::uint64_t seed) {
  return std::make_unique<SequentialModel>(cfg, seed);
}
}  // namespace detail

}  // namespace mcvd::nn
