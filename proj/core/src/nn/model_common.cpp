#include <cmath>

#include "mcvd/errors.hpp"
#include "model_internal.hpp"

namespace mcvd::nn {

using nlohmann::json;

const char* to_string(ModelKind kind) {
  return kind == ModelKind::Sequential ? "sequential" : "graph";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "sequential" || name == "seq") return ModelKind::Sequential;
  if (name == "graph") return ModelKind::Graph;
  throw InputError("unknown model kind: " + name);
}

json ModelConfig::to_json() const {
  return json{{"kind", to_string(kind)},
              {"vocab_size", vocab_size},
              {"embed_dim", embed_dim},
              {"func_dim", func_dim},
              {"prog_dim", prog_dim},
              {"heads", heads},
              {"filter_sizes", filter_sizes},
              {"filters_per_size", filters_per_size},
              {"graph_filter_size", graph_filter_size},
              {"graph_filters", graph_filters},
              {"gcn_layers", gcn_layers},
              {"gcn_hidden", gcn_hidden},
              {"topk_ratio", topk_ratio},
              {"temperature", temperature},
              {"scorer_hidden", scorer_hidden},
              {"n_blk", n_blk},
              {"dropout", dropout},
              {"ffn_hidden", ffn_hidden}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.func_dim = j.at("func_dim").get<int>();
  c.prog_dim = j.at("prog_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.filter_sizes = j.at("filter_sizes").get<std::vector<int>>();
  c.filters_per_size = j.at("filters_per_size").get<int>();
  c.graph_filter_size = j.at("graph_filter_size").get<int>();
  c.graph_filters = j.at("graph_filters").get<int>();
  c.gcn_layers = j.at("gcn_layers").get<int>();
  c.gcn_hidden = j.at("gcn_hidden").get<int>();
  c.topk_ratio = j.at("topk_ratio").get<double>();
  c.temperature = j.at("temperature").get<double>();
  c.scorer_hidden = j.at("scorer_hidden").get<int>();
  c.n_blk = j.at("n_blk").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.ffn_hidden = j.at("ffn_hidden").get<std::vector<int>>();
  return c;
}

namespace detail {

void init_fan_in(Rng& rng, Mat& m, int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-bound, bound);
}

Param* add_linear(ParamStore& store, Rng& rng, const std::string& name, int in, int out,
                  Param** bias_out) {
  Param* w = store.add(name + ".w", in, out);
  init_fan_in(rng, w->value, in);
  Param* b = store.add(name + ".b", 1, out);
  init_fan_in(rng, b->value, in);
  if (bias_out) *bias_out = b;
  return w;
}

BatchNorm add_batchnorm(ParamStore& store, const std::string& name, int features) {
  BatchNorm bn;
  bn.gamma = store.add(name + ".gamma", 1, features);
  bn.gamma->value.setOnes();
  bn.beta = store.add(name + ".beta", 1, features);
  bn.run_mean = store.add(name + ".run_mean", 1, features, /*trainable=*/false);
  bn.run_var = store.add(name + ".run_var", 1, features, /*trainable=*/false);
  bn.run_var->value.setOnes();
  return bn;
}

Head make_head(ParamStore& store, Rng& rng, const ModelConfig& cfg) {
  if (cfg.func_dim % cfg.heads != 0)
    throw Error("func_dim must be divisible by the attention head count");
  Head head;
  head.attn.heads = cfg.heads;
  head.attn.wq = add_linear(store, rng, "attn.q", cfg.func_dim, cfg.func_dim, &head.attn.bq);
  head.attn.wk = add_linear(store, rng, "attn.k", cfg.func_dim, cfg.func_dim, &head.attn.bk);
  head.attn.wv = add_linear(store, rng, "attn.v", cfg.func_dim, cfg.func_dim, &head.attn.bv);
  head.attn.wo = add_linear(store, rng, "attn.o", cfg.func_dim, cfg.func_dim, &head.attn.bo);
  head.prog_w = add_linear(store, rng, "prog_proj", cfg.func_dim, cfg.prog_dim, &head.prog_b);

  int in = cfg.prog_dim;
  for (std::size_t i = 0; i < cfg.ffn_hidden.size(); ++i) {
    Param* b = nullptr;
    head.ffn_w.push_back(add_linear(store, rng, "ffn" + std::to_string(i), in,
                                    cfg.ffn_hidden[i], &b));
    head.ffn_b.push_back(b);
    in = cfg.ffn_hidden[i];
  }
  Param* b = nullptr;
  head.ffn_w.push_back(add_linear(store, rng, "ffn_out", in, 1, &b));
  head.ffn_b.push_back(b);
  return head;
}

double head_forward(const Head& head, const Mat& xfunc, HeadCache* cache,
                    Mat* mean_scores) {
  const int fd = static_cast<int>(head.prog_w->value.rows());
  cache->xfunc = xfunc;
  Mat pooled;
  if (xfunc.rows() > 0) {
    cache->attended = attention_forward(head.attn, xfunc, &cache->attn, mean_scores);
    pooled = cache->attended.colwise().mean();
  } else {
    pooled = Mat::Zero(1, fd);  // empty program: nothing to attend over
  }
  Mat h = linear_forward(pooled, *head.prog_w, *head.prog_b, &cache->prog);

  cache->ffn_pre.clear();
  cache->ffn_lin.assign(head.ffn_w.size(), LinearCache{});
  const std::size_t hidden_layers = head.ffn_w.size() - 1;
  for (std::size_t i = 0; i < hidden_layers; ++i) {
    Mat pre = linear_forward(h, *head.ffn_w[i], *head.ffn_b[i], &cache->ffn_lin[i]);
    cache->ffn_pre.push_back(pre);
    h = relu(pre);
  }
  Mat out = linear_forward(h, *head.ffn_w[hidden_layers], *head.ffn_b[hidden_layers],
                           &cache->ffn_lin[hidden_layers]);
  cache->logit = out(0, 0);
  return cache->logit;
}

Mat head_backward(const Head& head, double dlogit, HeadCache& cache) {
  const std::size_t hidden_layers = head.ffn_w.size() - 1;
  Mat d = Mat::Constant(1, 1, dlogit);
  d = linear_backward(d, *head.ffn_w[hidden_layers], *head.ffn_b[hidden_layers],
                      cache.ffn_lin[hidden_layers]);
  for (std::size_t i = hidden_layers; i-- > 0;) {
    d = (cache.ffn_pre[i].array() > 0.0).cast<double>().matrix().cwiseProduct(d);
    d = linear_backward(d, *head.ffn_w[i], *head.ffn_b[i], cache.ffn_lin[i]);
  }
  d = linear_backward(d, *head.prog_w, *head.prog_b, cache.prog);

  if (cache.xfunc.rows() == 0) return Mat::Zero(0, cache.xfunc.cols());
  const double n = static_cast<double>(cache.xfunc.rows());
  Mat dattended = (Mat::Ones(cache.xfunc.rows(), 1) * d.row(0)) / n;
  return attention_backward(head.attn, dattended, cache.attn);
}

}  // namespace detail

std::unique_ptr<Model> Model::create(const ModelConfig& cfg, std::uint64_t init_seed) {
  return cfg.kind == ModelKind::Sequential ? detail::make_sequential_model(cfg, init_seed)
                                           : detail::make_graph_model(cfg, init_seed);
}

}  // namespace mcvd::nn
