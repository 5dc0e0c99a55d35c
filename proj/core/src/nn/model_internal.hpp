#pragma once

#include <string>

#include "mcvd/nn/model.hpp"

namespace mcvd::nn::detail {

/// Fan-in-scaled uniform init, U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
void init_fan_in(Rng& rng, Mat& m, int fan_in);

/// Adds a weight/bias pair initialized like a dense layer.
Param* add_linear(ParamStore& store, Rng& rng, const std::string& name, int in, int out,
                  Param** bias_out);

/// Adds gamma/beta plus running-stat buffers.
BatchNorm add_batchnorm(ParamStore& store, const std::string& name, int features);

Head make_head(ParamStore& store, Rng& rng, const ModelConfig& cfg);

/// xfunc: one row per non-padded function (may be empty). Returns the logit.
double head_forward(const Head& head, const Mat& xfunc, HeadCache* cache,
                    Mat* mean_scores);

/// Returns dLoss/dxfunc with one row per input row.
Mat head_backward(const Head& head, double dlogit, HeadCache& cache);

std::unique_ptr<Model> make_sequential_model(const ModelConfig& cfg, std::uint64_t seed);
std::unique_ptr<Model> make_graph_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace mcvd::nn::detail
