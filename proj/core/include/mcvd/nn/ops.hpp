#pragma once

#include <cstdint>
#include <vector>

#include "mcvd/nn/common.hpp"

namespace mcvd::nn {

// Every op pairs a forward with an explicit backward. Backwards accumulate
// into Param::grad and return the gradient w.r.t. their input.

// ---- affine -----------------------------------------------------------

struct LinearCache {
  Mat x;
};

/// Y = X W + 1 b, W: (in x out), b: (1 x out).
Mat linear_forward(const Mat& x, const Param& w, const Param& b, LinearCache* cache);
Mat linear_backward(const Mat& dy, Param& w, Param& b, const LinearCache& cache);

// ---- 1-D convolution over stacked equal-length segments ----------------

struct Conv1dCache {
  Mat xcol;
  int segments = 0;
  int seg_len = 0;
  int kernel = 0;
  int in_dim = 0;
};

/// X holds `segments` sequences of `seg_len` rows each, stacked vertically:
/// (segments*seg_len) x in_dim. Valid convolution along each segment with
/// kernel k gives (segments*(seg_len-k+1)) x filters.
Mat conv1d_forward(const Mat& x, int segments, int seg_len, int kernel,
                   const Param& w, const Param& b, Conv1dCache* cache);
Mat conv1d_backward(const Mat& dy, Param& w, Param& b, const Conv1dCache& cache);

// ---- batch normalization ------------------------------------------------

struct BatchNorm {
  Param* gamma = nullptr;     // 1 x f
  Param* beta = nullptr;      // 1 x f
  Param* run_mean = nullptr;  // 1 x f buffer
  Param* run_var = nullptr;   // 1 x f buffer
  double momentum = 0.1;
  double eps = 1e-5;
};

struct BatchNormCache {
  Mat xhat;
  Vec inv_std;
  bool training = false;
};

/// Statistics per column over all rows. Training mode normalizes with batch
/// statistics and updates the running ones; inference uses the running
/// statistics, making the op a fixed affine map.
Mat batchnorm_forward(BatchNorm& bn, const Mat& x, bool training, BatchNormCache* cache);
Mat batchnorm_backward(BatchNorm& bn, const Mat& dy, const BatchNormCache& cache);

// ---- dropout ------------------------------------------------------------

struct DropoutCache {
  Mat mask;  // 0 or 1/(1-rate)
  bool active = false;
};

Mat dropout_forward(const Mat& x, double rate, bool training, Rng* rng, DropoutCache* cache);
Mat dropout_backward(const Mat& dy, const DropoutCache& cache);

// ---- softmax helpers ------------------------------------------------------

Mat softmax_rows(const Mat& scores);
/// Given P = softmax_rows(Z) and dP, returns dZ.
Mat softmax_rows_backward(const Mat& p, const Mat& dp);

// ---- multi-head self-attention -------------------------------------------

struct AttentionParams {
  Param *wq = nullptr, *bq = nullptr;
  Param *wk = nullptr, *bk = nullptr;
  Param *wv = nullptr, *bv = nullptr;
  Param *wo = nullptr, *bo = nullptr;
  int heads = 8;
};

struct AttentionCache {
  Mat x, q, k, v;
  std::vector<Mat> scores;  // per head, row-stochastic
  Mat concat;
};

/// Self-attention over the rows of X (one row per non-padded function).
/// Padding never reaches this op: callers pass the compact active set, which
/// is equivalent to masking padded keys and queries. `mean_scores`, when
/// non-null, receives the head-averaged score matrix.
Mat attention_forward(const AttentionParams& p, const Mat& x, AttentionCache* cache,
                      Mat* mean_scores = nullptr);
Mat attention_backward(const AttentionParams& p, const Mat& dy, AttentionCache& cache);

// ---- graph convolution -----------------------------------------------------

/// Symmetric-normalized adjacency with self-loops:
///   N = D^{-1/2} (max(A, A^T) + I) D^{-1/2}
/// from a dense row-major {0,1} adjacency of size n. Isolated rows get
/// degree 1 from the self-loop, so no entry divides by zero.
Mat gcn_normalize(const std::vector<std::int32_t>& adjacency, int n);

struct GcnCache {
  Mat h_in;
  Mat nh;   // N * H
  Mat pre;  // N H W, before ReLU
};

/// H' = ReLU(N H W).
Mat gcn_forward(const Mat& norm, const Mat& h, const Param& w, GcnCache* cache);
Mat gcn_backward(const Mat& norm, const Mat& dout, Param& w, const GcnCache& cache);

// ---- top-K node pooling ------------------------------------------------------

struct TopkParams {
  Param *w1 = nullptr, *b1 = nullptr;  // scorer hidden layer
  Param *w2 = nullptr, *b2 = nullptr;  // scorer output neuron
  double ratio = 0.1;
  double temperature = 0.1;
};

/// Fixed slot count for a graph of m nodes.
int topk_slots(double ratio, int m);

struct TopkCache {
  Mat h;
  std::vector<int> active;   // node indices with real content
  Mat hidden;                // scorer hidden activations, one row per active node
  Vec scores;                // raw scores per active node
  Vec alpha_active;          // softmax(scores / t)
  std::vector<int> chosen;   // slot -> node index, -1 for empty slot
  Vec alpha_full;            // per node, 0 where masked
};

/// Scores every active node with the two-layer scorer, softmaxes with
/// temperature over active nodes, picks the top slots (ties to the lowest
/// index) and returns the chosen rows scaled by their alpha, concatenated
/// into one vector of length slots*dim. Empty slots stay zero.
Vec topk_forward(const TopkParams& p, const Mat& h, const std::vector<bool>& active_mask,
                 TopkCache* cache);
Mat topk_backward(const TopkParams& p, const Vec& dout, const TopkCache& cache);

}  // namespace mcvd::nn
