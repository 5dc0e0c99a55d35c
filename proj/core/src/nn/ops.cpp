#include "mcvd/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mcvd::nn {

// ---- affine -----------------------------------------------------------

Mat linear_forward(const Mat& x, const Param& w, const Param& b, LinearCache* cache) {
  if (cache) cache->x = x;
  return (x * w.value).rowwise() + b.value.row(0);
}

Mat linear_backward(const Mat& dy, Param& w, Param& b, const LinearCache& cache) {
  w.grad.noalias() += cache.x.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  return dy * w.value.transpose();
}

// ---- conv1d ---------------------------------------------------------------

Mat conv1d_forward(const Mat& x, int segments, int seg_len, int kernel,
                   const Param& w, const Param& b, Conv1dCache* cache) {
  const int d = static_cast<int>(x.cols());
  const int lout = seg_len - kernel + 1;
  Mat xcol(static_cast<Eigen::Index>(segments) * lout, static_cast<Eigen::Index>(kernel) * d);
  for (int s = 0; s < segments; ++s) {
    for (int t = 0; t < lout; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(s) * lout + t;
      for (int j = 0; j < kernel; ++j)
        xcol.block(row, static_cast<Eigen::Index>(j) * d, 1, d) =
            x.row(static_cast<Eigen::Index>(s) * seg_len + t + j);
    }
  }
  Mat y = (xcol * w.value).rowwise() + b.value.row(0);
  if (cache) {
    cache->xcol = std::move(xcol);
    cache->segments = segments;
    cache->seg_len = seg_len;
    cache->kernel = kernel;
    cache->in_dim = d;
  }
  return y;
}

Mat conv1d_backward(const Mat& dy, Param& w, Param& b, const Conv1dCache& cache) {
  w.grad.noalias() += cache.xcol.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  const Mat dxcol = dy * w.value.transpose();

  const int d = cache.in_dim;
  const int lout = cache.seg_len - cache.kernel + 1;
  Mat dx = Mat::Zero(static_cast<Eigen::Index>(cache.segments) * cache.seg_len, d);
  for (int s = 0; s < cache.segments; ++s) {
    for (int t = 0; t < lout; ++t) {
      const Eigen::Index row = static_cast<Eigen::Index>(s) * lout + t;
      for (int j = 0; j < cache.kernel; ++j)
        dx.row(static_cast<Eigen::Index>(s) * cache.seg_len + t + j) +=
            dxcol.block(row, static_cast<Eigen::Index>(j) * d, 1, d);
    }
  }
  return dx;
}

// ---- batch normalization ------------------------------------------------

Mat batchnorm_forward(BatchNorm& bn, const Mat& x, bool training, BatchNormCache* cache) {
  const auto rows = static_cast<double>(x.rows());
  Mat y;
  if (training) {
    const Mat mean = x.colwise().mean();
    const Mat centered = x.rowwise() - mean.row(0);
    const Mat var = centered.array().square().colwise().mean();
    Vec inv_std = (var.array() + bn.eps).sqrt().inverse().transpose();
    Mat xhat = centered.array().rowwise() * inv_std.transpose().array();
    y = (xhat.array().rowwise() * bn.gamma->value.row(0).array()).rowwise() +
        bn.beta->value.row(0).array();
    // Running statistics track the batch ones; variance uses the unbiased
    // estimate when more than one row is available.
    const double unbias = rows > 1.0 ? rows / (rows - 1.0) : 1.0;
    bn.run_mean->value = (1.0 - bn.momentum) * bn.run_mean->value + bn.momentum * mean;
    bn.run_var->value =
        (1.0 - bn.momentum) * bn.run_var->value + bn.momentum * (var * unbias);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->training = true;
    }
  } else {
    Vec inv_std =
        (bn.run_var->value.array() + bn.eps).sqrt().inverse().transpose();
    Mat xhat = (x.rowwise() - bn.run_mean->value.row(0)).array().rowwise() *
               inv_std.transpose().array();
    y = (xhat.array().rowwise() * bn.gamma->value.row(0).array()).rowwise() +
        bn.beta->value.row(0).array();
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->training = false;
    }
  }
  return y;
}

Mat batchnorm_backward(BatchNorm& bn, const Mat& dy, const BatchNormCache& cache) {
  bn.gamma->grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  bn.beta->grad.row(0) += dy.colwise().sum();

  const Mat dxhat = dy.array().rowwise() * bn.gamma->value.row(0).array();
  if (!cache.training)
    return dxhat.array().rowwise() * cache.inv_std.transpose().array();

  // Training mode: statistics depend on the batch.
  const auto n = static_cast<double>(dy.rows());
  const Mat sum_dxhat = dxhat.colwise().sum();
  const Mat sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum();
  Mat dx = n * dxhat;
  dx.rowwise() -= sum_dxhat.row(0);
  dx -= cache.xhat.array().rowwise() * sum_dxhat_xhat.row(0).array();
  dx.array().rowwise() *= (cache.inv_std.transpose().array() / n);
  return dx;
}

// ---- dropout ------------------------------------------------------------

Mat dropout_forward(const Mat& x, double rate, bool training, Rng* rng,
                    DropoutCache* cache) {
  if (!training || rate <= 0.0) {
    if (cache) cache->active = false;
    return x;
  }
  const double keep = 1.0 - rate;
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
  if (cache) {
    cache->mask = mask;
    cache->active = true;
  }
  return x.cwiseProduct(mask);
}

Mat dropout_backward(const Mat& dy, const DropoutCache& cache) {
  if (!cache.active) return dy;
  return dy.cwiseProduct(cache.mask);
}

// ---- softmax ---------------------------------------------------------------

Mat softmax_rows(const Mat& scores) {
  Mat out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double mx = scores.row(i).maxCoeff();
    Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

Mat softmax_rows_backward(const Mat& p, const Mat& dp) {
  Mat dz(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double dot = p.row(i).dot(dp.row(i));
    dz.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
  }
  return dz;
}

// ---- attention ---------------------------------------------------------------

Mat attention_forward(const AttentionParams& p, const Mat& x, AttentionCache* cache,
                      Mat* mean_scores) {
  const int dm = static_cast<int>(x.cols());
  const int dh = dm / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat q = (x * p.wq->value).rowwise() + p.bq->value.row(0);
  Mat k = (x * p.wk->value).rowwise() + p.bk->value.row(0);
  Mat v = (x * p.wv->value).rowwise() + p.bv->value.row(0);

  Mat concat(x.rows(), dm);
  std::vector<Mat> scores;
  scores.reserve(static_cast<std::size_t>(p.heads));
  if (mean_scores) *mean_scores = Mat::Zero(x.rows(), x.rows());
  for (int h = 0; h < p.heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    const Mat qh = q.middleCols(c0, dh);
    const Mat kh = k.middleCols(c0, dh);
    const Mat vh = v.middleCols(c0, dh);
    Mat s = softmax_rows(qh * kh.transpose() * scale);
    concat.middleCols(c0, dh) = s * vh;
    if (mean_scores) *mean_scores += s / static_cast<double>(p.heads);
    scores.push_back(std::move(s));
  }
  Mat y = (concat * p.wo->value).rowwise() + p.bo->value.row(0);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->scores = std::move(scores);
    cache->concat = std::move(concat);
  }
  return y;
}

Mat attention_backward(const AttentionParams& p, const Mat& dy, AttentionCache& cache) {
  const int dm = static_cast<int>(cache.x.cols());
  const int dh = dm / p.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  p.wo->grad.noalias() += cache.concat.transpose() * dy;
  p.bo->grad.row(0) += dy.colwise().sum();
  const Mat dconcat = dy * p.wo->value.transpose();

  Mat dq = Mat::Zero(cache.q.rows(), cache.q.cols());
  Mat dk = Mat::Zero(cache.k.rows(), cache.k.cols());
  Mat dv = Mat::Zero(cache.v.rows(), cache.v.cols());
  for (int h = 0; h < p.heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    const Mat& s = cache.scores[static_cast<std::size_t>(h)];
    const Mat doh = dconcat.middleCols(c0, dh);
    const Mat vh = cache.v.middleCols(c0, dh);
    const Mat ds = doh * vh.transpose();
    dv.middleCols(c0, dh) = s.transpose() * doh;
    const Mat dz = softmax_rows_backward(s, ds) * scale;
    dq.middleCols(c0, dh) = dz * cache.k.middleCols(c0, dh);
    dk.middleCols(c0, dh) = dz.transpose() * cache.q.middleCols(c0, dh);
  }

  p.wq->grad.noalias() += cache.x.transpose() * dq;
  p.bq->grad.row(0) += dq.colwise().sum();
  p.wk->grad.noalias() += cache.x.transpose() * dk;
  p.bk->grad.row(0) += dk.colwise().sum();
  p.wv->grad.noalias() += cache.x.transpose() * dv;
  p.bv->grad.row(0) += dv.colwise().sum();

  return dq * p.wq->value.transpose() + dk * p.wk->value.transpose() +
         dv * p.wv->value.transpose();
}

// ---- graph convolution -----------------------------------------------------

Mat gcn_normalize(const std::vector<std::int32_t>& adjacency, int n) {
  Mat a_tilde = Mat::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (adjacency[static_cast<std::size_t>(i) * n + j] ||
          adjacency[static_cast<std::size_t>(j) * n + i])
        a_tilde(i, j) = 1.0;  // symmetrized, self-loops from the identity
    }
  }
  Vec deg = a_tilde.rowwise().sum();
  Vec dinv = deg.array().rsqrt();
  return dinv.asDiagonal() * a_tilde * dinv.asDiagonal();
}

Mat gcn_forward(const Mat& norm, const Mat& h, const Param& w, GcnCache* cache) {
  Mat nh = norm * h;
  Mat pre = nh * w.value;
  Mat out = relu(pre);
  if (cache) {
    cache->h_in = h;
    cache->nh = std::move(nh);
    cache->pre = std::move(pre);
  }
  return out;
}

Mat gcn_backward(const Mat& norm, const Mat& dout, Param& w, const GcnCache& cache) {
  const Mat dpre = (cache.pre.array() > 0.0).cast<double>() * dout.array();
  w.grad.noalias() += cache.nh.transpose() * dpre;
  // norm is symmetric, so norm^T = norm; keep the transpose for clarity.
  return norm.transpose() * (dpre * w.value.transpose());
}

// ---- top-K pooling -----------------------------------------------------------

int topk_slots(double ratio, int m) {
  return std::max(1, static_cast<int>(std::ceil(ratio * m)));
}

Vec topk_forward(const TopkParams& p, const Mat& h, const std::vector<bool>& active_mask,
                 TopkCache* cache) {
  const int n = static_cast<int>(h.rows());
  const int dim = static_cast<int>(h.cols());
  const int slots = topk_slots(p.ratio, n);

  std::vector<int> active;
  for (int i = 0; i < n; ++i)
    if (active_mask[static_cast<std::size_t>(i)]) active.push_back(i);

  Mat hidden;
  Vec scores;
  Vec alpha_active;
  if (!active.empty()) {
    Mat ha(static_cast<Eigen::Index>(active.size()), dim);
    for (std::size_t r = 0; r < active.size(); ++r) ha.row(static_cast<Eigen::Index>(r)) = h.row(active[r]);
    hidden = relu(((ha * p.w1->value).rowwise() + p.b1->value.row(0)));
    scores = ((hidden * p.w2->value).rowwise() + p.b2->value.row(0)).col(0);
    // softmax with temperature over active nodes
    const double mx = scores.maxCoeff();
    Eigen::ArrayXd e = ((scores.array() - mx) / p.temperature).exp();
    alpha_active = (e / e.sum()).matrix();
  }

  // Slot fill: alpha descending, ties to the lowest node index.
  std::vector<int> order(active.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (alpha_active[a] != alpha_active[b]) return alpha_active[a] > alpha_active[b];
    return active[static_cast<std::size_t>(a)] < active[static_cast<std::size_t>(b)];
  });

  std::vector<int> chosen(static_cast<std::size_t>(slots), -1);
  Vec out = Vec::Zero(static_cast<Eigen::Index>(slots) * dim);
  Vec alpha_full = Vec::Zero(n);
  for (std::size_t r = 0; r < active.size(); ++r)
    alpha_full[active[r]] = alpha_active[static_cast<Eigen::Index>(r)];
  for (int q = 0; q < slots && q < static_cast<int>(order.size()); ++q) {
    const int local = order[static_cast<std::size_t>(q)];
    const int node = active[static_cast<std::size_t>(local)];
    chosen[static_cast<std::size_t>(q)] = node;
    out.segment(static_cast<Eigen::Index>(q) * dim, dim) =
        alpha_active[local] * h.row(node).transpose();
  }

  if (cache) {
    cache->h = h;
    cache->active = std::move(active);
    cache->hidden = std::move(hidden);
    cache->scores = std::move(scores);
    cache->alpha_active = std::move(alpha_active);
    cache->chosen = std::move(chosen);
    cache->alpha_full = std::move(alpha_full);
  }
  return out;
}

Mat topk_backward(const TopkParams& p, const Vec& dout, const TopkCache& cache) {
  const int n = static_cast<int>(cache.h.rows());
  const int dim = static_cast<int>(cache.h.cols());
  Mat dh = Mat::Zero(n, dim);
  if (cache.active.empty()) return dh;

  const auto n_active = static_cast<Eigen::Index>(cache.active.size());
  Vec dalpha = Vec::Zero(n_active);
  std::vector<int> node_to_local(static_cast<std::size_t>(n), -1);
  for (Eigen::Index r = 0; r < n_active; ++r)
    node_to_local[static_cast<std::size_t>(cache.active[static_cast<std::size_t>(r)])] =
        static_cast<int>(r);

  for (std::size_t q = 0; q < cache.chosen.size(); ++q) {
    const int node = cache.chosen[q];
    if (node < 0) continue;
    const int local = node_to_local[static_cast<std::size_t>(node)];
    const Vec dz = dout.segment(static_cast<Eigen::Index>(q) * dim, dim);
    dh.row(node) += cache.alpha_active[local] * dz.transpose();
    dalpha[local] += dz.dot(cache.h.row(node));
  }

  // Softmax-with-temperature backward over the active set.
  const double dot = cache.alpha_active.dot(dalpha);
  const Vec dscores =
      (cache.alpha_active.array() * (dalpha.array() - dot) / p.temperature).matrix();

  // Scorer backward.
  Mat ha(n_active, dim);
  for (Eigen::Index r = 0; r < n_active; ++r)
    ha.row(r) = cache.h.row(cache.active[static_cast<std::size_t>(r)]);

  p.w2->grad.noalias() += cache.hidden.transpose() * dscores;
  p.b2->grad(0, 0) += dscores.sum();
  Mat dhidden = dscores * p.w2->value.transpose();
  dhidden = (cache.hidden.array() > 0.0).cast<double>() * dhidden.array();
  p.w1->grad.noalias() += ha.transpose() * dhidden;
  p.b1->grad.row(0) += dhidden.colwise().sum();
  const Mat dha = dhidden * p.w1->value.transpose();
  for (Eigen::Index r = 0; r < n_active; ++r)
    dh.row(cache.active[static_cast<std::size_t>(r)]) += dha.row(r);

  return dh;
}

}  // namespace mcvd::nn
