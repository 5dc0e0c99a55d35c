#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

namespace mcvd::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Deterministic RNG used for init, dropout and shuffling. uniform() derives
/// doubles from the top 53 bits so streams are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 gen_;
};

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
};

/// Flat registry of named parameters and buffers. Owns storage with stable
/// addresses; the optimizer walks trainable entries, checkpoints walk all.
class ParamStore {
 public:
  Param* add(const std::string& name, int rows, int cols, bool trainable = true) {
    params_.push_back(Param{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols), trainable});
    return &params_.back();
  }

  void zero_grad() {
    for (Param& p : params_) p.grad.setZero();
  }

  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }

  Param* find(const std::string& name) {
    for (Param& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const Param& p : params_)
      if (p.trainable) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  /// Deep copy of all values (snapshot for early stopping).
  std::vector<Mat> snapshot() const {
    std::vector<Mat> out;
    out.reserve(params_.size());
    for (const Param& p : params_) out.push_back(p.value);
    return out;
  }
  void restore(const std::vector<Mat>& snap) {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].value = snap[i];
  }

 private:
  std::deque<Param> params_;
};

inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace mcvd::nn
