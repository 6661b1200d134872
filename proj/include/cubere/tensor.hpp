#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cubere/error.hpp"

namespace cubere {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// A trainable tensor with its gradient accumulator. `depth` counts encoder
// layers below the scoring head (0 for head parameters) and drives
// layer-wise learning-rate decay; `decay` excludes biases and norms from
// weight decay.
template <typename T>
struct Parameter {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
  int depth = 0;
  bool decay = true;

  Parameter() = default;
  Parameter(std::string name_, Eigen::Index rows, Eigen::Index cols, bool decay_ = true)
      : name(std::move(name_)), value(Mat<T>::Zero(rows, cols)), grad(Mat<T>::Zero(rows, cols)), decay(decay_) {}

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
void xavier_uniform(Mat<T>& m, std::mt19937_64& rng, double fan_in, double fan_out) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

template <typename T>
void uniform_init(Mat<T>& m, std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
}

// Row-wise softmax, shifted by the row max.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

template <typename T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

// Index of the largest entry in [begin, end) of a row; ties go to the lower
// index.
template <typename Row>
int argmax_range(const Row& row, int begin, int end) {
  int best = begin;
  for (int c = begin + 1; c < end; ++c)
    if (row(c) > row(best)) best = c;
  return best;
}

}  // namespace cubere
