#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "turl/rng.hpp"

namespace turl {

using Index = Eigen::Index;

/// Row-major dense matrix; row vectors are 1 x n matrices so that every
/// parameter shares one storage type.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct NamedParam {
  std::string name;
  Matrix<T>* value;
};

/// Flattens a parameter struct exposing `visit(prefix, f)` into a list.
template <typename T, typename Params>
std::vector<NamedParam<T>> collect_params(Params& p, const std::string& prefix = "") {
  std::vector<NamedParam<T>> out;
  p.visit(prefix, [&](const std::string& name, Matrix<T>& m) { out.push_back({name, &m}); });
  return out;
}

/// Same-shape zero copy of a parameter struct (gradient buffers).
template <typename Params>
Params zeros_like(const Params& p) {
  Params z = p;
  z.visit("", [](const std::string&, auto& m) { m.setZero(); });
  return z;
}

/// a += b over matching parameter structs.
template <typename T, typename Params>
void accumulate(Params& a, const Params& b) {
  auto pa = collect_params<T>(a);
  auto pb = collect_params<T>(const_cast<Params&>(b));
  for (std::size_t i = 0; i < pa.size(); ++i) *pa[i].value += *pb[i].value;
}

inline std::string join_name(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

template <typename T>
void init_uniform(Matrix<T>& m, double bound, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Exact Gaussian-CDF GELU.
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
Matrix<T> gelu(const Matrix<T>& x) {
  return x.unaryExpr([](T v) { return gelu(v); });
}

template <typename T>
Matrix<T> gelu_grad(const Matrix<T>& x) {
  return x.unaryExpr([](T v) { return gelu_grad(v); });
}

/// Inverted-dropout mask: entries are 0 or 1/(1-p).
template <typename T>
Matrix<T> dropout_mask(Index rows, Index cols, double p, Rng& rng) {
  Matrix<T> m(rows, cols);
  const T keep = static_cast<T>(1.0 / (1.0 - p));
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() < p ? T(0) : keep;
  return m;
}

/// Training-time dropout; inactive when the rate is zero or no stream is set.
struct Dropout {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rate > 0.0 && rng != nullptr; }
};

/// Affine map y = x w + b with w stored (in x out).
template <typename T>
struct Linear {
  Matrix<T> w;
  Matrix<T> b;

  Linear() = default;
  Linear(Index in, Index out) : w(Matrix<T>::Zero(in, out)), b(Matrix<T>::Zero(1, out)) {}

  Index in() const { return w.rows(); }
  Index out() const { return w.cols(); }

  Matrix<T> forward(const Matrix<T>& x) const {
    Matrix<T> y = x * w;
    y.rowwise() += b.row(0);
    return y;
  }

  /// Accumulates into `grad`, returns dL/dx.
  Matrix<T> backward(const Matrix<T>& x, const Matrix<T>& dy, Linear& grad) const {
    grad.w.noalias() += x.transpose() * dy;
    grad.b += dy.colwise().sum();
    return dy * w.transpose();
  }

  void init(Rng& rng) { init_uniform(w, 1.0 / std::sqrt(static_cast<double>(in())), rng); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "w"), w);
    f(join_name(prefix, "b"), b);
  }
};

/// Row-wise layer normalization with affine gamma/beta.
template <typename T>
struct LayerNorm {
  static constexpr double kEps = 1e-5;

  Matrix<T> gamma;
  Matrix<T> beta;

  struct Cache {
    Matrix<T> xhat;
    Matrix<T> rstd;  // rows x 1
  };

  LayerNorm() = default;
  explicit LayerNorm(Index d) : gamma(Matrix<T>::Ones(1, d)), beta(Matrix<T>::Zero(1, d)) {}

  Matrix<T> forward(const Matrix<T>& x, Cache& cache) const;
  Matrix<T> backward(const Matrix<T>& dy, const Cache& cache, LayerNorm& grad) const;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "gamma"), gamma);
    f(join_name(prefix, "beta"), beta);
  }
};

/// C x H x W feature stored channel-major: row c holds plane c row-major.
template <typename T>
struct Volume {
  Matrix<T> data;
  Index height = 0;
  Index width = 0;

  Volume() = default;
  Volume(Index channels, Index h, Index w)
      : data(Matrix<T>::Zero(channels, h * w)), height(h), width(w) {}

  Index channels() const { return data.rows(); }

  T& at(Index c, Index y, Index x) { return data(c, y * width + x); }
  T at(Index c, Index y, Index x) const { return data(c, y * width + x); }

  Eigen::Map<Matrix<T>> plane(Index c) { return {data.row(c).data(), height, width}; }
  Eigen::Map<const Matrix<T>> plane(Index c) const { return {data.row(c).data(), height, width}; }

  bool same_shape(const Volume& o) const {
    return channels() == o.channels() && height == o.height && width == o.width;
  }
};

/// Softmax over the first `cols` entries of each row; remaining entries are 0.
template <typename T>
void softmax_rows_prefix(Matrix<T>& s, Index cols);

}  // namespace turl
