#include "turl/nn.hpp"

namespace turl {

template <typename T>
Matrix<T> LayerNorm<T>::forward(const Matrix<T>& x, Cache& cache) const {
  const Index d = x.cols();
  cache.xhat.resize(x.rows(), d);
  cache.rstd.resize(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().sum() / T(d);
    const T rstd = T(1) / std::sqrt(var + T(kEps));
    cache.rstd(i, 0) = rstd;
    cache.xhat.row(i) = (x.row(i).array() - mean) * rstd;
  }
  Matrix<T> y = cache.xhat.array().rowwise() * gamma.row(0).array();
  y.rowwise() += beta.row(0);
  return y;
}

template <typename T>
Matrix<T> LayerNorm<T>::backward(const Matrix<T>& dy, const Cache& cache, LayerNorm& grad) const {
  grad.gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  grad.beta += dy.colwise().sum();
  Matrix<T> dxhat = dy.array().rowwise() * gamma.row(0).array();
  Matrix<T> dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const T m1 = dxhat.row(i).mean();
    const T m2 = (dxhat.row(i).array() * cache.xhat.row(i).array()).mean();
    dx.row(i) = cache.rstd(i, 0) *
                (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename T>
void softmax_rows_prefix(Matrix<T>& s, Index cols) {
  for (Index i = 0; i < s.rows(); ++i) {
    auto head = s.row(i).head(cols);
    const T mx = head.maxCoeff();
    head = (head.array() - mx).exp();
    head /= head.sum();
    if (cols < s.cols()) s.row(i).tail(s.cols() - cols).setZero();
  }
}

template struct LayerNorm<float>;
template struct LayerNorm<double>;
template void softmax_rows_prefix<float>(Matrix<float>&, Index);
template void softmax_rows_prefix<double>(Matrix<double>&, Index);

}  // namespace turl
