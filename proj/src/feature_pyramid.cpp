#include "turl/feature_pyramid.hpp"

#include <stdexcept>

namespace turl {

template <typename T>
Matrix<T> fuse_layer(const Matrix<T>& word, const Matrix<T>& chars, const FuseKernel<T>& kernel) {
  if (word.rows() != chars.rows() || word.cols() != chars.cols() || 2 * word.cols() != kernel.proj.in())
    throw std::invalid_argument("fuse_layer: shape mismatch");
  Matrix<T> y = word * kernel.proj.w.topRows(word.cols());
  y.noalias() += chars * kernel.proj.w.bottomRows(chars.cols());
  y.rowwise() += kernel.proj.b.row(0);
  return y;
}

template <typename T>
DualChannelState<T> fuse_layer_backward(const Matrix<T>& dy, const Matrix<T>& word,
                                        const Matrix<T>& chars, const FuseKernel<T>& kernel,
                                        FuseKernel<T>& grad) {
  const Index d = word.cols();
  grad.proj.w.topRows(d).noalias() += word.transpose() * dy;
  grad.proj.w.bottomRows(d).noalias() += chars.transpose() * dy;
  grad.proj.b += dy.colwise().sum();
  return {dy * kernel.proj.w.topRows(d).transpose(), dy * kernel.proj.w.bottomRows(d).transpose()};
}

template <typename T>
Volume<T> StackedFeature<T>::sample(Index b) const {
  Volume<T> v(layers, seq, width);
  const auto begin = data.begin() + static_cast<std::ptrdiff_t>(offset(b, 0, 0, 0));
  std::copy(begin, begin + layers * seq * width, v.data.data());
  return v;
}

template <typename T>
StackedFeature<T> stack_and_permute(const std::vector<std::vector<Matrix<T>>>& fused) {
  StackedFeature<T> out;
  if (fused.empty() || fused.front().empty()) return out;
  const Index layers = static_cast<Index>(fused.size());
  const Index batch = static_cast<Index>(fused.front().size());
  const Index seq = fused.front().front().rows();
  const Index width = fused.front().front().cols();
  for (const auto& layer : fused) {
    if (static_cast<Index>(layer.size()) != batch)
      throw std::invalid_argument("stack_and_permute: inconsistent batch size across layers");
    for (const auto& y : layer)
      if (y.rows() != seq || y.cols() != width)
        throw std::invalid_argument("stack_and_permute: inconsistent layer shapes");
  }

  // stacked (L, H, W, C), then permuted to (H, L, W, C)
  out.batch = batch;
  out.layers = layers;
  out.seq = seq;
  out.width = width;
  out.data.resize(static_cast<std::size_t>(batch * layers * seq * width));
  for (Index l = 0; l < layers; ++l)
    for (Index b = 0; b < batch; ++b) {
      const auto& y = fused[static_cast<std::size_t>(l)][static_cast<std::size_t>(b)];
      std::copy(y.data(), y.data() + y.size(), out.data.begin() + static_cast<std::ptrdiff_t>(out.offset(b, l, 0, 0)));
    }
  return out;
}

template <typename T>
Volume<T> stack_layers(const std::vector<Matrix<T>>& fused) {
  if (fused.empty()) throw std::invalid_argument("stack_layers: no layers");
  Volume<T> v(static_cast<Index>(fused.size()), fused.front().rows(), fused.front().cols());
  for (std::size_t l = 0; l < fused.size(); ++l) {
    if (fused[l].rows() != v.height || fused[l].cols() != v.width)
      throw std::invalid_argument("stack_layers: inconsistent layer shapes");
    v.data.row(static_cast<Index>(l)) = Eigen::Map<const Matrix<T>>(fused[l].data(), 1, fused[l].size());
  }
  return v;
}

template <typename T>
LayerOutputs<T> select_layers(const LayerOutputs<T>& outputs, int count) {
  if (count < 1 || count > static_cast<int>(outputs.size()))
    throw std::out_of_range("select_layers: count must be in [1, " + std::to_string(outputs.size()) + "]");
  return LayerOutputs<T>(outputs.end() - count, outputs.end());
}

#define TURL_INSTANTIATE(T)                                                                     \
  template struct StackedFeature<T>;                                                            \
  template Matrix<T> fuse_layer(const Matrix<T>&, const Matrix<T>&, const FuseKernel<T>&);      \
  template DualChannelState<T> fuse_layer_backward(const Matrix<T>&, const Matrix<T>&,          \
                                                   const Matrix<T>&, const FuseKernel<T>&,      \
                                                   FuseKernel<T>&);                             \
  template StackedFeature<T> stack_and_permute(const std::vector<std::vector<Matrix<T>>>&);     \
  template Volume<T> stack_layers(const std::vector<Matrix<T>>&);                               \
  template LayerOutputs<T> select_layers(const LayerOutputs<T>&, int);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
