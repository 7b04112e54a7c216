#pragma once

#include <vector>

#include "turl/encoder.hpp"
#include "turl/nn.hpp"

namespace turl {

/// Kernel-size-1 convolution over the width axis: [k | u] (2d) -> d.
template <typename T>
struct FuseKernel {
  Linear<T> proj;

  FuseKernel() = default;
  explicit FuseKernel(Index d) : proj(2 * d, d) {}

  Index width() const { return proj.out(); }
  void init(Rng& rng) { proj.init(rng); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    proj.visit(prefix, f);
  }
};

template <typename T>
Matrix<T> fuse_layer(const Matrix<T>& word, const Matrix<T>& chars, const FuseKernel<T>& kernel);

/// Returns d(word), d(chars).
template <typename T>
DualChannelState<T> fuse_layer_backward(const Matrix<T>& dy, const Matrix<T>& word,
                                        const Matrix<T>& chars, const FuseKernel<T>& kernel,
                                        FuseKernel<T>& grad);

/// Rank-4 (batch, layers, sequence, width) feature, row-major.
template <typename T>
struct StackedFeature {
  Index batch = 0, layers = 0, seq = 0, width = 0;
  std::vector<T> data;

  T& at(Index b, Index l, Index w, Index c) { return data[offset(b, l, w, c)]; }
  T at(Index b, Index l, Index w, Index c) const { return data[offset(b, l, w, c)]; }

  std::size_t offset(Index b, Index l, Index w, Index c) const {
    return static_cast<std::size_t>(((b * layers + l) * seq + w) * width + c);
  }

  /// Sample b as a (layers, seq, width) volume.
  Volume<T> sample(Index b) const;
};

/// `fused[l][b]` is Y_l for sample b. Stacks to (L, H, W, d) and swaps the
/// first two axes to give (H, L, W, d).
template <typename T>
StackedFeature<T> stack_and_permute(const std::vector<std::vector<Matrix<T>>>& fused);

/// One sample's stacked layers as a channels-first volume.
template <typename T>
Volume<T> stack_layers(const std::vector<Matrix<T>>& fused);

/// Keeps the last `count` layers in order.
template <typename T>
LayerOutputs<T> select_layers(const LayerOutputs<T>& outputs, int count);

}  // namespace turl
