#pragma once

#include <vector>

#include "turl/nn.hpp"

namespace turl {

/// Depthwise 3x3 (dilated) convolution per channel, then a 1x1 channel mix.
/// Zero "same" padding of `rate` cells per side keeps the spatial shape.
template <typename T>
struct DsConvParams {
  Matrix<T> depthwise;    // C x 9, kernel taps row-major
  Matrix<T> depthwise_b;  // 1 x C
  Matrix<T> pointwise;    // C_in x C_out
  Matrix<T> pointwise_b;  // 1 x C
  int rate = 1;

  DsConvParams() = default;
  DsConvParams(Index channels, int rate);

  Index channels() const { return depthwise.rows(); }
  void init(Rng& rng);
  /// Channels [first, first + count) as a standalone kernel.
  DsConvParams slice(Index first, Index count) const;
  void add_slice(const DsConvParams& part, Index first);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "depthwise"), depthwise);
    f(join_name(prefix, "depthwise_b"), depthwise_b);
    f(join_name(prefix, "pointwise"), pointwise);
    f(join_name(prefix, "pointwise_b"), pointwise_b);
  }
};

/// Per-channel dilated 3x3 convolution with bias (the depthwise stage alone).
template <typename T>
Volume<T> depthwise_conv(const Volume<T>& in, const Matrix<T>& kernel, const Matrix<T>& bias,
                         int rate);

template <typename T>
struct DsConvCache {
  Volume<T> input;
  Volume<T> depth;
};

template <typename T>
Volume<T> dsconv(const Volume<T>& in, const DsConvParams<T>& p, DsConvCache<T>* cache = nullptr);

template <typename T>
Volume<T> dsconv_backward(const Volume<T>& dout, const DsConvCache<T>& cache,
                          const DsConvParams<T>& p, DsConvParams<T>& grad);

inline const std::vector<int> kDefaultDilationRates = {1, 2, 4, 8};

/// Common DSConv K0, one dilated DSConv per rate applied to its output,
/// element-wise sum (optionally including F0) and a 1x1 fuse with residual:
/// Q = K_fuse(F) + M.
template <typename T>
struct MultiScaleParams {
  DsConvParams<T> common;
  std::vector<DsConvParams<T>> branches;
  Matrix<T> fuse;    // C_in x C_out
  Matrix<T> fuse_b;  // 1 x C
  bool include_common = true;

  MultiScaleParams() = default;
  MultiScaleParams(Index channels, const std::vector<int>& rates = kDefaultDilationRates,
                   bool include_common = true);

  Index channels() const { return common.channels(); }
  void init(Rng& rng);
  MultiScaleParams slice(Index first, Index count) const;
  void add_slice(const MultiScaleParams& part, Index first);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    common.visit(join_name(prefix, "k0"), f);
    for (std::size_t i = 0; i < branches.size(); ++i)
      branches[i].visit(join_name(prefix, "branch" + std::to_string(i)), f);
    f(join_name(prefix, "fuse.w"), fuse);
    f(join_name(prefix, "fuse.b"), fuse_b);
  }
};

template <typename T>
struct MultiScaleCache {
  DsConvCache<T> common;
  std::vector<DsConvCache<T>> branches;
  Volume<T> sum;
};

template <typename T>
Volume<T> multiscale_forward(const Volume<T>& m, const MultiScaleParams<T>& p,
                             MultiScaleCache<T>* cache = nullptr);

template <typename T>
Volume<T> multiscale_backward(const Volume<T>& dq, const MultiScaleCache<T>& cache,
                              const MultiScaleParams<T>& p, MultiScaleParams<T>& grad);

}  // namespace turl
