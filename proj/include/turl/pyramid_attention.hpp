#pragma once

#include <array>

#include "turl/nn.hpp"

namespace turl {

inline constexpr std::array<int, 3> kPyramidLevels = {4, 2, 1};

/// Length of the pyramid vector for C channels (16 + 4 + 1 cells each).
inline Index pyramid_length(Index channels) { return channels * 21; }

/// Cell (a, b) averages rows [floor(aH/g), floor((a+1)H/g)) and the same for
/// columns. An empty range (input smaller than g) falls back to one row/column.
template <typename T>
Volume<T> adaptive_avg_pool(const Volume<T>& q, int g);

template <typename T>
Volume<T> adaptive_avg_pool_backward(const Volume<T>& dpooled, Index height, Index width);

/// Pools at 4, 2, 1 and concatenates the channel-major flattenings: 1 x 21C.
template <typename T>
Matrix<T> spatial_pyramid(const Volume<T>& q);

template <typename T>
Volume<T> spatial_pyramid_backward(const Matrix<T>& ds, Index channels, Index height, Index width);

template <typename T>
struct SpaParams {
  Linear<T> fc1;  // 21C -> hidden
  Linear<T> fc2;  // hidden -> C
  Linear<T> pre;  // optional 1x1 channel mix before pooling
  bool gelu = true;
  bool use_pre = false;

  SpaParams() = default;
  SpaParams(Index channels, Index hidden, bool gelu = true, bool use_pre = false);

  Index channels() const { return fc2.out(); }
  void init(Rng& rng);
  /// Restricts to channels [first, first + count); the hidden width is kept.
  SpaParams slice(Index first, Index count) const;
  void add_slice(const SpaParams& part, Index first);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    if (use_pre) pre.visit(join_name(prefix, "pre"), f);
    fc1.visit(join_name(prefix, "fc1"), f);
    fc2.visit(join_name(prefix, "fc2"), f);
  }
};

template <typename T>
struct SpaCache {
  Volume<T> input;  // kept only with the pre-mix
  Volume<T> pre_out;
  Matrix<T> s, h, a, zeta;
  Index height = 0, width = 0;
};

/// sigmoid(fc2(act(fc1(S)))), 1 x C.
template <typename T>
Matrix<T> attention_weights(const Matrix<T>& s, const SpaParams<T>& p, SpaCache<T>* cache = nullptr);

/// Pyramid statistics of Q (after the optional pre-mix) through the MLP.
template <typename T>
Matrix<T> spa_forward(const Volume<T>& q, const SpaParams<T>& p, SpaCache<T>* cache = nullptr);

/// Gradient w.r.t. Q through the attention branch only.
template <typename T>
Volume<T> spa_backward(const Matrix<T>& dzeta, const SpaCache<T>& cache, const SpaParams<T>& p,
                       SpaParams<T>& grad);

template <typename T>
Volume<T> apply_attention(const Volume<T>& q, const Matrix<T>& zeta);

/// Returns dQ; adds the channel sums into dzeta (1 x C).
template <typename T>
Volume<T> apply_attention_backward(const Volume<T>& dout, const Volume<T>& q, const Matrix<T>& zeta,
                                   Matrix<T>& dzeta);

template <typename T>
struct ClassifierHead {
  Linear<T> out;  // C*width -> classes
  double dropout = 0.1;

  ClassifierHead() = default;
  ClassifierHead(Index features, Index classes, double dropout = 0.1);

  void init(Rng& rng) { out.init(rng); }
  ClassifierHead slice(Index first_feature, Index count) const;
  void add_slice(const ClassifierHead& part, Index first_feature);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    out.visit(prefix, f);
  }
};

template <typename T>
struct HeadCache {
  Matrix<T> pooled;  // 1 x C*width after dropout
  Matrix<T> mask;
  Index channels = 0, height = 0, width = 0;
};

/// Mean over the sequence axis, flatten, dropout, affine.
template <typename T>
Matrix<T> classify(const Volume<T>& weighted, const ClassifierHead<T>& head, Dropout drop = {},
                   HeadCache<T>* cache = nullptr);

template <typename T>
Volume<T> classify_backward(const Matrix<T>& dlogits, const HeadCache<T>& cache,
                            const ClassifierHead<T>& head, ClassifierHead<T>& grad);

}  // namespace turl
