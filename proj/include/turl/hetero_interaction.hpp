#pragma once

#include "turl/nn.hpp"

namespace turl {

/// Paired word-channel and char-channel rows (tokens x width each).
template <typename T>
struct DualChannelState {
  Matrix<T> word;
  Matrix<T> chars;
};

/// Fuse-then-separate parameters for one encoder layer.
///
/// The fused width equals the channel width d. The first d/2 fused channels
/// use window 1, the rest window 3 ("same" zero padding on the token axis).
template <typename T>
struct InteractionParams {
  Linear<T> word_in;   // t' = t W1 + b1
  Linear<T> char_in;   // h' = h W2 + b2
  Linear<T> window1;   // 2d -> d/2
  Linear<T> window3;   // 3 * 2d -> d - d/2, input rows [w(t-1), w(t), w(t+1)]
  Linear<T> word_out;  // W4, b4
  Linear<T> char_out;  // W5, b5
  LayerNorm<T> norm_word;
  LayerNorm<T> norm_char;

  InteractionParams() = default;
  explicit InteractionParams(Index d);

  Index width() const { return word_in.in(); }

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    word_in.visit(join_name(prefix, "word_in"), f);
    char_in.visit(join_name(prefix, "char_in"), f);
    window1.visit(join_name(prefix, "window1"), f);
    window3.visit(join_name(prefix, "window3"), f);
    word_out.visit(join_name(prefix, "word_out"), f);
    char_out.visit(join_name(prefix, "char_out"), f);
    norm_word.visit(join_name(prefix, "norm_word"), f);
    norm_char.visit(join_name(prefix, "norm_char"), f);
  }
};

template <typename T>
struct InteractionCache {
  Index real_rows = 0;
  Matrix<T> t, h;
  Matrix<T> concat;    // [t' | h'] with rows >= real_rows zeroed
  Matrix<T> windows;   // im2col rows for the window-3 filters
  Matrix<T> fused;     // tanh output
  Matrix<T> pre_word, pre_char;  // W4/W5 pre-activations
  Matrix<T> residual_word, residual_char;  // T and H before normalization
  typename LayerNorm<T>::Cache norm_word, norm_char;
};

/// m_fused = tanh(conv([t W1 + b1 | h W2 + b2])). Rows at or beyond
/// `real_rows` act as zero padding for the token-axis convolution.
template <typename T>
Matrix<T> fuse(const DualChannelState<T>& state, const InteractionParams<T>& p, Index real_rows,
               InteractionCache<T>* cache = nullptr);

/// T = LN(t + GELU(m W4 + b4)), H = LN(h + GELU(m W5 + b5)).
template <typename T>
DualChannelState<T> separate(const DualChannelState<T>& state, const Matrix<T>& fused,
                             const InteractionParams<T>& p, InteractionCache<T>* cache = nullptr);

template <typename T>
DualChannelState<T> interact(const DualChannelState<T>& state, const InteractionParams<T>& p,
                             Index real_rows, InteractionCache<T>* cache = nullptr);

/// Returns gradients w.r.t. the input (t, h).
template <typename T>
DualChannelState<T> interact_backward(const DualChannelState<T>& dout,
                                      const InteractionCache<T>& cache,
                                      const InteractionParams<T>& p, InteractionParams<T>& grad);

}  // namespace turl
