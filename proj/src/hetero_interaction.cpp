#include "turl/hetero_interaction.hpp"

#include <algorithm>
#include <stdexcept>

namespace turl {

template <typename T>
InteractionParams<T>::InteractionParams(Index d)
    : word_in(d, d),
      char_in(d, d),
      window1(2 * d, d / 2),
      window3(3 * 2 * d, d - d / 2),
      word_out(d, d),
      char_out(d, d),
      norm_word(d),
      norm_char(d) {}

template <typename T>
void InteractionParams<T>::init(Rng& rng) {
  Rng a = rng.fork("word_in"), b = rng.fork("char_in"), c = rng.fork("window1"),
      e = rng.fork("window3"), g = rng.fork("word_out"), h = rng.fork("char_out");
  word_in.init(a);
  char_in.init(b);
  window1.init(c);
  window3.init(e);
  word_out.init(g);
  char_out.init(h);
}

template <typename T>
Matrix<T> fuse(const DualChannelState<T>& state, const InteractionParams<T>& p, Index real_rows,
               InteractionCache<T>* cache) {
  const Index d = p.width();
  if (state.word.cols() != d || state.chars.cols() != d || state.word.rows() != state.chars.rows())
    throw std::invalid_argument("fuse: channel shape mismatch");
  const Index rows = state.word.rows();
  real_rows = std::clamp<Index>(real_rows, 0, rows);

  InteractionCache<T> local;
  InteractionCache<T>& c = cache ? *cache : local;
  c.real_rows = real_rows;
  c.t = state.word;
  c.h = state.chars;
  c.concat.resize(rows, 2 * d);
  c.concat.leftCols(d) = p.word_in.forward(state.word);
  c.concat.rightCols(d) = p.char_in.forward(state.chars);
  c.concat.bottomRows(rows - real_rows).setZero();

  c.windows = Matrix<T>::Zero(rows, 6 * d);
  for (Index t = 0; t < rows; ++t)
    for (Index k = 0; k < 3; ++k) {
      const Index src = t + k - 1;
      if (src >= 0 && src < real_rows) c.windows.row(t).segment(k * 2 * d, 2 * d) = c.concat.row(src);
    }

  Matrix<T> pre(rows, d);
  pre.leftCols(p.window1.out()) = p.window1.forward(c.concat);
  pre.rightCols(p.window3.out()) = p.window3.forward(c.windows);
  c.fused = pre.array().tanh().matrix();
  return c.fused;
}

template <typename T>
DualChannelState<T> separate(const DualChannelState<T>& state, const Matrix<T>& fused,
                             const InteractionParams<T>& p, InteractionCache<T>* cache) {
  if (fused.rows() != state.word.rows() || fused.cols() != p.width())
    throw std::invalid_argument("separate: fused shape mismatch");
  InteractionCache<T> local;
  InteractionCache<T>& c = cache ? *cache : local;
  c.pre_word = p.word_out.forward(fused);
  c.pre_char = p.char_out.forward(fused);
  c.residual_word = state.word + gelu(c.pre_word);
  c.residual_char = state.chars + gelu(c.pre_char);
  return {p.norm_word.forward(c.residual_word, c.norm_word),
          p.norm_char.forward(c.residual_char, c.norm_char)};
}

template <typename T>
DualChannelState<T> interact(const DualChannelState<T>& state, const InteractionParams<T>& p,
                             Index real_rows, InteractionCache<T>* cache) {
  InteractionCache<T> local;
  InteractionCache<T>& c = cache ? *cache : local;
  const Matrix<T> fused = fuse(state, p, real_rows, &c);
  return separate(state, fused, p, &c);
}

template <typename T>
DualChannelState<T> interact_backward(const DualChannelState<T>& dout, const InteractionCache<T>& c,
                                      const InteractionParams<T>& p, InteractionParams<T>& grad) {
  const Index d = p.width();
  const Index rows = c.t.rows();

  DualChannelState<T> din;
  din.word = p.norm_word.backward(dout.word, c.norm_word, grad.norm_word);
  din.chars = p.norm_char.backward(dout.chars, c.norm_char, grad.norm_char);

  const Matrix<T> dpre_word = din.word.cwiseProduct(gelu_grad(c.pre_word));
  const Matrix<T> dpre_char = din.chars.cwiseProduct(gelu_grad(c.pre_char));
  Matrix<T> dfused = p.word_out.backward(c.fused, dpre_word, grad.word_out);
  dfused += p.char_out.backward(c.fused, dpre_char, grad.char_out);

  const Matrix<T> dpre = dfused.cwiseProduct((T(1) - c.fused.array().square()).matrix());
  Matrix<T> dconcat =
      p.window1.backward(c.concat, dpre.leftCols(p.window1.out()), grad.window1);
  const Matrix<T> dwindows =
      p.window3.backward(c.windows, dpre.rightCols(p.window3.out()), grad.window3);
  for (Index t = 0; t < rows; ++t)
    for (Index k = 0; k < 3; ++k) {
      const Index src = t + k - 1;
      if (src >= 0 && src < c.real_rows) dconcat.row(src) += dwindows.row(t).segment(k * 2 * d, 2 * d);
    }
  dconcat.bottomRows(rows - c.real_rows).setZero();

  din.word += p.word_in.backward(c.t, dconcat.leftCols(d), grad.word_in);
  din.chars += p.char_in.backward(c.h, dconcat.rightCols(d), grad.char_in);
  return din;
}

#define TURL_INSTANTIATE(T)                                                                   \
  template struct InteractionParams<T>;                                                       \
  template Matrix<T> fuse(const DualChannelState<T>&, const InteractionParams<T>&, Index,     \
                          InteractionCache<T>*);                                              \
  template DualChannelState<T> separate(const DualChannelState<T>&, const Matrix<T>&,         \
                                        const InteractionParams<T>&, InteractionCache<T>*);   \
  template DualChannelState<T> interact(const DualChannelState<T>&,                           \
                                        const InteractionParams<T>&, Index,                   \
                                        InteractionCache<T>*);                                \
  template DualChannelState<T> interact_backward(const DualChannelState<T>&,                  \
                                                 const InteractionCache<T>&,                  \
                                                 const InteractionParams<T>&,                 \
                                                 InteractionParams<T>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
