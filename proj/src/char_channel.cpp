#include "turl/char_channel.hpp"

#include <stdexcept>

namespace turl {

template <typename T>
GruParams<T>::GruParams(Index hidden, Index input)
    : wz(Matrix<T>::Zero(hidden + input, hidden)),
      wr(Matrix<T>::Zero(hidden + input, hidden)),
      wh(Matrix<T>::Zero(hidden + input, hidden)),
      bz(Matrix<T>::Zero(1, hidden)),
      br(Matrix<T>::Zero(1, hidden)),
      bh(Matrix<T>::Zero(1, hidden)) {}

template <typename T>
void GruParams<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(wz.rows()));
  Rng a = rng.fork("wz"), b = rng.fork("wr"), c = rng.fork("wh");
  init_uniform(wz, bound, a);
  init_uniform(wr, bound, b);
  init_uniform(wh, bound, c);
}

template <typename T>
BiGruParams<T>::BiGruParams(Index hidden, Index input)
    : fwd(hidden, input),
      bwd(hidden, input),
      w(Matrix<T>::Constant(1, hidden, T(0.5))),
      v(Matrix<T>::Constant(1, hidden, T(0.5))),
      b(Matrix<T>::Zero(1, hidden)) {}

template <typename T>
void BiGruParams<T>::init(Rng& rng) {
  Rng f = rng.fork("fwd"), g = rng.fork("bwd");
  fwd.init(f);
  bwd.init(g);
  w.setConstant(T(0.5));
  v.setConstant(T(0.5));
  b.setZero();
}

template <typename T>
CharChannelParams<T>::CharChannelParams(Index char_vocab, Index char_dim, Index hidden)
    : embed(Matrix<T>::Zero(char_vocab, char_dim)), bigru(hidden, char_dim) {}

template <typename T>
void CharChannelParams<T>::init(Rng& rng) {
  Rng e = rng.fork("embed"), g = rng.fork("bigru");
  init_uniform(embed, 1.0 / std::sqrt(static_cast<double>(embed.cols())), e);
  bigru.init(g);
}

namespace {

template <typename T>
void check_gru_shapes(const GruParams<T>& p, Index input) {
  if (p.input() != input) throw std::invalid_argument("gru: input width mismatch");
}

}  // namespace

template <typename T>
Matrix<T> gru_cell(const Matrix<T>& h_prev, const Matrix<T>& x, const GruParams<T>& p) {
  check_gru_shapes(p, x.cols());
  if (h_prev.cols() != p.hidden()) throw std::invalid_argument("gru: hidden width mismatch");
  const Index dh = p.hidden();
  Matrix<T> a(1, dh + x.cols());
  a << h_prev, x;
  const Matrix<T> z = (a * p.wz + p.bz).unaryExpr([](T v) { return sigmoid(v); });
  const Matrix<T> r = (a * p.wr + p.br).unaryExpr([](T v) { return sigmoid(v); });
  Matrix<T> a2(1, dh + x.cols());
  a2 << r.cwiseProduct(h_prev), x;
  const Matrix<T> cand = (a2 * p.wh + p.bh).array().tanh().matrix();
  return ((T(1) - z.array()) * h_prev.array() + z.array() * cand.array()).matrix();
}

template <typename T>
GruTrace<T> gru_sequence(const Matrix<T>& x, const GruParams<T>& p) {
  check_gru_shapes(p, x.cols());
  const Index n = x.rows();
  const Index dh = p.hidden();
  const Index dc = x.cols();
  // input contributions for all steps at once
  Matrix<T> xz = x * p.wz.bottomRows(dc);
  Matrix<T> xr = x * p.wr.bottomRows(dc);
  Matrix<T> xh = x * p.wh.bottomRows(dc);
  xz.rowwise() += p.bz.row(0);
  xr.rowwise() += p.br.row(0);
  xh.rowwise() += p.bh.row(0);
  const auto wz_h = p.wz.topRows(dh);
  const auto wr_h = p.wr.topRows(dh);
  const auto wh_h = p.wh.topRows(dh);

  GruTrace<T> tr;
  tr.h_prev.resize(n, dh);
  tr.z.resize(n, dh);
  tr.r.resize(n, dh);
  tr.candidate.resize(n, dh);
  tr.h.resize(n, dh);
  Matrix<T> h = Matrix<T>::Zero(1, dh);
  for (Index t = 0; t < n; ++t) {
    tr.h_prev.row(t) = h;
    Matrix<T> z = xz.row(t) + h * wz_h;
    Matrix<T> r = xr.row(t) + h * wr_h;
    z = z.unaryExpr([](T v) { return sigmoid(v); });
    r = r.unaryExpr([](T v) { return sigmoid(v); });
    const Matrix<T> rh = r.cwiseProduct(h);
    const Matrix<T> cand = (xh.row(t) + rh * wh_h).array().tanh().matrix();
    h = ((T(1) - z.array()) * h.array() + z.array() * cand.array()).matrix();
    tr.z.row(t) = z;
    tr.r.row(t) = r;
    tr.candidate.row(t) = cand;
    tr.h.row(t) = h;
  }
  return tr;
}

template <typename T>
Matrix<T> gru_sequence_backward(const Matrix<T>& x, const GruTrace<T>& tr, const Matrix<T>& dh_out,
                                const GruParams<T>& p, GruParams<T>& grad) {
  const Index n = x.rows();
  const Index dh = p.hidden();
  const Index dc = x.cols();
  const auto wz_h = p.wz.topRows(dh);
  const auto wr_h = p.wr.topRows(dh);
  const auto wh_h = p.wh.topRows(dh);

  Matrix<T> dpz(n, dh), dpr(n, dh), dph(n, dh);
  Matrix<T> carry = Matrix<T>::Zero(1, dh);
  for (Index t = n - 1; t >= 0; --t) {
    const auto z = tr.z.row(t).array();
    const auto r = tr.r.row(t).array();
    const auto cand = tr.candidate.row(t).array();
    const auto hp = tr.h_prev.row(t).array();
    const Matrix<T> dh = dh_out.row(t) + carry;
    const auto dha = dh.array();

    const Matrix<T> dz = (dha * (cand - hp)).matrix();
    const Matrix<T> dcand = (dha * z).matrix();
    Matrix<T> dhp = (dha * (T(1) - z)).matrix();

    dph.row(t) = (dcand.array() * (T(1) - cand.square())).matrix();
    const Matrix<T> drh = dph.row(t) * wh_h.transpose();
    const Matrix<T> dr = (drh.array() * hp).matrix();
    dhp.array() += drh.array() * r;
    dpr.row(t) = (dr.array() * r * (T(1) - r)).matrix();
    dpz.row(t) = (dz.array() * z * (T(1) - z)).matrix();
    dhp.noalias() += dpz.row(t) * wz_h.transpose();
    dhp.noalias() += dpr.row(t) * wr_h.transpose();
    carry = dhp;
  }

  const Matrix<T> rh = tr.r.cwiseProduct(tr.h_prev);
  grad.wz.topRows(dh).noalias() += tr.h_prev.transpose() * dpz;
  grad.wr.topRows(dh).noalias() += tr.h_prev.transpose() * dpr;
  grad.wh.topRows(dh).noalias() += rh.transpose() * dph;
  grad.wz.bottomRows(dc).noalias() += x.transpose() * dpz;
  grad.wr.bottomRows(dc).noalias() += x.transpose() * dpr;
  grad.wh.bottomRows(dc).noalias() += x.transpose() * dph;
  grad.bz += dpz.colwise().sum();
  grad.br += dpr.colwise().sum();
  grad.bh += dph.colwise().sum();

  Matrix<T> dx = dpz * p.wz.bottomRows(dc).transpose();
  dx.noalias() += dpr * p.wr.bottomRows(dc).transpose();
  dx.noalias() += dph * p.wh.bottomRows(dc).transpose();
  return dx;
}

template <typename T>
Matrix<T> bigru(const Matrix<T>& x, const BiGruParams<T>& p, BiGruCache<T>* cache) {
  if (x.rows() < 1) throw std::invalid_argument("bigru: empty sequence");
  BiGruCache<T> local;
  BiGruCache<T>& c = cache ? *cache : local;
  c.x = x;
  c.x_reversed = x.colwise().reverse();
  c.fwd = gru_sequence(c.x, p.fwd);
  c.bwd = gru_sequence(c.x_reversed, p.bwd);
  const Matrix<T> back = c.bwd.h.colwise().reverse();
  Matrix<T> out = (c.fwd.h.array().rowwise() * p.w.row(0).array() +
                   back.array().rowwise() * p.v.row(0).array())
                      .matrix();
  out.rowwise() += p.b.row(0);
  return out;
}

template <typename T>
Matrix<T> bigru_backward(const Matrix<T>& dout, const BiGruCache<T>& c, const BiGruParams<T>& p,
                         BiGruParams<T>& grad) {
  const Matrix<T> back = c.bwd.h.colwise().reverse();
  grad.w += (dout.array() * c.fwd.h.array()).colwise().sum().matrix();
  grad.v += (dout.array() * back.array()).colwise().sum().matrix();
  grad.b += dout.colwise().sum();
  const Matrix<T> dfwd = dout.array().rowwise() * p.w.row(0).array();
  const Matrix<T> dback = (dout.array().rowwise() * p.v.row(0).array()).matrix().colwise().reverse();
  Matrix<T> dx = gru_sequence_backward(c.x, c.fwd, dfwd, p.fwd, grad.fwd);
  const Matrix<T> dx_rev = gru_sequence_backward(c.x_reversed, c.bwd, dback, p.bwd, grad.bwd);
  dx += dx_rev.colwise().reverse();
  return dx;
}

template <typename T>
Matrix<T> token_char_embedding(const Matrix<T>& hidden,
                               const std::vector<std::pair<int, int>>& bounds) {
  const Index dh = hidden.cols();
  Matrix<T> out(static_cast<Index>(bounds.size()), 2 * dh);
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [first, last] = bounds[i];
    if (first < 0 || last < first || last >= hidden.rows())
      throw std::invalid_argument("token_char_embedding: bad token boundary");
    out.row(static_cast<Index>(i)).head(dh) = hidden.row(first);
    out.row(static_cast<Index>(i)).tail(dh) = hidden.row(last);
  }
  return out;
}

template <typename T>
Matrix<T> token_char_embedding_backward(const Matrix<T>& dout,
                                        const std::vector<std::pair<int, int>>& bounds,
                                        Index total_chars) {
  const Index dh = dout.cols() / 2;
  Matrix<T> dhidden = Matrix<T>::Zero(total_chars, dh);
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    const auto [first, last] = bounds[i];
    dhidden.row(first) += dout.row(static_cast<Index>(i)).head(dh);
    dhidden.row(last) += dout.row(static_cast<Index>(i)).tail(dh);
  }
  return dhidden;
}

template <typename T>
Matrix<T> char_channel_forward(const TokenSequence& seq, const CharChannelParams<T>& p,
                               CharChannelCache<T>* cache) {
  CharChannelCache<T> local;
  CharChannelCache<T>& c = cache ? *cache : local;
  c.flat = flatten_chars(seq);
  const Index n = static_cast<Index>(c.flat.ids.size());
  Matrix<T> emb(n, p.char_dim());
  for (Index i = 0; i < n; ++i) {
    const int id = c.flat.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= p.embed.rows()) throw std::out_of_range("char id out of range");
    emb.row(i) = p.embed.row(id);
  }
  const Matrix<T> hidden = bigru(emb, p.bigru, &c.bigru);
  return token_char_embedding(hidden, c.flat.bounds);
}

template <typename T>
void char_channel_backward(const Matrix<T>& dout, const CharChannelCache<T>& c,
                           const CharChannelParams<T>& p, CharChannelParams<T>& grad) {
  const Index n = static_cast<Index>(c.flat.ids.size());
  const Matrix<T> dhidden = token_char_embedding_backward(dout, c.flat.bounds, n);
  const Matrix<T> demb = bigru_backward(dhidden, c.bigru, p.bigru, grad.bigru);
  for (Index i = 0; i < n; ++i) grad.embed.row(c.flat.ids[static_cast<std::size_t>(i)]) += demb.row(i);
}

#define TURL_INSTANTIATE(T)                                                                      \
  template struct GruParams<T>;                                                                  \
  template struct BiGruParams<T>;                                                                \
  template struct CharChannelParams<T>;                                                          \
  template Matrix<T> gru_cell(const Matrix<T>&, const Matrix<T>&, const GruParams<T>&);          \
  template GruTrace<T> gru_sequence(const Matrix<T>&, const GruParams<T>&);                      \
  template Matrix<T> gru_sequence_backward(const Matrix<T>&, const GruTrace<T>&,                 \
                                           const Matrix<T>&, const GruParams<T>&, GruParams<T>&); \
  template Matrix<T> bigru(const Matrix<T>&, const BiGruParams<T>&, BiGruCache<T>*);             \
  template Matrix<T> bigru_backward(const Matrix<T>&, const BiGruCache<T>&,                      \
                                    const BiGruParams<T>&, BiGruParams<T>&);                     \
  template Matrix<T> token_char_embedding(const Matrix<T>&,                                      \
                                          const std::vector<std::pair<int, int>>&);              \
  template Matrix<T> token_char_embedding_backward(                                              \
      const Matrix<T>&, const std::vector<std::pair<int, int>>&, Index);                         \
  template Matrix<T> char_channel_forward(const TokenSequence&, const CharChannelParams<T>&,      \
                                          CharChannelCache<T>*);                                 \
  template void char_channel_backward(const Matrix<T>&, const CharChannelCache<T>&,              \
                                      const CharChannelParams<T>&, CharChannelParams<T>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
