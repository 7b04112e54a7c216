#include "turl/pyramid_attention.hpp"

#include <algorithm>
#include <stdexcept>

namespace turl {

namespace {

std::pair<Index, Index> pool_range(Index a, Index size, Index g) {
  Index lo = a * size / g, hi = (a + 1) * size / g;
  if (hi <= lo) {
    lo = std::min(lo, size - 1);
    hi = lo + 1;
  }
  return {lo, hi};
}

}  // namespace

template <typename T>
Volume<T> adaptive_avg_pool(const Volume<T>& q, int g) {
  if (g < 1) throw std::invalid_argument("adaptive_avg_pool: grid size must be >= 1");
  if (q.height < 1 || q.width < 1) throw std::invalid_argument("adaptive_avg_pool: empty input");
  Volume<T> out(q.channels(), g, g);
  for (Index a = 0; a < g; ++a) {
    const auto [y0, y1] = pool_range(a, q.height, g);
    for (Index b = 0; b < g; ++b) {
      const auto [x0, x1] = pool_range(b, q.width, g);
      const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
      for (Index c = 0; c < q.channels(); ++c)
        out.at(c, a, b) = q.plane(c).block(y0, x0, y1 - y0, x1 - x0).sum() * inv;
    }
  }
  return out;
}

template <typename T>
Volume<T> adaptive_avg_pool_backward(const Volume<T>& dpooled, Index height, Index width) {
  const Index g = dpooled.height;
  Volume<T> dq(dpooled.channels(), height, width);
  for (Index a = 0; a < g; ++a) {
    const auto [y0, y1] = pool_range(a, height, g);
    for (Index b = 0; b < g; ++b) {
      const auto [x0, x1] = pool_range(b, width, g);
      const T inv = T(1) / static_cast<T>((y1 - y0) * (x1 - x0));
      for (Index c = 0; c < dpooled.channels(); ++c)
        dq.plane(c).block(y0, x0, y1 - y0, x1 - x0).array() += dpooled.at(c, a, b) * inv;
    }
  }
  return dq;
}

template <typename T>
Matrix<T> spatial_pyramid(const Volume<T>& q) {
  Matrix<T> s(1, pyramid_length(q.channels()));
  Index offset = 0;
  for (int g : kPyramidLevels) {
    const Volume<T> p = adaptive_avg_pool(q, g);
    std::copy(p.data.data(), p.data.data() + p.data.size(), s.data() + offset);
    offset += p.data.size();
  }
  return s;
}

template <typename T>
Volume<T> spatial_pyramid_backward(const Matrix<T>& ds, Index channels, Index height, Index width) {
  if (ds.size() != pyramid_length(channels))
    throw std::invalid_argument("spatial_pyramid_backward: length mismatch");
  Volume<T> dq(channels, height, width);
  Index offset = 0;
  for (int g : kPyramidLevels) {
    Volume<T> dp(channels, g, g);
    std::copy(ds.data() + offset, ds.data() + offset + dp.data.size(), dp.data.data());
    offset += dp.data.size();
    dq.data += adaptive_avg_pool_backward(dp, height, width).data;
  }
  return dq;
}

template <typename T>
SpaParams<T>::SpaParams(Index channels, Index hidden, bool gelu_, bool use_pre_)
    : fc1(pyramid_length(channels), hidden),
      fc2(hidden, channels),
      pre(use_pre_ ? Linear<T>(channels, channels) : Linear<T>()),
      gelu(gelu_),
      use_pre(use_pre_) {}

template <typename T>
void SpaParams<T>::init(Rng& rng) {
  Rng a = rng.fork("fc1"), b = rng.fork("fc2"), c = rng.fork("pre");
  fc1.init(a);
  fc2.init(b);
  if (use_pre) pre.init(c);
}

template <typename T>
SpaParams<T> SpaParams<T>::slice(Index first, Index count) const {
  const Index full = channels();
  SpaParams out;
  out.gelu = gelu;
  out.use_pre = use_pre;
  out.fc1 = Linear<T>(pyramid_length(count), fc1.out());
  out.fc1.b = fc1.b;
  Index src = 0, dst = 0;
  for (int g : kPyramidLevels) {
    const Index cells = static_cast<Index>(g) * g;
    out.fc1.w.middleRows(dst, count * cells) = fc1.w.middleRows(src + first * cells, count * cells);
    src += full * cells;
    dst += count * cells;
  }
  out.fc2.w = fc2.w.middleCols(first, count);
  out.fc2.b = fc2.b.middleCols(first, count);
  if (use_pre) {
    out.pre.w = pre.w.block(first, first, count, count);
    out.pre.b = pre.b.middleCols(first, count);
  }
  return out;
}

template <typename T>
void SpaParams<T>::add_slice(const SpaParams& part, Index first) {
  const Index full = channels(), count = part.channels();
  fc1.b += part.fc1.b;
  Index src = 0, dst = 0;
  for (int g : kPyramidLevels) {
    const Index cells = static_cast<Index>(g) * g;
    fc1.w.middleRows(src + first * cells, count * cells) += part.fc1.w.middleRows(dst, count * cells);
    src += full * cells;
    dst += count * cells;
  }
  fc2.w.middleCols(first, count) += part.fc2.w;
  fc2.b.middleCols(first, count) += part.fc2.b;
  if (use_pre) {
    pre.w.block(first, first, count, count) += part.pre.w;
    pre.b.middleCols(first, count) += part.pre.b;
  }
}

template <typename T>
Matrix<T> attention_weights(const Matrix<T>& s, const SpaParams<T>& p, SpaCache<T>* cache) {
  if (s.cols() != p.fc1.in()) throw std::invalid_argument("attention_weights: width mismatch");
  SpaCache<T> local;
  SpaCache<T>& c = cache ? *cache : local;
  c.s = s;
  c.h = p.fc1.forward(s);
  c.a = p.gelu ? gelu(c.h) : c.h;
  c.zeta = p.fc2.forward(c.a).unaryExpr([](T v) { return sigmoid(v); });
  return c.zeta;
}

template <typename T>
Matrix<T> spa_forward(const Volume<T>& q, const SpaParams<T>& p, SpaCache<T>* cache) {
  if (q.channels() != p.channels()) throw std::invalid_argument("spa_forward: channel mismatch");
  SpaCache<T> local;
  SpaCache<T>& c = cache ? *cache : local;
  c.height = q.height;
  c.width = q.width;
  if (p.use_pre) {
    c.input = q;
    c.pre_out = Volume<T>(q.channels(), q.height, q.width);
    c.pre_out.data.noalias() = p.pre.w.transpose() * q.data;
    c.pre_out.data.colwise() += p.pre.b.row(0).transpose();
    return attention_weights(spatial_pyramid(c.pre_out), p, &c);
  }
  return attention_weights(spatial_pyramid(q), p, &c);
}

template <typename T>
Volume<T> spa_backward(const Matrix<T>& dzeta, const SpaCache<T>& c, const SpaParams<T>& p,
                       SpaParams<T>& grad) {
  const Matrix<T> dz = dzeta.cwiseProduct(c.zeta.unaryExpr([](T z) { return z * (T(1) - z); }));
  Matrix<T> da = p.fc2.backward(c.a, dz, grad.fc2);
  if (p.gelu) da = da.cwiseProduct(gelu_grad(c.h));
  const Matrix<T> ds = p.fc1.backward(c.s, da, grad.fc1);
  Volume<T> dq = spatial_pyramid_backward(ds, p.channels(), c.height, c.width);
  if (!p.use_pre) return dq;
  grad.pre.w.noalias() += c.input.data * dq.data.transpose();
  grad.pre.b += dq.data.rowwise().sum().transpose();
  Volume<T> dq_in(dq.channels(), dq.height, dq.width);
  dq_in.data.noalias() = p.pre.w * dq.data;
  return dq_in;
}

template <typename T>
Volume<T> apply_attention(const Volume<T>& q, const Matrix<T>& zeta) {
  if (zeta.size() != q.channels()) throw std::invalid_argument("apply_attention: length mismatch");
  Volume<T> out = q;
  for (Index c = 0; c < q.channels(); ++c) out.data.row(c) *= zeta(0, c);
  return out;
}

template <typename T>
Volume<T> apply_attention_backward(const Volume<T>& dout, const Volume<T>& q, const Matrix<T>& zeta,
                                   Matrix<T>& dzeta) {
  Volume<T> dq = dout;
  for (Index c = 0; c < q.channels(); ++c) {
    dzeta(0, c) += dout.data.row(c).dot(q.data.row(c));
    dq.data.row(c) *= zeta(0, c);
  }
  return dq;
}

template <typename T>
ClassifierHead<T>::ClassifierHead(Index features, Index classes, double dropout_)
    : out(features, classes), dropout(dropout_) {
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("classifier: dropout must be in [0,1)");
}

template <typename T>
ClassifierHead<T> ClassifierHead<T>::slice(Index first_feature, Index count) const {
  ClassifierHead h;
  h.dropout = dropout;
  h.out.w = out.w.middleRows(first_feature, count);
  h.out.b = out.b;
  return h;
}

template <typename T>
void ClassifierHead<T>::add_slice(const ClassifierHead& part, Index first_feature) {
  out.w.middleRows(first_feature, part.out.in()) += part.out.w;
  out.b += part.out.b;
}

template <typename T>
Matrix<T> classify(const Volume<T>& weighted, const ClassifierHead<T>& head, Dropout drop,
                   HeadCache<T>* cache) {
  const Index C = weighted.channels(), H = weighted.height, W = weighted.width;
  if (C * W != head.out.in()) throw std::invalid_argument("classify: feature width mismatch");
  HeadCache<T> local;
  HeadCache<T>& c = cache ? *cache : local;
  c.channels = C;
  c.height = H;
  c.width = W;
  c.pooled.resize(1, C * W);
  for (Index ch = 0; ch < C; ++ch)
    c.pooled.middleCols(ch * W, W) = weighted.plane(ch).colwise().sum() / static_cast<T>(H);
  if (drop.active()) {
    c.mask = dropout_mask<T>(1, C * W, drop.rate, *drop.rng);
    c.pooled = c.pooled.cwiseProduct(c.mask);
  } else {
    c.mask.resize(0, 0);
  }
  return head.out.forward(c.pooled);
}

template <typename T>
Volume<T> classify_backward(const Matrix<T>& dlogits, const HeadCache<T>& c,
                            const ClassifierHead<T>& head, ClassifierHead<T>& grad) {
  Matrix<T> dp = head.out.backward(c.pooled, dlogits, grad.out);
  if (c.mask.size()) dp = dp.cwiseProduct(c.mask);
  Volume<T> dv(c.channels, c.height, c.width);
  const T inv = T(1) / static_cast<T>(c.height);
  for (Index ch = 0; ch < c.channels; ++ch)
    dv.plane(ch).rowwise() = dp.middleCols(ch * c.width, c.width).row(0) * inv;
  return dv;
}

#define TURL_INSTANTIATE(T)                                                                        \
  template struct SpaParams<T>;                                                                    \
  template struct ClassifierHead<T>;                                                               \
  template Volume<T> adaptive_avg_pool(const Volume<T>&, int);                                     \
  template Volume<T> adaptive_avg_pool_backward(const Volume<T>&, Index, Index);                   \
  template Matrix<T> spatial_pyramid(const Volume<T>&);                                            \
  template Volume<T> spatial_pyramid_backward(const Matrix<T>&, Index, Index, Index);              \
  template Matrix<T> attention_weights(const Matrix<T>&, const SpaParams<T>&, SpaCache<T>*);       \
  template Matrix<T> spa_forward(const Volume<T>&, const SpaParams<T>&, SpaCache<T>*);             \
  template Volume<T> spa_backward(const Matrix<T>&, const SpaCache<T>&, const SpaParams<T>&,       \
                                  SpaParams<T>&);                                                  \
  template Volume<T> apply_attention(const Volume<T>&, const Matrix<T>&);                          \
  template Volume<T> apply_attention_backward(const Volume<T>&, const Volume<T>&,                  \
                                              const Matrix<T>&, Matrix<T>&);                       \
  template Matrix<T> classify(const Volume<T>&, const ClassifierHead<T>&, Dropout, HeadCache<T>*); \
  template Volume<T> classify_backward(const Matrix<T>&, const HeadCache<T>&,                      \
                                       const ClassifierHead<T>&, ClassifierHead<T>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
