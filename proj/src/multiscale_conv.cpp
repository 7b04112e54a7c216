#include "turl/multiscale_conv.hpp"

#include <algorithm>
#include <stdexcept>

namespace turl {

template <typename T>
DsConvParams<T>::DsConvParams(Index channels, int rate_)
    : depthwise(Matrix<T>::Zero(channels, 9)),
      depthwise_b(Matrix<T>::Zero(1, channels)),
      pointwise(Matrix<T>::Zero(channels, channels)),
      pointwise_b(Matrix<T>::Zero(1, channels)),
      rate(rate_) {
  if (rate < 1) throw std::invalid_argument("dsconv: dilation rate must be >= 1");
}

template <typename T>
void DsConvParams<T>::init(Rng& rng) {
  Rng a = rng.fork("depthwise"), b = rng.fork("pointwise");
  init_uniform(depthwise, 1.0 / 3.0, a);
  init_uniform(pointwise, 1.0 / std::sqrt(static_cast<double>(channels())), b);
}

template <typename T>
DsConvParams<T> DsConvParams<T>::slice(Index first, Index count) const {
  DsConvParams out;
  out.rate = rate;
  out.depthwise = depthwise.middleRows(first, count);
  out.depthwise_b = depthwise_b.middleCols(first, count);
  out.pointwise = pointwise.block(first, first, count, count);
  out.pointwise_b = pointwise_b.middleCols(first, count);
  return out;
}

template <typename T>
void DsConvParams<T>::add_slice(const DsConvParams& part, Index first) {
  const Index count = part.channels();
  depthwise.middleRows(first, count) += part.depthwise;
  depthwise_b.middleCols(first, count) += part.depthwise_b;
  pointwise.block(first, first, count, count) += part.pointwise;
  pointwise_b.middleCols(first, count) += part.pointwise_b;
}

namespace {

/// Valid output range [lo, hi) along one axis for tap offset `off`.
std::pair<Index, Index> tap_range(Index size, Index off) {
  return {std::max<Index>(0, -off), std::min<Index>(size, size - off)};
}

}  // namespace

template <typename T>
Volume<T> depthwise_conv(const Volume<T>& in, const Matrix<T>& kernel, const Matrix<T>& bias,
                         int rate) {
  if (kernel.rows() != in.channels() || kernel.cols() != 9 || bias.cols() != in.channels())
    throw std::invalid_argument("depthwise_conv: kernel shape mismatch");
  Volume<T> out(in.channels(), in.height, in.width);
  for (Index c = 0; c < in.channels(); ++c) {
    auto dst = out.plane(c);
    const auto src = in.plane(c);
    dst.setConstant(bias(0, c));
    for (Index ki = 0; ki < 3; ++ki)
      for (Index kj = 0; kj < 3; ++kj) {
        const T w = kernel(c, ki * 3 + kj);
        if (w == T(0)) continue;
        const Index dy = (ki - 1) * rate, dx = (kj - 1) * rate;
        const auto [y0, y1] = tap_range(in.height, dy);
        const auto [x0, x1] = tap_range(in.width, dx);
        if (y1 <= y0 || x1 <= x0) continue;
        dst.block(y0, x0, y1 - y0, x1 - x0) += w * src.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0);
      }
  }
  return out;
}

template <typename T>
Volume<T> dsconv(const Volume<T>& in, const DsConvParams<T>& p, DsConvCache<T>* cache) {
  if (in.channels() != p.channels()) throw std::invalid_argument("dsconv: channel count mismatch");
  DsConvCache<T> local;
  DsConvCache<T>& c = cache ? *cache : local;
  c.input = in;
  c.depth = depthwise_conv(in, p.depthwise, p.depthwise_b, p.rate);
  Volume<T> out(in.channels(), in.height, in.width);
  out.data.noalias() = p.pointwise.transpose() * c.depth.data;
  out.data.colwise() += p.pointwise_b.row(0).transpose();
  return out;
}

template <typename T>
Volume<T> dsconv_backward(const Volume<T>& dout, const DsConvCache<T>& c, const DsConvParams<T>& p,
                          DsConvParams<T>& grad) {
  grad.pointwise.noalias() += c.depth.data * dout.data.transpose();
  grad.pointwise_b += dout.data.rowwise().sum().transpose();
  Volume<T> ddepth(dout.channels(), dout.height, dout.width);
  ddepth.data.noalias() = p.pointwise * dout.data;

  const auto& in = c.input;
  Volume<T> din(in.channels(), in.height, in.width);
  for (Index ch = 0; ch < in.channels(); ++ch) {
    const auto g = ddepth.plane(ch);
    const auto src = in.plane(ch);
    auto dsrc = din.plane(ch);
    grad.depthwise_b(0, ch) += g.sum();
    for (Index ki = 0; ki < 3; ++ki)
      for (Index kj = 0; kj < 3; ++kj) {
        const Index dy = (ki - 1) * p.rate, dx = (kj - 1) * p.rate;
        const auto [y0, y1] = tap_range(in.height, dy);
        const auto [x0, x1] = tap_range(in.width, dx);
        if (y1 <= y0 || x1 <= x0) continue;
        const auto gb = g.block(y0, x0, y1 - y0, x1 - x0);
        grad.depthwise(ch, ki * 3 + kj) +=
            gb.cwiseProduct(src.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0)).sum();
        dsrc.block(y0 + dy, x0 + dx, y1 - y0, x1 - x0) += p.depthwise(ch, ki * 3 + kj) * gb;
      }
  }
  return din;
}

template <typename T>
MultiScaleParams<T>::MultiScaleParams(Index channels, const std::vector<int>& rates, bool include)
    : common(channels, 1),
      fuse(Matrix<T>::Zero(channels, channels)),
      fuse_b(Matrix<T>::Zero(1, channels)),
      include_common(include) {
  for (int r : rates) branches.emplace_back(channels, r);
}

template <typename T>
void MultiScaleParams<T>::init(Rng& rng) {
  Rng a = rng.fork("k0");
  common.init(a);
  for (std::size_t i = 0; i < branches.size(); ++i) {
    Rng b = rng.fork("branch", i);
    branches[i].init(b);
  }
  Rng f = rng.fork("fuse");
  init_uniform(fuse, 1.0 / std::sqrt(static_cast<double>(channels())), f);
}

template <typename T>
MultiScaleParams<T> MultiScaleParams<T>::slice(Index first, Index count) const {
  MultiScaleParams out;
  out.include_common = include_common;
  out.common = common.slice(first, count);
  for (const auto& b : branches) out.branches.push_back(b.slice(first, count));
  out.fuse = fuse.block(first, first, count, count);
  out.fuse_b = fuse_b.middleCols(first, count);
  return out;
}

template <typename T>
void MultiScaleParams<T>::add_slice(const MultiScaleParams& part, Index first) {
  const Index count = part.channels();
  common.add_slice(part.common, first);
  for (std::size_t i = 0; i < branches.size(); ++i) branches[i].add_slice(part.branches[i], first);
  fuse.block(first, first, count, count) += part.fuse;
  fuse_b.middleCols(first, count) += part.fuse_b;
}

template <typename T>
Volume<T> multiscale_forward(const Volume<T>& m, const MultiScaleParams<T>& p,
                             MultiScaleCache<T>* cache) {
  MultiScaleCache<T> local;
  MultiScaleCache<T>& c = cache ? *cache : local;
  const Volume<T> f0 = dsconv(m, p.common, &c.common);
  c.branches.assign(p.branches.size(), {});
  c.sum = p.include_common ? f0 : Volume<T>(m.channels(), m.height, m.width);
  for (std::size_t i = 0; i < p.branches.size(); ++i)
    c.sum.data += dsconv(f0, p.branches[i], &c.branches[i]).data;
  Volume<T> q(m.channels(), m.height, m.width);
  q.data.noalias() = p.fuse.transpose() * c.sum.data;
  q.data.colwise() += p.fuse_b.row(0).transpose();
  q.data += m.data;
  return q;
}

template <typename T>
Volume<T> multiscale_backward(const Volume<T>& dq, const MultiScaleCache<T>& c,
                              const MultiScaleParams<T>& p, MultiScaleParams<T>& grad) {
  grad.fuse.noalias() += c.sum.data * dq.data.transpose();
  grad.fuse_b += dq.data.rowwise().sum().transpose();
  Volume<T> dsum(dq.channels(), dq.height, dq.width);
  dsum.data.noalias() = p.fuse * dq.data;

  Volume<T> df0 = p.include_common ? dsum : Volume<T>(dq.channels(), dq.height, dq.width);
  for (std::size_t i = 0; i < p.branches.size(); ++i)
    df0.data += dsconv_backward(dsum, c.branches[i], p.branches[i], grad.branches[i]).data;
  Volume<T> dm = dsconv_backward(df0, c.common, p.common, grad.common);
  dm.data += dq.data;
  return dm;
}

#define TURL_INSTANTIATE(T)                                                                    \
  template struct DsConvParams<T>;                                                             \
  template struct MultiScaleParams<T>;                                                         \
  template Volume<T> depthwise_conv(const Volume<T>&, const Matrix<T>&, const Matrix<T>&, int); \
  template Volume<T> dsconv(const Volume<T>&, const DsConvParams<T>&, DsConvCache<T>*);        \
  template Volume<T> dsconv_backward(const Volume<T>&, const DsConvCache<T>&,                  \
                                     const DsConvParams<T>&, DsConvParams<T>&);                \
  template Volume<T> multiscale_forward(const Volume<T>&, const MultiScaleParams<T>&,          \
                                        MultiScaleCache<T>*);                                  \
  template Volume<T> multiscale_backward(const Volume<T>&, const MultiScaleCache<T>&,          \
                                         const MultiScaleParams<T>&, MultiScaleParams<T>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
