#pragma once

// Straight-line reference implementations used to check the library.
// They deliberately avoid the library's math helpers and loop over indices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "turl/char_channel.hpp"
#include "turl/data_ingest.hpp"
#include "turl/hetero_interaction.hpp"
#include "turl/multiscale_conv.hpp"
#include "turl/nn.hpp"
#include "turl/rng.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;  // rows x cols

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename M>
Grid to_grid(const M& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) g[i][j] = static_cast<double>(m(i, j));
  return g;
}

inline double max_abs_diff(const Grid& a, const Grid& b) {
  double worst = 0.0;
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) return std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  }
  return worst;
}

template <typename M>
double max_abs_diff(const M& m, const Grid& g) {
  return max_abs_diff(to_grid(m), g);
}

// One GRU step on plain vectors. Gate weight rows: previous state first, then input.
inline std::vector<double> gru_step(const std::vector<double>& h, const std::vector<double>& x,
                                    const turl::GruParams<double>& p) {
  const std::size_t H = h.size(), X = x.size();
  std::vector<double> z(H), r(H), out(H);
  for (std::size_t j = 0; j < H; ++j) {
    double az = p.bz(0, j), ar = p.br(0, j);
    for (std::size_t i = 0; i < H; ++i) {
      az += h[i] * p.wz(i, j);
      ar += h[i] * p.wr(i, j);
    }
    for (std::size_t k = 0; k < X; ++k) {
      az += x[k] * p.wz(H + k, j);
      ar += x[k] * p.wr(H + k, j);
    }
    z[j] = sig(az);
    r[j] = sig(ar);
  }
  for (std::size_t j = 0; j < H; ++j) {
    double a = p.bh(0, j);
    for (std::size_t i = 0; i < H; ++i) a += r[i] * h[i] * p.wh(i, j);
    for (std::size_t k = 0; k < X; ++k) a += x[k] * p.wh(H + k, j);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(a);
  }
  return out;
}

inline Grid bigru(const Grid& x, const turl::BiGruParams<double>& p) {
  const std::size_t n = x.size();
  const auto H = static_cast<std::size_t>(p.fwd.hidden());
  Grid f(n), b(n), out(n, std::vector<double>(H));
  std::vector<double> h(H, 0.0);
  for (std::size_t t = 0; t < n; ++t) f[t] = h = gru_step(h, x[t], p.fwd);
  h.assign(H, 0.0);
  for (std::size_t t = n; t-- > 0;) b[t] = h = gru_step(h, x[t], p.bwd);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < H; ++j) out[t][j] = p.w(0, j) * f[t][j] + p.v(0, j) * b[t][j] + p.b(0, j);
  return out;
}

// Depthwise 3x3 dilated cross-correlation with zero padding, then a 1x1 mix.
inline Grid dsconv(const turl::Volume<double>& in, const turl::DsConvParams<double>& p) {
  const long C = in.channels(), H = in.height, W = in.width, r = p.rate;
  Grid depth(C, std::vector<double>(H * W, 0.0));
  for (long c = 0; c < C; ++c)
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double acc = p.depthwise_b(0, c);
        for (long ky = 0; ky < 3; ++ky)
          for (long kx = 0; kx < 3; ++kx) {
            const long yy = y + (ky - 1) * r, xx = x + (kx - 1) * r;
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
            acc += p.depthwise(c, ky * 3 + kx) * in.at(c, yy, xx);
          }
        depth[c][y * W + x] = acc;
      }
  Grid out(C, std::vector<double>(H * W, 0.0));
  for (long co = 0; co < C; ++co)
    for (long i = 0; i < H * W; ++i) {
      double acc = p.pointwise_b(0, co);
      for (long ci = 0; ci < C; ++ci) acc += p.pointwise(ci, co) * depth[ci][i];
      out[co][i] = acc;
    }
  return out;
}

inline Grid add(const Grid& a, const Grid& b) {
  Grid o = a;
  for (std::size_t i = 0; i < o.size(); ++i)
    for (std::size_t j = 0; j < o[i].size(); ++j) o[i][j] += b[i][j];
  return o;
}

inline turl::Volume<double> to_volume(const Grid& g, long h, long w) {
  turl::Volume<double> v(static_cast<long>(g.size()), h, w);
  for (std::size_t c = 0; c < g.size(); ++c)
    for (long i = 0; i < h * w; ++i) v.data(c, i) = g[c][i];
  return v;
}

inline Grid multiscale(const turl::Volume<double>& m, const turl::MultiScaleParams<double>& p) {
  const Grid f0 = dsconv(m, p.common);
  const auto f0v = to_volume(f0, m.height, m.width);
  Grid sum(f0.size(), std::vector<double>(f0[0].size(), 0.0));
  if (p.include_common) sum = add(sum, f0);
  for (const auto& br : p.branches) sum = add(sum, dsconv(f0v, br));
  const long C = m.channels();
  Grid q(C, std::vector<double>(sum[0].size()));
  for (long co = 0; co < C; ++co)
    for (std::size_t i = 0; i < sum[0].size(); ++i) {
      double acc = p.fuse_b(0, co) + m.data(co, static_cast<long>(i));
      for (long ci = 0; ci < C; ++ci) acc += p.fuse(ci, co) * sum[ci][i];
      q[co][i] = acc;
    }
  return q;
}

// y = [k | u] W + b, one position at a time.
inline Grid fuse_layer(const Grid& k, const Grid& u, const turl::Matrix<double>& w, const turl::Matrix<double>& b) {
  const std::size_t d = k[0].size();
  Grid y(k.size(), std::vector<double>(static_cast<std::size_t>(w.cols())));
  for (std::size_t t = 0; t < k.size(); ++t)
    for (long o = 0; o < w.cols(); ++o) {
      double acc = b(0, o);
      for (std::size_t i = 0; i < d; ++i) acc += k[t][i] * w(i, o) + u[t][i] * w(d + i, o);
      y[t][o] = acc;
    }
  return y;
}

// Floor-bounded cell means; an empty range borrows the nearest single row/column.
inline Grid adaptive_pool(const turl::Volume<double>& q, int g) {
  const long H = q.height, W = q.width;
  Grid out(q.channels(), std::vector<double>(g * g));
  for (long c = 0; c < q.channels(); ++c)
    for (int a = 0; a < g; ++a)
      for (int b = 0; b < g; ++b) {
        long y0 = a * H / g, y1 = (a + 1) * H / g, x0 = b * W / g, x1 = (b + 1) * W / g;
        if (y1 <= y0) {
          y0 = std::min(y0, H - 1);
          y1 = y0 + 1;
        }
        if (x1 <= x0) {
          x0 = std::min(x0, W - 1);
          x1 = x0 + 1;
        }
        double s = 0.0;
        for (long y = y0; y < y1; ++y)
          for (long x = x0; x < x1; ++x) s += q.at(c, y, x);
        out[c][a * g + b] = s / static_cast<double>((y1 - y0) * (x1 - x0));
      }
  return out;
}

// Sliding-window interaction fuse: window 1 for the first d/2 filters, window 3
// for the rest, rows at or beyond real_rows read as zero.
inline Grid interaction_fuse(const Grid& t, const Grid& h, const turl::InteractionParams<double>& p, long real_rows) {
  const long m = static_cast<long>(t.size());
  const long d = static_cast<long>(t[0].size());
  Grid w(m, std::vector<double>(2 * d, 0.0));
  for (long i = 0; i < std::min(m, real_rows); ++i)
    for (long o = 0; o < d; ++o) {
      double a = p.word_in.b(0, o), b = p.char_in.b(0, o);
      for (long k = 0; k < d; ++k) {
        a += t[i][k] * p.word_in.w(k, o);
        b += h[i][k] * p.char_in.w(k, o);
      }
      w[i][o] = a;
      w[i][d + o] = b;
    }
  auto row = [&](long i) -> const std::vector<double>* {
    if (i < 0 || i >= m || i >= real_rows) return nullptr;
    return &w[i];
  };
  const long d1 = p.window1.out();
  Grid out(m, std::vector<double>(d, 0.0));
  for (long i = 0; i < m; ++i) {
    for (long j = 0; j < d1; ++j) {
      double acc = p.window1.b(0, j);
      if (const auto* r = row(i))
        for (long k = 0; k < 2 * d; ++k) acc += (*r)[k] * p.window1.w(k, j);
      out[i][j] = std::tanh(acc);
    }
    for (long j = 0; j < p.window3.out(); ++j) {
      double acc = p.window3.b(0, j);
      for (long off = -1; off <= 1; ++off)
        if (const auto* r = row(i + off))
          for (long k = 0; k < 2 * d; ++k) acc += (*r)[k] * p.window3.w((off + 1) * 2 * d + k, j);
      out[i][d1 + j] = std::tanh(acc);
    }
  }
  return out;
}

struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const std::vector<int>& preds, const std::vector<int>& labels, int positive) {
  Counts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive, t = labels[i] == positive;
    if (p && t) ++c.tp;
    if (p && !t) ++c.fp;
    if (!p && t) ++c.fn;
    if (!p && !t) ++c.tn;
  }
  return c;
}

struct Prf {
  double p, r, f;
};

inline Prf prf(const Counts& c) {
  const double p = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
  const double r = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
  const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
  return {p, r, f};
}

// Every positive-negative pair: win 1, tie 1/2.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 0) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / double(pairs);
}

struct RocPoint {
  double threshold, fpr, tpr;
};

// Every distinct score as a threshold (predict positive when score >= t), plus +inf.
inline std::vector<RocPoint> roc(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> th(s.begin(), s.end());
  long P = 0, N = 0;
  for (int v : y) (v != 0 ? P : N)++;
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  for (double t : th) {
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] != 0 ? tp : fp)++;
    out.push_back({t, double(fp) / double(N), double(tp) / double(P)});
  }
  return out;
}

inline double tpr_at(const std::vector<RocPoint>& pts, double target) {
  double best = 0.0;
  for (const auto& p : pts)
    if (p.fpr <= target) best = std::max(best, p.tpr);
  return best;
}

// Balanced URL corpus in which every malicious URL carries one planted
// credential-phishing marker and benign URLs never do.
inline turl::LabeledUrlSet separable_corpus(std::size_t n, std::uint64_t seed) {
  static const char* words[] = {"shop", "news", "mail", "blog", "docs", "home", "cloud", "photo",
                                "music", "games", "travel", "sport", "media", "store", "forum", "wiki"};
  static const char* tlds[] = {"com", "org", "net", "de", "io", "uk", "info"};
  static const char* marks[] = {"/secure-login/verify.php", "/account-update/confirm.php",
                                "/signin-verify/session.php"};
  static const char* plain[] = {"/about/team.html", "/articles/index.html", "/help/contact.html"};
  turl::Rng rng(seed);
  turl::LabeledUrlSet set;
  set.class_names = {"benign", "malicious"};
  auto pick = [&](auto& arr) { return std::string(arr[rng.below(std::size(arr))]); };
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::string url = rng.bernoulli(0.5) ? "https://" : "http://";
    if (rng.bernoulli(0.5)) url += "www.";
    url += pick(words);
    if (rng.bernoulli(0.3)) url += std::to_string(rng.below(100));
    url += "." + pick(tlds);
    const auto segs = rng.below(3);
    for (std::uint64_t k = 0; k < segs; ++k) url += "/" + pick(words);
    url += label ? pick(marks) : pick(plain);
    if (rng.bernoulli(0.4)) url += "?id=" + std::to_string(rng.below(10000));
    set.records.push_back({url, label, set.class_names[label]});
  }
  return set;
}

}  // namespace oracle
