#pragma once

#include <utility>
#include <vector>

#include "turl/nn.hpp"
#include "turl/tokenizer.hpp"

namespace turl {

/// Gate weights act on the row vector [h_prev, x]: rows [0, hidden) multiply
/// the previous state, rows [hidden, hidden + input) multiply the input.
template <typename T>
struct GruParams {
  Matrix<T> wz, wr, wh;
  Matrix<T> bz, br, bh;

  GruParams() = default;
  GruParams(Index hidden, Index input);

  Index hidden() const { return wz.cols(); }
  Index input() const { return wz.rows() - wz.cols(); }

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "wz"), wz);
    f(join_name(prefix, "wr"), wr);
    f(join_name(prefix, "wh"), wh);
    f(join_name(prefix, "bz"), bz);
    f(join_name(prefix, "br"), br);
    f(join_name(prefix, "bh"), bh);
  }
};

/// Forward and backward GRUs plus the position-independent elementwise
/// combination out = w*fwd + v*bwd + b.
template <typename T>
struct BiGruParams {
  GruParams<T> fwd, bwd;
  Matrix<T> w, v, b;

  BiGruParams() = default;
  BiGruParams(Index hidden, Index input);

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    fwd.visit(join_name(prefix, "fwd"), f);
    bwd.visit(join_name(prefix, "bwd"), f);
    f(join_name(prefix, "comb_w"), w);
    f(join_name(prefix, "comb_v"), v);
    f(join_name(prefix, "comb_b"), b);
  }
};

template <typename T>
struct CharChannelParams {
  Matrix<T> embed;  // char vocab x char_dim
  BiGruParams<T> bigru;

  CharChannelParams() = default;
  CharChannelParams(Index char_vocab, Index char_dim, Index hidden);

  Index char_dim() const { return embed.cols(); }
  Index hidden() const { return bigru.fwd.hidden(); }

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "embed"), embed);
    bigru.visit(join_name(prefix, "bigru"), f);
  }
};

/// One step: z and r gates, candidate state, then
/// h = (1 - z) * h_prev + z * h_candidate.
template <typename T>
Matrix<T> gru_cell(const Matrix<T>& h_prev, const Matrix<T>& x, const GruParams<T>& p);

/// Per-step values of a GRU run over a sequence (rows in processing order).
template <typename T>
struct GruTrace {
  Matrix<T> h_prev, z, r, candidate, h;
};

/// Runs from a zero state over the rows of `x` in order.
template <typename T>
GruTrace<T> gru_sequence(const Matrix<T>& x, const GruParams<T>& p);

/// Backpropagation through time; returns dL/dx and accumulates parameter grads.
template <typename T>
Matrix<T> gru_sequence_backward(const Matrix<T>& x, const GruTrace<T>& trace,
                                const Matrix<T>& dh, const GruParams<T>& p, GruParams<T>& grad);

template <typename T>
struct BiGruCache {
  Matrix<T> x;
  Matrix<T> x_reversed;
  GruTrace<T> fwd, bwd;  // bwd rows are in reversed (processing) order
};

/// N x input -> N x hidden.
template <typename T>
Matrix<T> bigru(const Matrix<T>& x, const BiGruParams<T>& p, BiGruCache<T>* cache = nullptr);

template <typename T>
Matrix<T> bigru_backward(const Matrix<T>& dout, const BiGruCache<T>& cache,
                         const BiGruParams<T>& p, BiGruParams<T>& grad);

/// Row i = [hidden(first_i), hidden(last_i)].
template <typename T>
Matrix<T> token_char_embedding(const Matrix<T>& hidden,
                               const std::vector<std::pair<int, int>>& bounds);

template <typename T>
Matrix<T> token_char_embedding_backward(const Matrix<T>& dout,
                                        const std::vector<std::pair<int, int>>& bounds,
                                        Index total_chars);

template <typename T>
struct CharChannelCache {
  FlatChars flat;
  BiGruCache<T> bigru;
};

/// Embedding lookup, BiGRU over all N characters, first/last gather:
/// returns m x (2 * hidden).
template <typename T>
Matrix<T> char_channel_forward(const TokenSequence& seq, const CharChannelParams<T>& p,
                               CharChannelCache<T>* cache = nullptr);

template <typename T>
void char_channel_backward(const Matrix<T>& dout, const CharChannelCache<T>& cache,
                           const CharChannelParams<T>& p, CharChannelParams<T>& grad);

}  // namespace turl
