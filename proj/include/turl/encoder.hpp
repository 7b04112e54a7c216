#pragma once

#include <vector>

#include "turl/char_channel.hpp"
#include "turl/hetero_interaction.hpp"
#include "turl/nn.hpp"
#include "turl/tokenizer.hpp"

namespace turl {

struct EncoderConfig {
  int layers = 4;
  Index d_model = 64;
  int heads = 4;
  Index d_ff = 256;
  double dropout = 0.1;

  void validate() const;
};

/// Post-norm BERT-style layer: self-attention and feed-forward sublayers,
/// each followed by residual add and layer normalization.
template <typename T>
struct TransformerLayerParams {
  Linear<T> query, key, value, output;
  LayerNorm<T> norm1;
  Linear<T> ff1, ff2;
  LayerNorm<T> norm2;

  TransformerLayerParams() = default;
  TransformerLayerParams(Index d, Index d_ff);

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    query.visit(join_name(prefix, "query"), f);
    key.visit(join_name(prefix, "key"), f);
    value.visit(join_name(prefix, "value"), f);
    output.visit(join_name(prefix, "output"), f);
    norm1.visit(join_name(prefix, "norm1"), f);
    ff1.visit(join_name(prefix, "ff1"), f);
    ff2.visit(join_name(prefix, "ff2"), f);
    norm2.visit(join_name(prefix, "norm2"), f);
  }
};

template <typename T>
struct EncoderLayerParams {
  TransformerLayerParams<T> transformer;
  InteractionParams<T> interaction;

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    transformer.visit(join_name(prefix, "attn"), f);
    interaction.visit(join_name(prefix, "inter"), f);
  }
};

template <typename T>
struct EncoderParams {
  std::vector<EncoderLayerParams<T>> layers;

  EncoderParams() = default;
  explicit EncoderParams(const EncoderConfig& cfg);

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t l = 0; l < layers.size(); ++l)
      layers[l].visit(join_name(prefix, "layer" + std::to_string(l)), f);
  }
};

/// Real-token count of a prefix mask; throws if the mask is not a prefix of ones.
Index mask_length(const std::vector<int>& mask);

template <typename T>
struct AttentionCache {
  Index real_rows = 0;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> probs;  // per head: rows x real_rows
  Matrix<T> context;
};

/// Multi-head scaled dot-product self-attention over the first `real_rows`
/// keys; returns the concatenated head contexts (before the output projection).
template <typename T>
Matrix<T> self_attention(const Matrix<T>& x, Index real_rows, const TransformerLayerParams<T>& p,
                         int heads, AttentionCache<T>* cache = nullptr);

template <typename T>
struct TransformerCache {
  Matrix<T> x;
  AttentionCache<T> attention;
  Matrix<T> attn_mask, ff_mask;  // empty when dropout is inactive
  typename LayerNorm<T>::Cache norm1, norm2;
  Matrix<T> x1, ff_pre, ff_act;
};

template <typename T>
Matrix<T> transformer_layer(const Matrix<T>& x, const std::vector<int>& mask,
                            const TransformerLayerParams<T>& p, int heads, Dropout dropout = {},
                            TransformerCache<T>* cache = nullptr);

template <typename T>
Matrix<T> transformer_layer_backward(const Matrix<T>& dy, const TransformerCache<T>& cache,
                                     const TransformerLayerParams<T>& p, int heads,
                                     TransformerLayerParams<T>& grad);

/// Per-layer dual-channel outputs (k_l, u_l), first layer first.
template <typename T>
using LayerOutputs = std::vector<DualChannelState<T>>;

template <typename T>
struct EncodeCache {
  std::vector<TransformerCache<T>> transformer;
  std::vector<InteractionCache<T>> interaction;
};

/// For each layer: the word channel passes the transformer layer, then the
/// interaction block updates both channels; the pair is recorded and fed on.
template <typename T>
LayerOutputs<T> encode(const Matrix<T>& word, const Matrix<T>& chars, const std::vector<int>& mask,
                       const EncoderConfig& cfg, const EncoderParams<T>& p, Dropout dropout = {},
                       EncodeCache<T>* cache = nullptr);

/// `doutputs` holds the gradient w.r.t. each recorded (k_l, u_l); entries
/// may be empty matrices for layers that received no gradient.
template <typename T>
DualChannelState<T> encode_backward(const LayerOutputs<T>& doutputs, const EncodeCache<T>& cache,
                                    const EncoderConfig& cfg, const EncoderParams<T>& p,
                                    EncoderParams<T>& grad);

template <typename T>
struct EmbeddingParams {
  Matrix<T> token;     // vocab x d
  Matrix<T> position;  // max_len x d

  EmbeddingParams() = default;
  EmbeddingParams(Index vocab, Index max_len, Index d)
      : token(Matrix<T>::Zero(vocab, d)), position(Matrix<T>::Zero(max_len, d)) {}

  void init(Rng& rng);

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(join_name(prefix, "token"), token);
    f(join_name(prefix, "position"), position);
  }
};

template <typename T>
struct InputCache {
  std::vector<int> ids;
  Index real_rows = 0;
  CharChannelCache<T> chars;
};

/// Word rows are token + position embeddings; char rows come from the
/// character channel and are zero beyond the real tokens.
template <typename T>
DualChannelState<T> input_embeddings(const TokenSequence& seq, const EmbeddingParams<T>& emb,
                                     const CharChannelParams<T>& chars,
                                     InputCache<T>* cache = nullptr);

template <typename T>
void input_embeddings_backward(const DualChannelState<T>& dinput, const InputCache<T>& cache,
                               const CharChannelParams<T>& chars, EmbeddingParams<T>& emb_grad,
                               CharChannelParams<T>& chars_grad);

}  // namespace turl
