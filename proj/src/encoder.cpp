#include "turl/encoder.hpp"

#include <stdexcept>

namespace turl {

void EncoderConfig::validate() const {
  if (layers < 1 || layers > 12) throw std::invalid_argument("encoder: layers must be in [1, 12]");
  if (heads < 1 || d_model % heads != 0)
    throw std::invalid_argument("encoder: d_model must be divisible by heads");
  if (d_model < 2 || d_model % 2 != 0) throw std::invalid_argument("encoder: d_model must be even");
  if (d_ff < 1) throw std::invalid_argument("encoder: d_ff must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("encoder: dropout must be in [0, 1)");
}

Index mask_length(const std::vector<int>& mask) {
  Index m = 0;
  while (m < static_cast<Index>(mask.size()) && mask[static_cast<std::size_t>(m)] == 1) ++m;
  for (auto i = static_cast<std::size_t>(m); i < mask.size(); ++i)
    if (mask[i] != 0) throw std::invalid_argument("attention mask must be a prefix of ones");
  if (m == 0) throw std::invalid_argument("attention mask has no real tokens");
  return m;
}

template <typename T>
TransformerLayerParams<T>::TransformerLayerParams(Index d, Index d_ff)
    : query(d, d),
      key(d, d),
      value(d, d),
      output(d, d),
      norm1(d),
      ff1(d, d_ff),
      ff2(d_ff, d),
      norm2(d) {}

template <typename T>
void TransformerLayerParams<T>::init(Rng& rng) {
  Rng a = rng.fork("query"), b = rng.fork("key"), c = rng.fork("value"), e = rng.fork("output"),
      f = rng.fork("ff1"), g = rng.fork("ff2");
  query.init(a);
  key.init(b);
  value.init(c);
  output.init(e);
  ff1.init(f);
  ff2.init(g);
}

template <typename T>
EncoderParams<T>::EncoderParams(const EncoderConfig& cfg) {
  cfg.validate();
  for (int l = 0; l < cfg.layers; ++l)
    layers.push_back({TransformerLayerParams<T>(cfg.d_model, cfg.d_ff),
                      InteractionParams<T>(cfg.d_model)});
}

template <typename T>
void EncoderParams<T>::init(Rng& rng) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Rng a = rng.fork("attn", l), b = rng.fork("inter", l);
    layers[l].transformer.init(a);
    layers[l].interaction.init(b);
  }
}

template <typename T>
Matrix<T> self_attention(const Matrix<T>& x, Index real_rows, const TransformerLayerParams<T>& p,
                         int heads, AttentionCache<T>* cache) {
  const Index d = x.cols();
  if (d != p.query.in()) throw std::invalid_argument("self_attention: width mismatch");
  if (real_rows < 1 || real_rows > x.rows()) throw std::invalid_argument("self_attention: bad mask");
  AttentionCache<T> local;
  AttentionCache<T>& c = cache ? *cache : local;
  const Index dk = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  c.real_rows = real_rows;
  c.q = p.query.forward(x);
  c.k = p.key.forward(x);
  c.v = p.value.forward(x);
  c.probs.assign(static_cast<std::size_t>(heads), Matrix<T>());
  c.context.resize(x.rows(), d);
  for (int h = 0; h < heads; ++h) {
    auto& probs = c.probs[static_cast<std::size_t>(h)];
    probs = (c.q.middleCols(h * dk, dk) * c.k.block(0, h * dk, real_rows, dk).transpose()) * scale;
    softmax_rows_prefix(probs, real_rows);
    c.context.middleCols(h * dk, dk).noalias() = probs * c.v.block(0, h * dk, real_rows, dk);
  }
  return c.context;
}

template <typename T>
Matrix<T> transformer_layer(const Matrix<T>& x, const std::vector<int>& mask,
                            const TransformerLayerParams<T>& p, int heads, Dropout dropout,
                            TransformerCache<T>* cache) {
  if (static_cast<Index>(mask.size()) != x.rows())
    throw std::invalid_argument("transformer_layer: mask length mismatch");
  const Index real = mask_length(mask);
  TransformerCache<T> local;
  TransformerCache<T>& c = cache ? *cache : local;
  c.x = x;
  const Matrix<T> ctx = self_attention(x, real, p, heads, &c.attention);
  Matrix<T> attn = p.output.forward(ctx);
  if (dropout.active()) {
    c.attn_mask = dropout_mask<T>(attn.rows(), attn.cols(), dropout.rate, *dropout.rng);
    attn.array() *= c.attn_mask.array();
  } else {
    c.attn_mask.resize(0, 0);
  }
  c.x1 = p.norm1.forward(x + attn, c.norm1);
  c.ff_pre = p.ff1.forward(c.x1);
  c.ff_act = gelu(c.ff_pre);
  Matrix<T> ff = p.ff2.forward(c.ff_act);
  if (dropout.active()) {
    c.ff_mask = dropout_mask<T>(ff.rows(), ff.cols(), dropout.rate, *dropout.rng);
    ff.array() *= c.ff_mask.array();
  } else {
    c.ff_mask.resize(0, 0);
  }
  return p.norm2.forward(c.x1 + ff, c.norm2);
}

template <typename T>
Matrix<T> transformer_layer_backward(const Matrix<T>& dy, const TransformerCache<T>& c,
                                     const TransformerLayerParams<T>& p, int heads,
                                     TransformerLayerParams<T>& grad) {
  const Index d = c.x.cols();
  const Index dk = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dk));
  const auto& a = c.attention;
  const Index real = a.real_rows;

  Matrix<T> dx1 = p.norm2.backward(dy, c.norm2, grad.norm2);
  Matrix<T> dff = dx1;
  if (c.ff_mask.size() > 0) dff.array() *= c.ff_mask.array();
  const Matrix<T> dact = p.ff2.backward(c.ff_act, dff, grad.ff2);
  const Matrix<T> dpre = dact.cwiseProduct(gelu_grad(c.ff_pre));
  dx1 += p.ff1.backward(c.x1, dpre, grad.ff1);

  Matrix<T> dx = p.norm1.backward(dx1, c.norm1, grad.norm1);
  Matrix<T> dattn = dx;
  if (c.attn_mask.size() > 0) dattn.array() *= c.attn_mask.array();
  const Matrix<T> dctx = p.output.backward(a.context, dattn, grad.output);

  Matrix<T> dq = Matrix<T>::Zero(c.x.rows(), d);
  Matrix<T> dkey = Matrix<T>::Zero(c.x.rows(), d);
  Matrix<T> dv = Matrix<T>::Zero(c.x.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto& probs = a.probs[static_cast<std::size_t>(h)];
    const auto vh = a.v.block(0, h * dk, real, dk);
    const Matrix<T> dctx_h = dctx.middleCols(h * dk, dk);
    dv.block(0, h * dk, real, dk).noalias() += probs.transpose() * dctx_h;
    Matrix<T> dprobs = dctx_h * vh.transpose();
    const Matrix<T> row_dot = (dprobs.array() * probs.array()).rowwise().sum();
    Matrix<T> dscores = probs.array() * (dprobs.array().colwise() - row_dot.col(0).array());
    dscores *= scale;
    dq.middleCols(h * dk, dk).noalias() += dscores * a.k.block(0, h * dk, real, dk);
    dkey.block(0, h * dk, real, dk).noalias() += dscores.transpose() * a.q.middleCols(h * dk, dk);
  }
  dx += p.query.backward(c.x, dq, grad.query);
  // a key bias shifts each score row by a constant, which softmax ignores
  const Matrix<T> key_b = grad.key.b;
  dx += p.key.backward(c.x, dkey, grad.key);
  grad.key.b = key_b;
  dx += p.value.backward(c.x, dv, grad.value);
  return dx;
}

template <typename T>
LayerOutputs<T> encode(const Matrix<T>& word, const Matrix<T>& chars, const std::vector<int>& mask,
                       const EncoderConfig& cfg, const EncoderParams<T>& p, Dropout dropout,
                       EncodeCache<T>* cache) {
  if (word.rows() != chars.rows() || word.cols() != cfg.d_model || chars.cols() != cfg.d_model)
    throw std::invalid_argument("encode: channel shapes must both be max_len x d_model");
  if (static_cast<int>(p.layers.size()) != cfg.layers)
    throw std::invalid_argument("encode: parameter layer count mismatch");
  const Index real = mask_length(mask);
  if (cache) {
    cache->transformer.assign(p.layers.size(), {});
    cache->interaction.assign(p.layers.size(), {});
  }
  LayerOutputs<T> out;
  DualChannelState<T> state{word, chars};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    state.word = transformer_layer(state.word, mask, p.layers[l].transformer, cfg.heads, dropout,
                                   cache ? &cache->transformer[l] : nullptr);
    state = interact(state, p.layers[l].interaction, real, cache ? &cache->interaction[l] : nullptr);
    out.push_back(state);
  }
  return out;
}

template <typename T>
DualChannelState<T> encode_backward(const LayerOutputs<T>& doutputs, const EncodeCache<T>& cache,
                                    const EncoderConfig& cfg, const EncoderParams<T>& p,
                                    EncoderParams<T>& grad) {
  const auto layers = p.layers.size();
  const Index rows = cache.transformer.front().x.rows();
  DualChannelState<T> carry{Matrix<T>::Zero(rows, cfg.d_model), Matrix<T>::Zero(rows, cfg.d_model)};
  for (std::size_t l = layers; l-- > 0;) {
    const auto& dl = doutputs[l];
    if (dl.word.size() > 0) carry.word += dl.word;
    if (dl.chars.size() > 0) carry.chars += dl.chars;
    auto din = interact_backward(carry, cache.interaction[l], p.layers[l].interaction,
                                 grad.layers[l].interaction);
    carry.word = transformer_layer_backward(din.word, cache.transformer[l], p.layers[l].transformer,
                                            cfg.heads, grad.layers[l].transformer);
    carry.chars = std::move(din.chars);
  }
  return carry;
}

template <typename T>
void EmbeddingParams<T>::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(token.cols()));
  Rng a = rng.fork("token"), b = rng.fork("position");
  init_uniform(token, bound, a);
  init_uniform(position, bound, b);
}

template <typename T>
DualChannelState<T> input_embeddings(const TokenSequence& seq, const EmbeddingParams<T>& emb,
                                     const CharChannelParams<T>& chars, InputCache<T>* cache) {
  const Index rows = seq.max_len();
  const Index d = emb.token.cols();
  if (rows > emb.position.rows()) throw std::out_of_range("sequence longer than the position table");
  if (2 * chars.hidden() != d)
    throw std::invalid_argument("char channel width must equal the word channel width");
  InputCache<T> local;
  InputCache<T>& c = cache ? *cache : local;
  c.ids = seq.subword_ids;
  c.real_rows = seq.subword_count;

  DualChannelState<T> out;
  out.word.resize(rows, d);
  for (Index i = 0; i < rows; ++i) {
    const int id = seq.subword_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= emb.token.rows()) throw std::out_of_range("token id out of vocabulary range");
    out.word.row(i) = emb.token.row(id) + emb.position.row(i);
  }
  out.chars = Matrix<T>::Zero(rows, d);
  out.chars.topRows(seq.subword_count) = char_channel_forward(seq, chars, &c.chars);
  return out;
}

template <typename T>
void input_embeddings_backward(const DualChannelState<T>& dinput, const InputCache<T>& c,
                               const CharChannelParams<T>& chars, EmbeddingParams<T>& emb_grad,
                               CharChannelParams<T>& chars_grad) {
  for (Index i = 0; i < dinput.word.rows(); ++i) {
    emb_grad.token.row(c.ids[static_cast<std::size_t>(i)]) += dinput.word.row(i);
    emb_grad.position.row(i) += dinput.word.row(i);
  }
  char_channel_backward<T>(dinput.chars.topRows(c.real_rows), c.chars, chars, chars_grad);
}

#define TURL_INSTANTIATE(T)                                                                      \
  template struct TransformerLayerParams<T>;                                                     \
  template struct EncoderParams<T>;                                                              \
  template struct EmbeddingParams<T>;                                                            \
  template Matrix<T> self_attention(const Matrix<T>&, Index, const TransformerLayerParams<T>&,   \
                                    int, AttentionCache<T>*);                                    \
  template Matrix<T> transformer_layer(const Matrix<T>&, const std::vector<int>&,                \
                                       const TransformerLayerParams<T>&, int, Dropout,           \
                                       TransformerCache<T>*);                                    \
  template Matrix<T> transformer_layer_backward(const Matrix<T>&, const TransformerCache<T>&,    \
                                                const TransformerLayerParams<T>&, int,           \
                                                TransformerLayerParams<T>&);                     \
  template LayerOutputs<T> encode(const Matrix<T>&, const Matrix<T>&, const std::vector<int>&,   \
                                  const EncoderConfig&, const EncoderParams<T>&, Dropout,        \
                                  EncodeCache<T>*);                                              \
  template DualChannelState<T> encode_backward(const LayerOutputs<T>&, const EncodeCache<T>&,    \
                                               const EncoderConfig&, const EncoderParams<T>&,    \
                                               EncoderParams<T>&);                               \
  template DualChannelState<T> input_embeddings(const TokenSequence&, const EmbeddingParams<T>&, \
                                                const CharChannelParams<T>&, InputCache<T>*);    \
  template void input_embeddings_backward(const DualChannelState<T>&, const InputCache<T>&,      \
                                          const CharChannelParams<T>&, EmbeddingParams<T>&,      \
                                          CharChannelParams<T>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
