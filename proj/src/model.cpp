#include "turl/model.hpp"

#include <stdexcept>

#include "turl/parallel.hpp"

namespace turl {

void ModelConfig::validate() const {
  if (vocab_size <= BpeVocab::kNumSpecials) throw std::invalid_argument("model: vocab_size too small");
  if (max_len < 2) throw std::invalid_argument("model: max_len must be >= 2");
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (rates.empty()) throw std::invalid_argument("model: at least one dilation rate is required");
  for (int r : rates)
    if (r < 1) throw std::invalid_argument("model: dilation rates must be >= 1");
  encoder().validate();
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["vocab_size"] = vocab_size;
  j["max_len"] = max_len;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["d_ff"] = d_ff;
  j["layers"] = layers;
  j["num_classes"] = num_classes;
  j["dropout"] = dropout;
  j["rates"] = rates;
  j["include_f0"] = include_f0;
  j["spa_gelu"] = spa_gelu;
  j["spa_pre"] = spa_pre;
  j["per_layer_fuse"] = per_layer_fuse;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.d_model = j.at("d_model").get<Index>();
  c.heads = j.at("heads").get<int>();
  c.d_ff = j.at("d_ff").get<Index>();
  c.layers = j.at("layers").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.rates = j.at("rates").get<std::vector<int>>();
  c.include_f0 = j.at("include_f0").get<bool>();
  c.spa_gelu = j.at("spa_gelu").get<bool>();
  c.spa_pre = j.at("spa_pre").get<bool>();
  c.per_layer_fuse = j.at("per_layer_fuse").get<bool>();
  c.validate();
  return c;
}

template <typename T>
ModelParams<T>::ModelParams(const ModelConfig& cfg)
    : embed(cfg.vocab_size, cfg.max_len, cfg.d_model),
      chars(CharVocab::size(), cfg.char_dim(), cfg.d_model / 2),
      encoder(cfg.encoder()),
      fuse(cfg.per_layer_fuse ? static_cast<std::size_t>(cfg.layers) : 1, FuseKernel<T>(cfg.d_model)),
      ms(cfg.layers, cfg.rates, cfg.include_f0),
      spa(cfg.layers, cfg.spa_hidden(), cfg.spa_gelu, cfg.spa_pre),
      head(static_cast<Index>(cfg.layers) * cfg.d_model, cfg.num_classes, cfg.dropout) {
  cfg.validate();
}

template <typename T>
void ModelParams<T>::init(Rng& rng) {
  Rng e = rng.fork("embed"), c = rng.fork("char"), enc = rng.fork("encoder"), m = rng.fork("ms"),
      s = rng.fork("spa"), h = rng.fork("head");
  embed.init(e);
  chars.init(c);
  encoder.init(enc);
  for (std::size_t l = 0; l < fuse.size(); ++l) {
    Rng f = rng.fork("fuse", l);
    fuse[l].init(f);
  }
  ms.init(m);
  spa.init(s);
  head.init(h);
}

template <typename T>
HeadStack<T> slice_head_stack(const ModelParams<T>& p, const ModelConfig& cfg, int k) {
  const Index first = cfg.layers - k;
  return {p.ms.slice(first, k), p.spa.slice(first, k), p.head.slice(first * cfg.d_model, k * cfg.d_model)};
}

namespace {

int resolve_layers(const ModelConfig& cfg, int active) {
  const int k = active == 0 ? cfg.layers : active;
  if (k < 1 || k > cfg.layers)
    throw std::out_of_range("active layer count must be in [1, " + std::to_string(cfg.layers) + "]");
  return k;
}

}  // namespace

template <typename T>
Matrix<T> forward_sample(const ModelParams<T>& p, const ModelConfig& cfg, const TokenSequence& seq,
                         Dropout dropout, ForwardCache<T>* cache, int active_layers) {
  if (seq.max_len() != cfg.max_len) throw std::invalid_argument("sequence length differs from model max_len");
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  const int L = cfg.layers;
  const int k = resolve_layers(cfg, active_layers);
  c.active_layers = k;

  const DualChannelState<T> in = input_embeddings(seq, p.embed, p.chars, &c.input);
  c.outputs = encode(in.word, in.chars, seq.attention_mask, cfg.encoder(), p.encoder, dropout, &c.encode);

  std::vector<Matrix<T>> fused;
  for (int l = L - k; l < L; ++l) {
    const auto& out = c.outputs[static_cast<std::size_t>(l)];
    fused.push_back(fuse_layer(out.word, out.chars, p.fuse_for(static_cast<std::size_t>(l))));
  }
  c.stacked = stack_layers(fused);

  const MultiScaleParams<T>* ms = &p.ms;
  const SpaParams<T>* spa = &p.spa;
  const ClassifierHead<T>* head = &p.head;
  if (k < L) {
    c.sliced = slice_head_stack(p, cfg, k);
    ms = &c.sliced.ms;
    spa = &c.sliced.spa;
    head = &c.sliced.head;
  }
  c.q = multiscale_forward(c.stacked, *ms, &c.ms);
  c.zeta = spa_forward(c.q, *spa, &c.spa);
  c.weighted = apply_attention(c.q, c.zeta);
  return classify(c.weighted, *head, dropout, &c.head);
}

template <typename T>
void backward_sample(const Matrix<T>& dlogits, const ForwardCache<T>& c, const ModelParams<T>& p,
                     const ModelConfig& cfg, ModelParams<T>& grad) {
  const int L = cfg.layers, k = c.active_layers;
  const bool sliced = k < L;
  HeadStack<T> g;
  if (sliced) g = {zeros_like(c.sliced.ms), zeros_like(c.sliced.spa), zeros_like(c.sliced.head)};
  const auto& ms = sliced ? c.sliced.ms : p.ms;
  const auto& spa = sliced ? c.sliced.spa : p.spa;
  const auto& head = sliced ? c.sliced.head : p.head;
  auto& gms = sliced ? g.ms : grad.ms;
  auto& gspa = sliced ? g.spa : grad.spa;
  auto& ghead = sliced ? g.head : grad.head;

  const Volume<T> dweighted = classify_backward(dlogits, c.head, head, ghead);
  Matrix<T> dzeta = Matrix<T>::Zero(1, k);
  Volume<T> dq = apply_attention_backward(dweighted, c.q, c.zeta, dzeta);
  dq.data += spa_backward(dzeta, c.spa, spa, gspa).data;
  const Volume<T> dstacked = multiscale_backward(dq, c.ms, ms, gms);

  if (sliced) {
    const Index first = L - k;
    grad.ms.add_slice(g.ms, first);
    grad.spa.add_slice(g.spa, first);
    grad.head.add_slice(g.head, first * cfg.d_model);
  }

  LayerOutputs<T> doutputs(static_cast<std::size_t>(L));
  for (int j = 0; j < k; ++j) {
    const auto l = static_cast<std::size_t>(L - k + j);
    const Matrix<T> dy = Eigen::Map<const Matrix<T>>(dstacked.data.row(j).data(), dstacked.height, dstacked.width);
    doutputs[l] = fuse_layer_backward(dy, c.outputs[l].word, c.outputs[l].chars, p.fuse_for(l), grad.fuse_for(l));
  }
  const DualChannelState<T> dinput = encode_backward(doutputs, c.encode, cfg.encoder(), p.encoder, grad.encoder);
  input_embeddings_backward(dinput, c.input, p.chars, grad.embed, grad.chars);
}

template <typename T>
BatchFeatures<T> forward_batch(const ModelParams<T>& p, const ModelConfig& cfg,
                               const std::vector<TokenSequence>& batch) {
  const auto L = static_cast<std::size_t>(cfg.layers);
  std::vector<std::vector<Matrix<T>>> fused(L, std::vector<Matrix<T>>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const DualChannelState<T> in = input_embeddings(batch[b], p.embed, p.chars);
    const LayerOutputs<T> outs = encode(in.word, in.chars, batch[b].attention_mask, cfg.encoder(), p.encoder);
    for (std::size_t l = 0; l < L; ++l) fused[l][b] = fuse_layer(outs[l].word, outs[l].chars, p.fuse_for(l));
  }
  BatchFeatures<T> out;
  out.stacked = stack_and_permute(fused);
  fused.clear();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Volume<T> q = multiscale_forward(out.stacked.sample(static_cast<Index>(b)), p.ms);
    SpaCache<T> spa;
    out.zeta.push_back(spa_forward(q, p.spa, &spa));
    out.pyramid.push_back(spa.s);
    out.logits.push_back(classify(apply_attention(q, out.zeta.back()), p.head));
  }
  return out;
}

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
  Matrix<T> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename T>
std::vector<std::vector<double>> predict_probabilities(const ModelParams<T>& p, const ModelConfig& cfg,
                                                       const BpeVocab& vocab,
                                                       const std::vector<std::string>& urls,
                                                       int active_layers) {
  std::vector<std::vector<double>> out(urls.size());
  parallel_for(urls.size(), [&](std::size_t i) {
    const TokenSequence seq = tokenize(urls[i], vocab, cfg.max_len);
    const Matrix<T> prob = softmax<T>(forward_sample<T>(p, cfg, seq, Dropout{}, nullptr, active_layers));
    out[i].assign(prob.data(), prob.data() + prob.size());
  });
  return out;
}

#define TURL_INSTANTIATE(T)                                                                          \
  template struct ModelParams<T>;                                                                    \
  template HeadStack<T> slice_head_stack(const ModelParams<T>&, const ModelConfig&, int);            \
  template Matrix<T> forward_sample(const ModelParams<T>&, const ModelConfig&, const TokenSequence&, \
                                    Dropout, ForwardCache<T>*, int);                                 \
  template void backward_sample(const Matrix<T>&, const ForwardCache<T>&, const ModelParams<T>&,     \
                                const ModelConfig&, ModelParams<T>&);                                \
  template BatchFeatures<T> forward_batch(const ModelParams<T>&, const ModelConfig&,                 \
                                          const std::vector<TokenSequence>&);                        \
  template Matrix<T> softmax(const Matrix<T>&);                                                      \
  template std::vector<std::vector<double>> predict_probabilities(                                   \
      const ModelParams<T>&, const ModelConfig&, const BpeVocab&, const std::vector<std::string>&, int);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
