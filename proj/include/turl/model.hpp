#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "turl/char_channel.hpp"
#include "turl/encoder.hpp"
#include "turl/feature_pyramid.hpp"
#include "turl/multiscale_conv.hpp"
#include "turl/pyramid_attention.hpp"
#include "turl/tokenizer.hpp"

namespace turl {

struct ModelConfig {
  int vocab_size = 0;  // token table rows, specials included
  int max_len = 64;
  Index d_model = 64;
  int heads = 4;
  Index d_ff = 256;
  int layers = 4;
  int num_classes = 2;
  double dropout = 0.1;
  std::vector<int> rates = kDefaultDilationRates;
  bool include_f0 = true;
  bool spa_gelu = true;
  bool spa_pre = false;
  bool per_layer_fuse = false;

  EncoderConfig encoder() const { return {layers, d_model, heads, d_ff, dropout}; }
  Index char_dim() const { return d_model / 2; }
  Index spa_hidden() const { return 4 * static_cast<Index>(layers); }

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

template <typename T>
struct ModelParams {
  EmbeddingParams<T> embed;
  CharChannelParams<T> chars;
  EncoderParams<T> encoder;
  std::vector<FuseKernel<T>> fuse;  // one shared kernel, or one per layer
  MultiScaleParams<T> ms;
  SpaParams<T> spa;
  ClassifierHead<T> head;

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& cfg);

  void init(Rng& rng);
  const FuseKernel<T>& fuse_for(std::size_t layer) const { return fuse[fuse.size() == 1 ? 0 : layer]; }
  FuseKernel<T>& fuse_for(std::size_t layer) { return fuse[fuse.size() == 1 ? 0 : layer]; }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    embed.visit(join_name(prefix, "embed"), f);
    chars.visit(join_name(prefix, "char"), f);
    encoder.visit(join_name(prefix, "encoder"), f);
    if (fuse.size() == 1) {
      fuse[0].visit(join_name(prefix, "fuse"), f);
    } else {
      for (std::size_t l = 0; l < fuse.size(); ++l) fuse[l].visit(join_name(prefix, "fuse" + std::to_string(l)), f);
    }
    ms.visit(join_name(prefix, "ms"), f);
    spa.visit(join_name(prefix, "spa"), f);
    head.visit(join_name(prefix, "head"), f);
  }
};

/// Multi-scale, attention and head parameters restricted to the last k layers.
template <typename T>
struct HeadStack {
  MultiScaleParams<T> ms;
  SpaParams<T> spa;
  ClassifierHead<T> head;
};

template <typename T>
HeadStack<T> slice_head_stack(const ModelParams<T>& p, const ModelConfig& cfg, int active_layers);

template <typename T>
struct ForwardCache {
  int active_layers = 0;
  InputCache<T> input;
  EncodeCache<T> encode;
  LayerOutputs<T> outputs;
  Volume<T> stacked;
  MultiScaleCache<T> ms;
  Volume<T> q;
  SpaCache<T> spa;
  Matrix<T> zeta;
  Volume<T> weighted;
  HeadCache<T> head;
  HeadStack<T> sliced;  // filled only when active_layers < L
};

/// Logits (1 x classes) for one tokenized URL. `active_layers` of 0 means all
/// layers; otherwise only the last k layers feed the pyramid.
template <typename T>
Matrix<T> forward_sample(const ModelParams<T>& p, const ModelConfig& cfg, const TokenSequence& seq,
                         Dropout dropout = {}, ForwardCache<T>* cache = nullptr, int active_layers = 0);

/// Accumulates parameter gradients for one sample.
template <typename T>
void backward_sample(const Matrix<T>& dlogits, const ForwardCache<T>& cache, const ModelParams<T>& p,
                     const ModelConfig& cfg, ModelParams<T>& grad);

template <typename T>
struct BatchFeatures {
  StackedFeature<T> stacked;        // (batch, L, W, d)
  std::vector<Matrix<T>> pyramid;   // 1 x 21L each
  std::vector<Matrix<T>> zeta;      // 1 x L each
  std::vector<Matrix<T>> logits;
};

/// Inference pass over a batch that exposes the intermediate shapes.
template <typename T>
BatchFeatures<T> forward_batch(const ModelParams<T>& p, const ModelConfig& cfg,
                               const std::vector<TokenSequence>& batch);

template <typename T>
Matrix<T> softmax(const Matrix<T>& logits);

/// Softmax probabilities per URL, evaluation mode, order preserved.
template <typename T>
std::vector<std::vector<double>> predict_probabilities(const ModelParams<T>& p, const ModelConfig& cfg,
                                                       const BpeVocab& vocab,
                                                       const std::vector<std::string>& urls,
                                                       int active_layers = 0);

}  // namespace turl
