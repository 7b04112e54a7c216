#pragma once

#include <string>
#include <vector>

#include "turl/model.hpp"
#include "turl/trainer.hpp"

namespace fixture {

/// L=2, d=16, W=8 with the byte-level vocabulary.
inline turl::ModelConfig tiny_config() {
  turl::ModelConfig c;
  c.vocab_size = turl::BpeVocab().size();
  c.max_len = 8;
  c.d_model = 16;
  c.heads = 2;
  c.d_ff = 32;
  c.layers = 2;
  c.num_classes = 2;
  c.dropout = 0.0;
  return c;
}

struct Batch {
  std::vector<turl::TokenSequence> seqs;
  std::vector<int> labels;
};

inline Batch tiny_batch(const turl::ModelConfig& cfg) {
  const turl::BpeVocab v;
  Batch b;
  b.seqs = {turl::tokenize("ab.cd/e", v, cfg.max_len), turl::tokenize("x-1.io", v, cfg.max_len),
            turl::tokenize("q", v, cfg.max_len)};
  b.labels = {1, 0, 1};
  return b;
}

inline turl::ModelParams<double> random_model(const turl::ModelConfig& cfg, std::uint64_t seed) {
  turl::ModelParams<double> p(cfg);
  turl::Rng rng(seed);
  p.init(rng);
  // move every entry off its structured starting value so biases and norms are exercised too
  turl::Rng noise = rng.fork("noise");
  p.visit("", [&](const std::string&, turl::Matrix<double>& m) {
    for (turl::Index i = 0; i < m.size(); ++i) m.data()[i] += noise.uniform(-0.05, 0.05);
  });
  return p;
}

template <typename T>
double batch_loss(const turl::ModelParams<T>& p, const turl::ModelConfig& cfg, const Batch& b,
                  turl::ModelParams<T>* grad = nullptr, int active_layers = 0) {
  double loss = 0.0;
  for (std::size_t i = 0; i < b.seqs.size(); ++i) {
    turl::ForwardCache<T> cache;
    const turl::Matrix<T> logits =
        turl::forward_sample<T>(p, cfg, b.seqs[i], turl::Dropout{}, grad ? &cache : nullptr, active_layers);
    turl::Matrix<T> dl;
    loss += turl::cross_entropy<T>(logits, b.labels[i], grad ? &dl : nullptr);
    if (grad) turl::backward_sample<T>(dl, cache, p, cfg, *grad);
  }
  return loss;
}

/// Analytic gradients at the requested precision against double central
/// differences around the same (precision-rounded) parameters.
inline turl::GradCheckReport model_grad_check(int precision, int probes, std::uint64_t seed,
                                              int active_layers = 0) {
  const auto cfg = tiny_config();
  const Batch b = tiny_batch(cfg);
  auto p = random_model(cfg, seed);
  turl::ModelParams<double> analytic = turl::zeros_like(p);
  if (precision == 32) {
    const auto pf = turl::cast_params<float>(p, turl::ModelParams<float>(cfg));
    auto gf = turl::zeros_like(pf);
    batch_loss<float>(pf, cfg, b, &gf, active_layers);
    p = turl::cast_params<double>(pf, p);
    analytic = turl::cast_params<double>(gf, p);
  } else {
    batch_loss<double>(p, cfg, b, &analytic, active_layers);
  }
  return turl::grad_check(p, analytic, [&] { return batch_loss<double>(p, cfg, b, nullptr, active_layers); },
                          probes, seed);
}

}  // namespace fixture
