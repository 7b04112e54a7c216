#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "turl/data_ingest.hpp"
#include "turl/model.hpp"

namespace turl {

struct TrainConfig {
  int batch_size = 64;
  double lr = 2e-5;
  double weight_decay = 1e-4;
  double dropout = 0.1;
  int epochs = 5;
  std::uint64_t seed = 1;          // initialization and dropout
  std::uint64_t shuffle_seed = 1;  // batch order only
  int precision = 32;              // 32 or 64
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int warmup_steps = 0;            // linear ramp; 0 keeps the rate constant

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// -log softmax(logits)[label] with max subtraction. Writes d/dlogits when asked.
template <typename T>
double cross_entropy(const Matrix<T>& logits, int label, Matrix<T>* dlogits = nullptr);

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m, v;
  long step = 0;
};

/// One AdamW update: p -= lr * wd * p, then the bias-corrected Adam step.
/// Throws naming the parameter when a gradient entry is not finite.
template <typename T>
void adamw_step(const std::vector<NamedParam<T>>& params, const std::vector<NamedParam<T>>& grads,
                AdamState<T>& state, const TrainConfig& cfg);

struct EncodedSet {
  std::vector<TokenSequence> seqs;
  std::vector<int> labels;

  std::size_t size() const { return seqs.size(); }
};

EncodedSet encode_set(const LabeledUrlSet& set, const BpeVocab& vocab, int max_len);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

template <typename T>
struct TrainResult {
  ModelParams<T> best;  // float-rounded snapshot of the selected epoch
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::vector<EpochLog> log;
};

/// Visiting order of the training set in a given epoch; depends only on the
/// shuffle seed.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t shuffle_seed, int epoch);

/// Rounds every parameter through 32-bit storage.
template <typename T>
ModelParams<T> round_to_f32(const ModelParams<T>& p);

/// Mean evaluation-mode loss; summation order is fixed.
template <typename T>
double mean_loss(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedSet& set, int active_layers = 0);

/// Summed loss and gradient of samples [first, first + count) of `order`.
template <typename T>
double batch_gradient(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedSet& set,
                      const std::vector<std::size_t>& order, std::size_t first, std::size_t count,
                      const Rng* dropout_rng, ModelParams<T>& grad);

template <typename T>
TrainResult<T> train(ModelParams<T> params, const ModelConfig& mcfg, const EncodedSet& train_set,
                     const EncodedSet& val_set, const TrainConfig& cfg,
                     const std::function<void(const EpochLog&)>& on_epoch = {});

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  double analytic = 0.0;  // at the worst probe
  double numeric = 0.0;
  int probes = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
  }
};

/// Central differences on randomly probed entries of every parameter whose
/// name passes `select`. `loss` reads the current values of `params`;
/// `analytic` holds the gradient to verify with the same layout.
template <typename Params>
GradCheckReport grad_check(Params& params, const Params& analytic, const std::function<double()>& loss,
                           int probes, std::uint64_t seed, double step = 1e-5,
                           const std::function<bool(const std::string&)>& select = {}) {
  auto values = collect_params<double>(params);
  auto grads = collect_params<double>(const_cast<Params&>(analytic));
  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (select && !select(values[i].name)) continue;
    Matrix<double>& m = *values[i].value;
    const Index n = m.size();
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k;
    Rng r = rng.fork(values[i].name);
    r.shuffle(idx.begin(), idx.end());
    idx.resize(std::min<std::size_t>(idx.size(), static_cast<std::size_t>(probes)));
    GradCheckEntry e{values[i].name};
    for (Index k : idx) {
      const double saved = m.data()[k];
      m.data()[k] = saved + step;
      const double up = loss();
      m.data()[k] = saved - step;
      const double down = loss();
      m.data()[k] = saved;
      const double numeric = (up - down) / (2 * step);
      const double a = grads[i].value->data()[k];
      const double err = relative_error(a, numeric);
      if (err >= e.max_rel_error) {
        e.max_rel_error = err;
        e.analytic = a;
        e.numeric = numeric;
      }
      ++e.probes;
    }
    report.entries.push_back(e);
  }
  return report;
}

/// Parameter struct converted element-wise to another scalar type.
template <typename To, template <typename> class P, typename From>
P<To> cast_params(const P<From>& src, const P<To>& shape) {
  P<To> out = shape;
  auto a = collect_params<From>(const_cast<P<From>&>(src));
  auto b = collect_params<To>(out);
  for (std::size_t i = 0; i < a.size(); ++i) *b[i].value = a[i].value->template cast<To>();
  return out;
}

}  // namespace turl
