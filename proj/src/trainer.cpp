#include "turl/trainer.hpp"

#include <stdexcept>

#include "turl/parallel.hpp"

namespace turl {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("train: dropout must be in [0, 1)");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (precision != 32 && precision != 64) throw std::invalid_argument("train: precision must be 32 or 64");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    throw std::invalid_argument("train: betas must be in (0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("train: eps must be positive");
  if (warmup_steps < 0) throw std::invalid_argument("train: warmup_steps must be >= 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["weight_decay"] = weight_decay;
  j["dropout"] = dropout;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["shuffle_seed"] = shuffle_seed;
  j["precision"] = precision;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["eps"] = eps;
  j["warmup_steps"] = warmup_steps;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  c.precision = j.at("precision").get<int>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.warmup_steps = j.value("warmup_steps", 0);
  c.validate();
  return c;
}

template <typename T>
double cross_entropy(const Matrix<T>& logits, int label, Matrix<T>* dlogits) {
  if (label < 0 || label >= logits.cols()) throw std::out_of_range("cross_entropy: label out of range");
  const T mx = logits.maxCoeff();
  const Matrix<T> e = (logits.array() - mx).exp().matrix();
  const T sum = e.sum();
  if (dlogits) {
    *dlogits = e / sum;
    (*dlogits)(0, label) -= T(1);
  }
  return static_cast<double>(std::log(sum) - (logits(0, label) - mx));
}

template <typename T>
void adamw_step(const std::vector<NamedParam<T>>& params, const std::vector<NamedParam<T>>& grads,
                AdamState<T>& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix<T>& g = *grads[i].value;
    if (g.rows() != params[i].value->rows() || g.cols() != params[i].value->cols())
      throw std::invalid_argument("adamw: shape mismatch for " + params[i].name);
    if (!g.allFinite()) throw std::runtime_error("non-finite gradient in parameter " + params[i].name);
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix<T>::Zero(p.value->rows(), p.value->cols()));
      state.v.push_back(Matrix<T>::Zero(p.value->rows(), p.value->cols()));
    }
  }
  ++state.step;
  double lr = cfg.lr;
  if (cfg.warmup_steps > 0) lr *= std::min(1.0, static_cast<double>(state.step) / cfg.warmup_steps);
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(state.step)));
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T rate = static_cast<T>(lr), eps = static_cast<T>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix<T>& p = *params[i].value;
    const Matrix<T>& g = *grads[i].value;
    Matrix<T>& m = state.m[i];
    Matrix<T>& v = state.v[i];
    p *= decay;
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    p.array() -= rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

EncodedSet encode_set(const LabeledUrlSet& set, const BpeVocab& vocab, int max_len) {
  EncodedSet out;
  out.seqs.resize(set.size());
  out.labels.reserve(set.size());
  for (const auto& r : set.records) out.labels.push_back(r.label);
  parallel_for(set.size(), [&](std::size_t i) { out.seqs[i] = tokenize(set.records[i].url, vocab, max_len); });
  return out;
}

template <typename T>
ModelParams<T> round_to_f32(const ModelParams<T>& p) {
  ModelParams<T> out = p;
  out.visit("", [](const std::string&, Matrix<T>& m) { m = m.template cast<float>().template cast<T>(); });
  return out;
}

template <typename T>
double mean_loss(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedSet& set, int active_layers) {
  if (set.size() == 0) throw std::invalid_argument("mean_loss: empty set");
  std::vector<double> losses(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    losses[i] = cross_entropy<T>(forward_sample<T>(p, cfg, set.seqs[i], Dropout{}, nullptr, active_layers),
                                 set.labels[i]);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(set.size());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t shuffle_seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng r = Rng(shuffle_seed).fork("shuffle").fork("epoch", static_cast<std::uint64_t>(epoch));
  r.shuffle(order.begin(), order.end());
  return order;
}

namespace {

constexpr std::size_t kChunk = 8;

}  // namespace

template <typename T>
double batch_gradient(const ModelParams<T>& p, const ModelConfig& cfg, const EncodedSet& set,
                      const std::vector<std::size_t>& order, std::size_t first, std::size_t count,
                      const Rng* dropout_rng, ModelParams<T>& grad) {
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<ModelParams<T>> partial(chunks);
  std::vector<double> losses(chunks, 0.0);
  parallel_for(chunks, [&](std::size_t ci) {
    ModelParams<T> g = zeros_like(p);
    double loss = 0.0;
    const std::size_t end = std::min(count, (ci + 1) * kChunk);
    for (std::size_t j = ci * kChunk; j < end; ++j) {
      const std::size_t pos = first + j;
      const std::size_t idx = order[pos];
      Rng rng = dropout_rng ? dropout_rng->fork("sample", pos) : Rng();
      const Dropout drop{dropout_rng ? cfg.dropout : 0.0, dropout_rng ? &rng : nullptr};
      ForwardCache<T> cache;
      const Matrix<T> logits = forward_sample(p, cfg, set.seqs[idx], drop, &cache);
      Matrix<T> dlogits;
      loss += cross_entropy(logits, set.labels[idx], &dlogits);
      backward_sample(dlogits, cache, p, cfg, g);
    }
    partial[ci] = std::move(g);
    losses[ci] = loss;
  });
  double total = 0.0;
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    accumulate<T>(grad, partial[ci]);
    total += losses[ci];
  }
  return total;
}

template <typename T>
TrainResult<T> train(ModelParams<T> params, const ModelConfig& mcfg, const EncodedSet& train_set,
                     const EncodedSet& val_set, const TrainConfig& cfg,
                     const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training split");
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation split");
  for (int label : train_set.labels)
    if (label < 0 || label >= mcfg.num_classes) throw std::invalid_argument("train: label out of range");

  const Rng dropout_root = Rng(cfg.seed).fork("dropout");
  AdamState<T> state;

  TrainResult<T> result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(train_set.size(), cfg.shuffle_seed, epoch);
    const Rng epoch_rng = dropout_root.fork("epoch", static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - start);
      ModelParams<T> grad = zeros_like(params);
      loss_sum += batch_gradient(params, mcfg, train_set, order, start, count,
                                 mcfg.dropout > 0.0 ? &epoch_rng : nullptr, grad);
      const T scale = T(1) / static_cast<T>(count);
      grad.visit("", [&](const std::string&, Matrix<T>& m) { m *= scale; });
      adamw_step(collect_params<T>(params), collect_params<T>(grad), state, cfg);
    }
    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()), 0.0};
    ModelParams<T> snapshot = round_to_f32(params);
    entry.val_loss = mean_loss(snapshot, mcfg, val_set);
    if (epoch == 1 || entry.val_loss < result.best_val_loss) {
      result.best = std::move(snapshot);
      result.best_val_loss = entry.val_loss;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

#define TURL_INSTANTIATE(T)                                                                           \
  template double cross_entropy(const Matrix<T>&, int, Matrix<T>*);                                   \
  template void adamw_step(const std::vector<NamedParam<T>>&, const std::vector<NamedParam<T>>&,      \
                           AdamState<T>&, const TrainConfig&);                                        \
  template ModelParams<T> round_to_f32(const ModelParams<T>&);                                        \
  template double mean_loss(const ModelParams<T>&, const ModelConfig&, const EncodedSet&, int);       \
  template double batch_gradient(const ModelParams<T>&, const ModelConfig&, const EncodedSet&,        \
                                 const std::vector<std::size_t>&, std::size_t, std::size_t,           \
                                 const Rng*, ModelParams<T>&);                                        \
  template TrainResult<T> train(ModelParams<T>, const ModelConfig&, const EncodedSet&,                \
                                const EncodedSet&, const TrainConfig&,                                \
                                const std::function<void(const EpochLog&)>&);

TURL_INSTANTIATE(float)
TURL_INSTANTIATE(double)

}  // namespace turl
