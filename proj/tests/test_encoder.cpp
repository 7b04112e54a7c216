#include <doctest.h>

#include "turl/encoder.hpp"
#include "turl/trainer.hpp"

using namespace turl;
using M = Matrix<double>;

namespace {

M random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  M m(r, c);
  init_uniform(m, scale, rng);
  return m;
}

template <typename P>
void randomize(P& p, Rng& rng, double scale) {
  p.visit("", [&](const std::string&, auto& m) { init_uniform(m, scale, rng); });
}

std::vector<int> prefix_mask(int rows, int real) {
  std::vector<int> m(static_cast<std::size_t>(rows), 0);
  std::fill_n(m.begin(), real, 1);
  return m;
}

template <typename T>
double output_loss(const LayerOutputs<T>& out, const std::vector<M>& weights) {
  double s = 0.0;
  for (std::size_t l = 0; l < out.size(); ++l) {
    s += (out[l].word.template cast<double>().array() * weights[2 * l].array()).sum();
    s += (out[l].chars.template cast<double>().array() * weights[2 * l + 1].array()).sum();
  }
  return s;
}

struct EncoderFixture {
  EncoderConfig cfg{2, 8, 2, 16, 0.0};
  EncoderParams<double> p{cfg};
  M word, chars;
  std::vector<int> mask = prefix_mask(6, 4);
  std::vector<M> weights;

  explicit EncoderFixture(std::uint64_t seed) {
    Rng rng(seed);
    randomize(p, rng, 0.5);
    word = random_matrix(6, 8, rng);
    chars = random_matrix(6, 8, rng);
    for (int i = 0; i < 2 * cfg.layers; ++i) weights.push_back(random_matrix(6, 8, rng));
  }

  LayerOutputs<double> douts() const {
    LayerOutputs<double> d;
    for (int l = 0; l < cfg.layers; ++l) d.push_back({weights[2 * l], weights[2 * l + 1]});
    return d;
  }
};

}  // namespace

TEST_CASE("attention rows sum to one over real tokens") {
  Rng rng(1);
  TransformerLayerParams<double> p(8, 16);
  randomize(p, rng, 0.8);
  const M x = random_matrix(7, 8, rng);
  AttentionCache<double> cache;
  self_attention(x, 5, p, 4, &cache);
  REQUIRE(cache.probs.size() == 4u);
  for (const auto& pr : cache.probs) {
    CHECK(pr.cols() == 5);
    for (Index i = 0; i < pr.rows(); ++i) CHECK(std::abs(pr.row(i).sum() - 1.0) < 1e-6);
  }
}

TEST_CASE("single real token attends to its own value") {
  Rng rng(2);
  TransformerLayerParams<double> p(8, 16);
  randomize(p, rng, 0.8);
  const M x = random_matrix(4, 8, rng);
  AttentionCache<double> cache;
  const M ctx = self_attention(x, 1, p, 2, &cache);
  for (Index i = 0; i < 4; ++i) CHECK((ctx.row(i) - cache.v.row(0)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("padding content never reaches real positions") {
  EncoderFixture f(3);
  const auto base = encode(f.word, f.chars, f.mask, f.cfg, f.p);
  M w2 = f.word, c2 = f.chars;
  Rng rng(4);
  w2.bottomRows(2) = random_matrix(2, 8, rng, 9.0);
  c2.bottomRows(2) = random_matrix(2, 8, rng, 9.0);
  std::swap(w2(4, 0), w2(5, 3));
  const auto moved = encode(w2, c2, f.mask, f.cfg, f.p);
  TransformerLayerParams<double>& tl = f.p.layers[0].transformer;
  CHECK((transformer_layer(w2, f.mask, tl, 2).topRows(4) - transformer_layer(f.word, f.mask, tl, 2).topRows(4))
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  for (std::size_t l = 0; l < base.size(); ++l) {
    CHECK((moved[l].word.topRows(4) - base[l].word.topRows(4)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((moved[l].chars.topRows(4) - base[l].chars.topRows(4)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("one layer gives one pair and shapes hold") {
  EncoderConfig cfg{1, 8, 2, 16, 0.0};
  EncoderParams<double> p(cfg);
  Rng rng(5);
  randomize(p, rng, 0.5);
  const auto out = encode<double>(random_matrix(6, 8, rng), random_matrix(6, 8, rng), prefix_mask(6, 3), cfg, p);
  REQUIRE(out.size() == 1u);
  CHECK(out[0].word.rows() == 6);
  CHECK(out[0].chars.cols() == 8);
}

TEST_CASE("config limits") {
  CHECK_THROWS(EncoderConfig{0, 8, 2, 16, 0.1}.validate());
  CHECK_THROWS(EncoderConfig{13, 8, 2, 16, 0.1}.validate());
  CHECK_THROWS(EncoderConfig{2, 10, 4, 16, 0.1}.validate());
  CHECK_THROWS(EncoderConfig{2, 8, 2, 16, 1.0}.validate());
  CHECK_NOTHROW(EncoderConfig{12, 8, 2, 16, 0.1}.validate());
}

TEST_CASE("without interaction weights the char channel is only renormalized") {
  EncoderFixture f(6);
  for (auto& layer : f.p.layers) layer.interaction = InteractionParams<double>(8);
  const auto out = encode(f.word, f.chars, f.mask, f.cfg, f.p);
  M prev = f.chars;
  for (const auto& o : out) {
    for (Index i = 0; i < prev.rows(); ++i) {
      const double mean = prev.row(i).mean();
      const double var = (prev.row(i).array() - mean).square().mean();
      const M want = ((prev.row(i).array() - mean) / std::sqrt(var + LayerNorm<double>::kEps)).matrix();
      CHECK((o.chars.row(i) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
    prev = o.chars;
  }
}

TEST_CASE("evaluation mode is deterministic") {
  EncoderFixture f(7);
  const auto a = encode(f.word, f.chars, f.mask, f.cfg, f.p);
  const auto b = encode(f.word, f.chars, f.mask, f.cfg, f.p);
  for (std::size_t l = 0; l < a.size(); ++l) CHECK(a[l].word == b[l].word);
}

TEST_CASE("encoder gradients at 64-bit") {
  EncoderFixture f(8);
  EncodeCache<double> cache;
  encode(f.word, f.chars, f.mask, f.cfg, f.p, Dropout{}, &cache);
  auto grad = zeros_like(f.p);
  encode_backward(f.douts(), cache, f.cfg, f.p, grad);
  const auto report = grad_check(
      f.p, grad, [&] { return output_loss(encode(f.word, f.chars, f.mask, f.cfg, f.p), f.weights); }, 12, 3);
  CHECK(report.entries.size() == collect_params<double>(f.p).size());
  for (const auto& e : report.entries) {
    INFO(e.name);
    CHECK(e.max_rel_error < 1e-4);
  }
}

TEST_CASE("encoder gradients at 32-bit") {
  EncoderFixture f(9);
  const EncoderParams<float> pf = cast_params<float>(f.p, EncoderParams<float>(f.cfg));
  EncodeCache<float> cache;
  const Matrix<float> wf = f.word.cast<float>(), cf = f.chars.cast<float>();
  encode(wf, cf, f.mask, f.cfg, pf, Dropout{}, &cache);
  LayerOutputs<float> d;
  for (const auto& s : f.douts()) d.push_back({s.word.cast<float>(), s.chars.cast<float>()});
  auto gf = zeros_like(pf);
  encode_backward(d, cache, f.cfg, pf, gf);
  // reference point is the float-rounded parameter set evaluated in double
  auto pd = cast_params<double>(pf, f.p);
  const M wd = wf.cast<double>(), cd = cf.cast<double>();
  const auto report = grad_check(
      pd, cast_params<double>(gf, f.p), [&] { return output_loss(encode(wd, cd, f.mask, f.cfg, pd), f.weights); },
      12, 4);
  for (const auto& e : report.entries) {
    INFO(e.name);
    CHECK(e.max_rel_error < 1e-3);
  }
}

TEST_CASE("input embeddings") {
  BpeVocab v;
  const auto seq = tokenize("http://a.b/c", v, 24);
  EmbeddingParams<double> emb(v.size(), 24, 8);
  CharChannelParams<double> chars(CharVocab::size(), 4, 4);
  Rng rng(10);
  emb.token = random_matrix(v.size(), 8, rng);
  randomize(chars, rng, 0.5);
  const auto out = input_embeddings(seq, emb, chars);
  CHECK(out.word.rows() == 24);
  CHECK(out.chars.bottomRows(24 - seq.subword_count).isZero(0.0));
  for (int i = 0; i < 24; ++i) CHECK(out.word.row(i) == emb.token.row(seq.subword_ids[static_cast<std::size_t>(i)]));
  const auto again = input_embeddings(tokenize("http://a.b/c", v, 24), emb, chars);
  CHECK(again.word == out.word);
  CHECK(again.chars == out.chars);
  CharChannelParams<double> narrow(CharVocab::size(), 4, 3);
  CHECK_THROWS(input_embeddings(seq, emb, narrow));
}
