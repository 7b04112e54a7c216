#include <doctest.h>

#include "oracles.hpp"
#include "turl/metrics.hpp"

using namespace turl;

TEST_CASE("confusion matrix") {
  const auto cm = confusion({1, 0, 1, 1}, {1, 0, 0, 1}, 2);
  CHECK(cm.at(1, 1) == 2u);  // TP
  CHECK(cm.at(0, 1) == 1u);  // FP
  CHECK(cm.at(1, 0) == 0u);  // FN
  CHECK(cm.at(0, 0) == 1u);  // TN
  CHECK(cm.total() == 4u);
  CHECK(cm.accuracy() == 0.75);
  const auto diag = confusion({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(diag.at(i, j) == 0u);
  const auto anti = confusion({1, 0, 1}, {0, 1, 0}, 2);
  CHECK(anti.at(0, 0) + anti.at(1, 1) == 0u);
  CHECK_THROWS(confusion({1}, {1, 0}, 2));
}

TEST_CASE("precision recall f1") {
  ConfusionMatrix cm{2, {0, 2, 0, 8}};  // rows truth, cols predicted
  const auto r = prf(cm, 1);
  CHECK(r.precision == 0.8);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  const auto none = prf(ConfusionMatrix{2, {5, 0, 3, 0}}, 1);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  const auto perfect = prf(confusion({1, 0, 1}, {1, 0, 1}, 2), 1);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
}

TEST_CASE("auc") {
  CHECK(auc({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == 0.75);
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  CHECK_THROWS_WITH(auc({0.1, 0.2}, {1, 1}), doctest::Contains("AUC undefined"));
}

TEST_CASE("auc is invariant under monotone transforms") {
  Rng rng(1);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    s.push_back(std::round(rng.uniform() * 20.0) / 20.0);
    y.push_back(static_cast<int>(rng.below(2)));
  }
  std::vector<double> t;
  for (double v : s) t.push_back(std::exp(3.0 * v) - 7.0);
  CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("roc special cases") {
  const auto perfect = roc_and_tpr_at_fpr({0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0}, {0.01, 0.001});
  CHECK(perfect.tpr_at_fpr[0].second == 1.0);
  CHECK(perfect.tpr_at_fpr[1].second == 1.0);
  const auto flat = roc_and_tpr_at_fpr({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}, {0.01});
  REQUIRE(flat.points.size() == 2u);
  CHECK(flat.points[1].fpr == 1.0);
  CHECK(flat.points[1].tpr == 1.0);
  CHECK(flat.tpr_at_fpr[0].second == 0.0);
}

TEST_CASE("six sample roc against threshold enumeration") {
  const std::vector<double> s = {0.95, 0.7, 0.7, 0.4, 0.3, 0.1};
  const std::vector<int> y = {1, 0, 1, 1, 0, 0};
  const auto got = roc_and_tpr_at_fpr(s, y, {0.0, 0.3, 0.34, 1.0});
  const auto want = oracle::roc(s, y);
  REQUIRE(got.points.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(got.points[i].threshold == want[i].threshold);
    CHECK(got.points[i].fpr == want[i].fpr);
    CHECK(got.points[i].tpr == want[i].tpr);
  }
  CHECK(got.tpr_at_fpr[0].second == 1.0 / 3.0);
  CHECK(got.tpr_at_fpr[1].second == 1.0 / 3.0);
  CHECK(got.tpr_at_fpr[2].second == 1.0);
  CHECK(got.tpr_at_fpr[3].second == 1.0);
  for (std::size_t i = 1; i < got.points.size(); ++i) {
    CHECK(got.points[i].fpr >= got.points[i - 1].fpr);
    CHECK(got.points[i].tpr >= got.points[i - 1].tpr);
  }
}

TEST_CASE("binary report") {
  const std::vector<std::vector<double>> probs = {{0.1, 0.9}, {0.8, 0.2}, {0.4, 0.6}, {0.3, 0.7}};
  const std::vector<int> labels = {1, 0, 0, 1};
  const auto r = multiclass_report(probs, labels, {"benign", "malicious"}, 1);
  const auto cm = confusion({1, 0, 1, 1}, labels, 2);
  CHECK(r.accuracy == 0.75);
  CHECK(r.aggregate.precision == prf(cm, 1).precision);
  CHECK(r.classes[1].prf.f1 == prf(cm, 1).f1);
  CHECK(*r.auc == auc({0.9, 0.2, 0.6, 0.7}, labels));
  const auto j = report_to_json(r);
  for (const char* key : {"accuracy", "precision", "recall", "f1", "auc", "roc", "tpr_at_fpr"}) CHECK(j.contains(key));
  CHECK(j["tpr_at_fpr"].contains("0.01"));
  CHECK(j["tpr_at_fpr"].contains("0.001"));
  CHECK(report_table(r).find("malicious") != std::string::npos);
}

TEST_CASE("perfect four class report") {
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> p(4, 0.1);
    p[static_cast<std::size_t>(i % 4)] = 0.7;
    probs.push_back(p);
    labels.push_back(i % 4);
  }
  const auto r = multiclass_report(probs, labels, {"benign", "defacement", "phishing", "malware"});
  CHECK(r.macro.f1 == 1.0);
  CHECK(r.accuracy == 1.0);
  CHECK_FALSE(r.macro_roc.empty());
}

TEST_CASE("random four class report equals per-class recomputation") {
  Rng rng(2);
  std::vector<std::vector<double>> probs;
  std::vector<int> labels;
  std::vector<int> preds;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> p(4);
    double s = 0;
    for (auto& v : p) s += (v = rng.uniform() + 1e-3);
    for (auto& v : p) v /= s;
    probs.push_back(p);
    labels.push_back(i < 4 ? i : static_cast<int>(rng.below(4)));
    preds.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  const auto r = multiclass_report(probs, labels, {"a", "b", "c", "d"});
  double mp = 0, mr = 0, mf = 0;
  for (int c = 0; c < 4; ++c) {
    const auto want = oracle::prf(oracle::count(preds, labels, c));
    CHECK(r.classes[static_cast<std::size_t>(c)].prf.precision == want.p);
    CHECK(r.classes[static_cast<std::size_t>(c)].prf.recall == want.r);
    CHECK(r.classes[static_cast<std::size_t>(c)].prf.f1 == want.f);
    mp += want.p / 4;
    mr += want.r / 4;
    mf += want.f / 4;
  }
  CHECK(r.macro.precision == doctest::Approx(mp).epsilon(1e-15));
  CHECK(r.macro.recall == doctest::Approx(mr).epsilon(1e-15));
  CHECK(r.macro.f1 == doctest::Approx(mf).epsilon(1e-15));
}
