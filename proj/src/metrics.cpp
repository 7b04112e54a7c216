#include "turl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace turl {

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  if (n == 0) return 0.0;
  std::size_t diag = 0;
  for (int c = 0; c < classes; ++c) diag += at(c, c);
  return static_cast<double>(diag) / static_cast<double>(n);
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, int classes) {
  if (preds.size() != labels.size()) throw std::invalid_argument("confusion: length mismatch");
  if (classes < 1) throw std::invalid_argument("confusion: classes must be >= 1");
  ConfusionMatrix cm{classes, std::vector<std::size_t>(static_cast<std::size_t>(classes * classes), 0)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || labels[i] < 0 || labels[i] >= classes)
      throw std::out_of_range("confusion: class id out of range");
    ++cm.counts[static_cast<std::size_t>(labels[i] * classes + preds[i])];
  }
  return cm;
}

Prf prf(const ConfusionMatrix& cm, int positive) {
  std::size_t tp = cm.at(positive, positive), fp = 0, fn = 0;
  for (int c = 0; c < cm.classes; ++c) {
    if (c == positive) continue;
    fp += cm.at(c, positive);
    fn += cm.at(positive, c);
  }
  Prf r;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

namespace {

void require_both_classes(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("length mismatch between scores and labels");
  const auto pos = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw std::invalid_argument("AUC undefined: both classes must be present");
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require_both_classes(scores, labels);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[idx[k]] != 0) {
        pos_rank_sum += rank;
        ++pos;
      }
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(scores.size() - pos);
  return (pos_rank_sum - p * (p + 1) / 2) / (p * n);
}

double tpr_at(const std::vector<RocPoint>& points, double fpr_target) {
  double best = 0.0;
  for (const auto& pt : points)
    if (pt.fpr <= fpr_target) best = std::max(best, pt.tpr);
  return best;
}

RocResult roc_and_tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                             const std::vector<double>& fpr_targets) {
  require_both_classes(scores, labels);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const auto P = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const double N = static_cast<double>(labels.size()) - P;
  RocResult r;
  r.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    const double s = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == s) {
      (labels[idx[i]] != 0 ? tp : fp) += 1;
      ++i;
    }
    r.points.push_back({s, static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  for (double t : fpr_targets) r.tpr_at_fpr.emplace_back(t, tpr_at(r.points, t));
  return r;
}

namespace {

/// TPR of a step ROC curve at fpr x: the highest TPR reached at FPR <= x.
double curve_tpr(const std::vector<RocPoint>& pts, double x) { return tpr_at(pts, x); }

}  // namespace

EvalReport multiclass_report(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
                             const std::vector<std::string>& class_names, int positive,
                             const std::vector<double>& fpr_targets) {
  const int K = static_cast<int>(class_names.size());
  if (K < 2) throw std::invalid_argument("report: at least two classes are required");
  if (probs.size() != labels.size()) throw std::invalid_argument("report: length mismatch");
  if (positive < 0 || positive >= K) throw std::out_of_range("report: positive class out of range");
  std::vector<int> preds;
  for (const auto& row : probs) {
    if (static_cast<int>(row.size()) != K) throw std::invalid_argument("report: probability row width mismatch");
    preds.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  EvalReport r;
  r.positive = positive;
  r.samples = labels.size();
  r.cm = confusion(preds, labels, K);
  r.accuracy = r.cm.accuracy();

  std::vector<std::vector<RocPoint>> curves;
  double auc_sum = 0.0;
  int auc_count = 0;
  for (int c = 0; c < K; ++c) {
    ClassReport cr{class_names[static_cast<std::size_t>(c)], prf(r.cm, c), 0, std::nullopt};
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s.push_back(probs[i][static_cast<std::size_t>(c)]);
      y.push_back(labels[i] == c ? 1 : 0);
      if (labels[i] == c) ++cr.support;
    }
    if (cr.support > 0 && cr.support < labels.size()) {
      cr.auc = auc(s, y);
      auc_sum += *cr.auc;
      ++auc_count;
      curves.push_back(roc_and_tpr_at_fpr(s, y, {}).points);
    }
    r.macro.precision += cr.prf.precision / K;
    r.macro.recall += cr.prf.recall / K;
    r.macro.f1 += cr.prf.f1 / K;
    r.classes.push_back(cr);
  }

  if (K == 2) {
    r.aggregate = r.classes[static_cast<std::size_t>(positive)].prf;
    r.auc = r.classes[static_cast<std::size_t>(positive)].auc;
    if (r.auc) {
      std::vector<double> s;
      std::vector<int> y;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        s.push_back(probs[i][static_cast<std::size_t>(positive)]);
        y.push_back(labels[i] == positive ? 1 : 0);
      }
      const RocResult roc = roc_and_tpr_at_fpr(s, y, fpr_targets);
      r.roc = roc.points;
      r.tpr_at_fpr = roc.tpr_at_fpr;
    }
    return r;
  }

  r.aggregate = r.macro;
  if (auc_count == K) r.auc = auc_sum / K;
  std::vector<double> s;
  std::vector<int> y;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (int c = 0; c < K; ++c) {
      s.push_back(probs[i][static_cast<std::size_t>(c)]);
      y.push_back(labels[i] == c ? 1 : 0);
    }
  const RocResult micro = roc_and_tpr_at_fpr(s, y, fpr_targets);
  r.roc = micro.points;
  r.tpr_at_fpr = micro.tpr_at_fpr;
  if (!curves.empty()) {
    std::vector<double> grid;
    for (const auto& c : curves)
      for (const auto& p : c) grid.push_back(p.fpr);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (double x : grid) {
      double t = 0.0;
      for (const auto& c : curves) t += curve_tpr(c, x);
      r.macro_roc.push_back({std::numeric_limits<double>::quiet_NaN(), x, t / static_cast<double>(curves.size())});
    }
  }
  return r;
}

namespace {

std::string fixed4(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string target_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

nlohmann::ordered_json roc_json(const std::vector<RocPoint>& pts, bool with_threshold) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& p : pts) {
    nlohmann::ordered_json j;
    if (with_threshold) j["threshold"] = std::isinf(p.threshold) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(p.threshold);
    j["fpr"] = p.fpr;
    j["tpr"] = p.tpr;
    a.push_back(j);
  }
  return a;
}

nlohmann::ordered_json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

}  // namespace

nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.aggregate.precision;
  j["recall"] = r.aggregate.recall;
  j["f1"] = r.aggregate.f1;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  if (r.classes.size() == 2) {
    j["roc"] = roc_json(r.roc, true);
  } else {
    j["roc"] = {{"micro", roc_json(r.roc, true)}, {"macro", roc_json(r.macro_roc, false)}};
  }
  nlohmann::ordered_json t = nlohmann::ordered_json::object();
  for (const auto& [target, tpr] : r.tpr_at_fpr) t[target_key(target)] = tpr;
  j["tpr_at_fpr"] = t;
  j["macro"] = prf_json(r.macro);
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& c : r.classes) {
    nlohmann::ordered_json cj = {{"name", c.name}};
    cj.update(prf_json(c.prf));
    cj["support"] = c.support;
    cj["auc"] = c.auc ? nlohmann::ordered_json(*c.auc) : nlohmann::ordered_json(nullptr);
    classes.push_back(cj);
  }
  j["classes"] = classes;
  nlohmann::ordered_json cm = nlohmann::ordered_json::array();
  for (int a = 0; a < r.cm.classes; ++a) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int b = 0; b < r.cm.classes; ++b) row.push_back(r.cm.at(a, b));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  return j;
}

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s %10s %9s\n", "class", "precision", "recall", "f1", "auc", "support");
  os << buf;
  for (const auto& c : r.classes) {
    std::snprintf(buf, sizeof buf, "%-16s %10.4f %10.4f %10.4f %10s %9zu\n", c.name.c_str(), c.prf.precision,
                  c.prf.recall, c.prf.f1, fixed4(c.auc).c_str(), c.support);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-16s %10.4f %10.4f %10.4f\n", "macro", r.macro.precision, r.macro.recall, r.macro.f1);
  os << buf;
  std::snprintf(buf, sizeof buf, "accuracy %.4f  auc %s\n", r.accuracy, fixed4(r.auc).c_str());
  os << buf;
  for (const auto& [target, tpr] : r.tpr_at_fpr) {
    std::snprintf(buf, sizeof buf, "tpr@fpr=%s %.4f\n", target_key(target).c_str(), tpr);
    os << buf;
  }
  return os.str();
}

template <typename T>
std::vector<AblationRow> layer_ablation(const ModelParams<T>& p, const ModelConfig& cfg, const BpeVocab& vocab,
                                        const LabeledUrlSet& test, const std::vector<int>& ks, int positive,
                                        const std::vector<double>& fpr_targets) {
  if (test.empty()) throw std::invalid_argument("ablation: empty test set");
  std::vector<std::string> urls;
  std::vector<int> labels;
  for (const auto& rec : test.records) {
    urls.push_back(rec.url);
    labels.push_back(rec.label);
  }
  std::vector<std::string> names = test.class_names;
  names.resize(static_cast<std::size_t>(cfg.num_classes));
  std::vector<AblationRow> rows;
  for (int k : ks) {
    if (k < 1 || k > cfg.layers)
      throw std::out_of_range("ablation: layer count " + std::to_string(k) + " outside [1, " + std::to_string(cfg.layers) + "]");
    rows.push_back({k, multiclass_report(predict_probabilities(p, cfg, vocab, urls, k), labels, names, positive, fpr_targets)});
  }
  return rows;
}

nlohmann::ordered_json ablation_to_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json j = {{"layers", row.layers}};
    j.update(report_to_json(row.report));
    a.push_back(j);
  }
  return a;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%6s %10s %10s %10s %10s %10s\n", "layers", "accuracy", "precision", "recall", "f1", "auc");
  os << buf;
  for (const auto& row : rows) {
    const auto& r = row.report;
    std::snprintf(buf, sizeof buf, "%6d %10.4f %10.4f %10.4f %10.4f %10s\n", row.layers, r.accuracy, r.aggregate.precision,
                  r.aggregate.recall, r.aggregate.f1, fixed4(r.auc).c_str());
    os << buf;
  }
  return os.str();
}

template std::vector<AblationRow> layer_ablation(const ModelParams<float>&, const ModelConfig&, const BpeVocab&,
                                                 const LabeledUrlSet&, const std::vector<int>&, int,
                                                 const std::vector<double>&);
template std::vector<AblationRow> layer_ablation(const ModelParams<double>&, const ModelConfig&, const BpeVocab&,
                                                 const LabeledUrlSet&, const std::vector<int>&, int,
                                                 const std::vector<double>&);

}  // namespace turl
