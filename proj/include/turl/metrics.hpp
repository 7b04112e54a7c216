#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "turl/data_ingest.hpp"
#include "turl/model.hpp"

namespace turl {

/// K x K counts, rows = true class, columns = predicted.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::size_t> counts;

  std::size_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes) + static_cast<std::size_t>(pred)];
  }
  std::size_t total() const;
  double accuracy() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels, int classes);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// One-vs-rest counts for `positive`; a zero denominator gives 0.
Prf prf(const ConfusionMatrix& cm, int positive);

/// Mann-Whitney statistic over average ranks; positives are labels != 0.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocPoint {
  double threshold = 0.0;  // predict positive when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // starts at (0, 0) with an infinite threshold
  std::vector<std::pair<double, double>> tpr_at_fpr;
};

/// Thresholds sweep the distinct scores from high to low. The TPR for a
/// target is the best ROC point whose FPR does not exceed it; no interpolation.
RocResult roc_and_tpr_at_fpr(const std::vector<double>& scores, const std::vector<int>& labels,
                             const std::vector<double>& fpr_targets);

double tpr_at(const std::vector<RocPoint>& points, double fpr_target);

struct ClassReport {
  std::string name;
  Prf prf;
  std::size_t support = 0;
  std::optional<double> auc;
};

struct EvalReport {
  int positive = 1;  // binary positive class
  std::size_t samples = 0;
  double accuracy = 0.0;
  Prf aggregate;  // positive class when binary, macro otherwise
  Prf macro;
  std::optional<double> auc;  // positive-class AUC when binary, macro one-vs-rest otherwise
  std::vector<ClassReport> classes;
  ConfusionMatrix cm;
  std::vector<RocPoint> roc;        // binary: positive class; multi-class: micro average
  std::vector<RocPoint> macro_roc;  // multi-class only: mean one-vs-rest TPR on the union FPR grid
  std::vector<std::pair<double, double>> tpr_at_fpr;
};

/// Argmax decisions and per-class one-vs-rest scores from probability rows.
EvalReport multiclass_report(const std::vector<std::vector<double>>& probs, const std::vector<int>& labels,
                             const std::vector<std::string>& class_names, int positive = 1,
                             const std::vector<double>& fpr_targets = {0.01, 0.001});

nlohmann::ordered_json report_to_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

struct AblationRow {
  int layers = 0;
  EvalReport report;
};

/// Evaluates with only the last k layers feeding the pyramid, one row per k.
template <typename T>
std::vector<AblationRow> layer_ablation(const ModelParams<T>& p, const ModelConfig& cfg, const BpeVocab& vocab,
                                        const LabeledUrlSet& test, const std::vector<int>& ks, int positive = 1,
                                        const std::vector<double>& fpr_targets = {0.01, 0.001});

nlohmann::ordered_json ablation_to_json(const std::vector<AblationRow>& rows);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace turl
