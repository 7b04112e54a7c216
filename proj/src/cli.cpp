#include "turl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>

#include <CLI11.hpp>

#include "turl/adversarial.hpp"
#include "turl/checkpoint.hpp"
#include "turl/data_ingest.hpp"
#include "turl/metrics.hpp"
#include "turl/trainer.hpp"
#include "turl/url_parts.hpp"

namespace turl {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  std::string data, val, out, vocab;
  std::vector<std::string> relabel;
  double subsample_fraction = 1.0;
  int vocab_size = 1000;
  ModelConfig model;
  TrainConfig train;
  std::optional<std::uint64_t> shuffle_seed;
  bool no_f0 = false, no_spa_gelu = false;
};

struct EvalOptions {
  std::string ckpt, test, vocab, out = ".";
  std::vector<std::string> relabel;
  std::vector<int> ablate;
  std::vector<double> tpr_at = {0.01, 0.001};
  std::string positive;
  bool cross = false;
  int precision = 32;
};

struct ScoreOptions {
  std::string ckpt, in, out;
  int precision = 32;
};

struct AdvgenOptions {
  std::string in, malicious, domains, out;
  std::vector<std::string> relabel;
  std::vector<std::size_t> spec = {80000, 40000, 40000};
  double probability = 0.5;
  std::uint64_t seed = 1;
  std::string benign_class = "benign";
};

struct StatsOptions {
  std::string in, out;
  std::vector<std::string> relabel;
};

std::map<std::string, std::string> parse_relabel(const std::vector<std::string>& pairs) {
  std::map<std::string, std::string> out;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--relabel expects from=to pairs, got '" + p + "'");
    out[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return out;
}

int positive_class(const std::vector<std::string>& labels, const std::string& requested) {
  const std::string name = requested.empty() ? "malicious" : requested;
  const auto it = std::find(labels.begin(), labels.end(), name);
  if (it != labels.end()) return static_cast<int>(it - labels.begin());
  if (!requested.empty()) throw UsageError("--positive names an unknown class: " + requested);
  return 1;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

template <typename T>
int cmd_train(const TrainOptions& o, std::ostream& err) {
  DatasetSchema schema;
  schema.relabel = parse_relabel(o.relabel);
  LabeledUrlSet train_set = load_dataset(o.data, schema);
  if (train_set.num_classes() < 2) throw DataError("training data must contain at least two classes");
  if (o.subsample_fraction < 1.0) train_set = subsample(train_set, o.subsample_fraction, o.train.seed);
  schema.classes = train_set.class_names;
  const LabeledUrlSet val_set = load_dataset(o.val, schema);

  BpeVocab vocab;
  if (!o.vocab.empty()) {
    vocab = BpeVocab::load(o.vocab);
  } else {
    std::vector<std::string> corpus;
    for (const auto& r : train_set.records) corpus.push_back(r.url);
    vocab = train_bpe(corpus, o.vocab_size, Rng(o.train.seed).fork("bpe").seed());
  }

  ModelConfig mc = o.model;
  mc.vocab_size = vocab.size();
  mc.num_classes = train_set.num_classes();
  mc.dropout = o.train.dropout;
  mc.include_f0 = !o.no_f0;
  mc.spa_gelu = !o.no_spa_gelu;
  mc.validate();
  TrainConfig tc = o.train;
  tc.shuffle_seed = o.shuffle_seed.value_or(tc.seed);
  tc.validate();

  ModelParams<T> params(mc);
  Rng init = Rng(tc.seed).fork("init");
  params.init(init);
  const EncodedSet etrain = encode_set(train_set, vocab, mc.max_len);
  const EncodedSet eval = encode_set(val_set, vocab, mc.max_len);
  const auto result = train(params, mc, etrain, eval, tc, [&](const EpochLog& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %d train_loss %.6f val_loss %.6f\n", e.epoch, e.train_loss, e.val_loss);
    err << buf << std::flush;
  });

  fs::create_directories(o.out);
  const fs::path out(o.out);
  CheckpointMeta meta{mc, tc, train_set.class_names, vocab, result.best_val_loss, result.best_epoch};
  save_checkpoint(out / "model.ckpt", result.best, meta);
  vocab.save(out / "vocab.json");

  nlohmann::ordered_json log;
  log["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : result.log)
    log["epochs"].push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  log["best_epoch"] = result.best_epoch;
  log["best_val_loss"] = result.best_val_loss;
  write_text(out / "log.json", dump(log));

  nlohmann::ordered_json cfg;
  cfg["data"] = {{"train", o.data}, {"val", o.val}, {"subsample", o.subsample_fraction},
                 {"train_records", train_set.size()}, {"val_records", val_set.size()}};
  cfg["labels"] = train_set.class_names;
  cfg["vocab_hash"] = hash_hex(vocab.hash());
  cfg["model"] = mc.to_json();
  cfg["train"] = tc.to_json();
  write_text(out / "config.json", dump(cfg));
  return kExitOk;
}

template <typename T>
int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto ck = load_checkpoint<T>(o.ckpt);
  if (!o.vocab.empty() && BpeVocab::load(o.vocab).hash() != ck.meta.vocab.hash())
    throw std::runtime_error("vocabulary hash mismatch between " + o.vocab + " and the checkpoint");
  DatasetSchema schema;
  schema.classes = ck.meta.labels;
  schema.relabel = parse_relabel(o.relabel);
  const LabeledUrlSet test = load_dataset(o.test, schema);
  const int positive = positive_class(ck.meta.labels, o.positive);

  std::vector<std::string> urls;
  std::vector<int> labels;
  for (const auto& r : test.records) {
    urls.push_back(r.url);
    labels.push_back(r.label);
  }
  const auto probs = predict_probabilities(ck.params, ck.meta.model, ck.meta.vocab, urls);
  const EvalReport report = multiclass_report(probs, labels, ck.meta.labels, positive, o.tpr_at);

  fs::create_directories(o.out);
  const fs::path dir(o.out);
  nlohmann::ordered_json j = report_to_json(report);
  j["mode"] = o.cross ? "cross" : "standard";
  write_text(dir / "report.json", dump(j));
  const std::string table = report_table(report);
  write_text(dir / "report.txt", table);
  out << table;

  if (!o.ablate.empty()) {
    const auto rows = layer_ablation(ck.params, ck.meta.model, ck.meta.vocab, test, o.ablate, positive, o.tpr_at);
    write_text(dir / "ablation.json", dump(ablation_to_json(rows)));
    const std::string at = ablation_table(rows);
    write_text(dir / "ablation.txt", at);
    out << at;
  }
  return kExitOk;
}

template <typename T>
int cmd_score(const ScoreOptions& o, std::istream& in, std::ostream& out) {
  const auto ck = load_checkpoint<T>(o.ckpt);
  std::ifstream file;
  if (!o.in.empty() && o.in != "-") {
    file.open(o.in);
    if (!file) throw std::runtime_error("cannot open " + o.in);
  }
  std::istream& src = file.is_open() ? file : in;
  std::vector<std::string> urls;
  for (std::string line; std::getline(src, line);) {
    const std::string_view t = trim(line);
    if (!t.empty()) urls.emplace_back(t);
  }
  const auto probs = predict_probabilities(ck.params, ck.meta.model, ck.meta.vocab, urls);
  const int positive = positive_class(ck.meta.labels, "");
  const bool binary = ck.meta.labels.size() == 2;

  std::ofstream ofile;
  if (!o.out.empty()) {
    ofile.open(o.out, std::ios::binary | std::ios::trunc);
    if (!ofile) throw std::runtime_error("cannot write " + o.out);
  }
  std::ostream& dst = ofile.is_open() ? static_cast<std::ostream&>(ofile) : out;
  for (std::size_t i = 0; i < urls.size(); ++i) {
    const auto& p = probs[i];
    const auto pred = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    const double score = binary ? p[static_cast<std::size_t>(positive)] : p[pred];
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", score);
    dst << buf << '\t' << ck.meta.labels[pred] << '\t' << urls[i] << '\n';
  }
  return kExitOk;
}

int cmd_advgen(const AdvgenOptions& o, std::ostream& out, std::ostream& err) {
  if (o.spec.size() != 3) throw UsageError("--spec expects three counts: benign,malicious,adversarial");
  DatasetSchema schema;
  schema.relabel = parse_relabel(o.relabel);
  const LabeledUrlSet input = load_dataset(o.in, schema);
  std::vector<std::string> benign, malicious;
  for (const auto& r : input.records)
    (input.num_classes() == 1 || r.class_name == o.benign_class ? benign : malicious).push_back(r.url);
  if (!o.malicious.empty()) {
    malicious.clear();
    for (const auto& r : load_dataset(o.malicious, schema).records) malicious.push_back(r.url);
  }
  AttackConfig cfg{load_domain_list(o.domains), o.probability, o.seed};
  AdvTestSpec spec{o.spec[0], o.spec[1], o.spec[2], o.seed};
  const AdvTestResult result = build_advtest(benign, malicious, spec, cfg);
  if (result.skipped > 0) err << "skipped " << result.skipped << " unusable benign URLs\n";
  if (o.out.empty()) {
    write_dataset(out, result.set);
  } else {
    save_dataset(o.out, result.set);
  }
  return kExitOk;
}

int cmd_stats(const StatsOptions& o, std::ostream& out) {
  DatasetSchema schema;
  schema.relabel = parse_relabel(o.relabel);
  const std::string text = dump(stats_to_json(dataset_stats(load_dataset(o.in, schema))));
  if (o.out.empty()) {
    out << text;
  } else {
    write_text(o.out, text);
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"TransURL malicious URL detector"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  TrainOptions t;
  auto* train = app.add_subcommand("train", "Train a model and write model.ckpt, log.json and config.json");
  train->add_option("--data", t.data, "Training dataset (csv/tsv with url,label)")->required()->check(CLI::ExistingFile);
  train->add_option("--val", t.val, "Validation dataset")->required()->check(CLI::ExistingFile);
  train->add_option("--out", t.out, "Output directory")->required();
  train->add_option("--vocab", t.vocab, "Reuse an existing vocabulary file")->check(CLI::ExistingFile);
  train->add_option("--vocab-size", t.vocab_size, "Subword vocabulary size (bytes plus merges)")->capture_default_str();
  train->add_option("--relabel", t.relabel, "Label rewrites from=to")->delimiter(',');
  train->add_option("--subsample", t.subsample_fraction, "Keep this fraction of every training class")
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  train->add_option("--max-len", t.model.max_len, "Subword sequence length")->capture_default_str();
  train->add_option("--d-model", t.model.d_model, "Channel width")->capture_default_str();
  train->add_option("--heads", t.model.heads, "Attention heads")->capture_default_str();
  train->add_option("--d-ff", t.model.d_ff, "Feed-forward width")->capture_default_str();
  train->add_option("--layers", t.model.layers, "Encoder layers")->capture_default_str();
  train->add_option("--rates", t.model.rates, "Dilation rates")->delimiter(',')->capture_default_str();
  train->add_flag("--no-f0", t.no_f0, "Leave the common branch out of the multi-scale sum");
  train->add_flag("--no-spa-gelu", t.no_spa_gelu, "Drop the activation between the attention MLP layers");
  train->add_flag("--spa-pre", t.model.spa_pre, "1x1 channel mix before pyramid pooling");
  train->add_flag("--per-layer-fuse", t.model.per_layer_fuse, "One fuse kernel per layer");
  train->add_option("--epochs", t.train.epochs)->capture_default_str();
  train->add_option("--batch", t.train.batch_size)->capture_default_str();
  train->add_option("--lr", t.train.lr)->capture_default_str();
  train->add_option("--wd", t.train.weight_decay)->capture_default_str();
  train->add_option("--dropout", t.train.dropout)->capture_default_str();
  train->add_option("--warmup", t.train.warmup_steps, "Linear warmup steps")->capture_default_str();
  train->add_option("--seed", t.train.seed)->capture_default_str();
  train->add_option("--shuffle-seed", t.shuffle_seed, "Batch order seed (defaults to --seed)");
  train->add_option("--precision", t.train.precision)->check(CLI::IsMember({32, 64}))->capture_default_str();

  EvalOptions e;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write report.json/report.txt");
  eval->add_option("--ckpt", e.ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--test", e.test)->required()->check(CLI::ExistingFile);
  eval->add_option("--vocab", e.vocab, "Vocabulary that must match the checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--out", e.out, "Report directory")->capture_default_str();
  eval->add_option("--relabel", e.relabel)->delimiter(',');
  eval->add_option("--ablate", e.ablate, "Layer counts, e.g. 2,3,4,5")->delimiter(',');
  eval->add_option("--tpr-at", e.tpr_at, "FPR targets")->delimiter(',')->capture_default_str();
  eval->add_option("--positive", e.positive, "Positive class name");
  eval->add_flag("--cross", e.cross, "Foreign test file scored with the checkpoint vocabulary");
  eval->add_option("--precision", e.precision)->check(CLI::IsMember({32, 64}))->capture_default_str();

  ScoreOptions s;
  auto* score = app.add_subcommand("score", "Score URLs, one per line: score<TAB>class<TAB>url");
  score->add_option("--ckpt", s.ckpt)->required()->check(CLI::ExistingFile);
  score->add_option("--in", s.in, "Input file (default: standard input)");
  score->add_option("--out", s.out, "Output file (default: standard output)");
  score->add_option("--precision", s.precision)->check(CLI::IsMember({32, 64}))->capture_default_str();

  AdvgenOptions a;
  auto* advgen = app.add_subcommand("advgen", "Build an adversarial test set");
  advgen->add_option("--in", a.in, "Dataset holding the benign pool")->required()->check(CLI::ExistingFile);
  advgen->add_option("--domains", a.domains, "Malicious host list, one per line")->required()->check(CLI::ExistingFile);
  advgen->add_option("--malicious", a.malicious, "Dataset holding the malicious pool")->check(CLI::ExistingFile);
  advgen->add_option("--benign-class", a.benign_class)->capture_default_str();
  advgen->add_option("--relabel", a.relabel)->delimiter(',');
  advgen->add_option("--spec", a.spec, "benign,malicious,adversarial counts")->delimiter(',')->capture_default_str();
  advgen->add_option("--prob", a.probability, "Hyphen insertion probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  advgen->add_option("--seed", a.seed)->capture_default_str();
  advgen->add_option("--out", a.out, "Output dataset (default: standard output)");

  StatsOptions st;
  auto* stats = app.add_subcommand("stats", "Per-class length and TLD statistics as JSON");
  stats->add_option("--in", st.in)->required()->check(CLI::ExistingFile);
  stats->add_option("--relabel", st.relabel)->delimiter(',');
  stats->add_option("--out", st.out, "Output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return t.train.precision == 64 ? cmd_train<double>(t, err) : cmd_train<float>(t, err);
    if (*eval) return e.precision == 64 ? cmd_eval<double>(e, out) : cmd_eval<float>(e, out);
    if (*score) return s.precision == 64 ? cmd_score<double>(s, in, out) : cmd_score<float>(s, in, out);
    if (*advgen) return cmd_advgen(a, out, err);
    if (*stats) return cmd_stats(st, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err);
}

}  // namespace turl
