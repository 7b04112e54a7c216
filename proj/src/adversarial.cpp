#include "turl/adversarial.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "turl/url_parts.hpp"

namespace turl {

std::string HostLabel::text() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i > 0) out += separators[i - 1];
    out += segments[i];
  }
  return out;
}

std::string HostSplit::host() const {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += '.';
    out += labels[i].text();
  }
  return out;
}

namespace {

enum class CharKind { Digit, Alpha, Other };

CharKind kind(char c) {
  const auto u = static_cast<unsigned char>(c);
  if (std::isdigit(u)) return CharKind::Digit;
  if (std::isalpha(u)) return CharKind::Alpha;
  return CharKind::Other;
}

}  // namespace

HostLabel split_label(const std::string& label) {
  HostLabel out;
  out.segments.emplace_back();
  std::size_t i = 0;
  while (i < label.size()) {
    if (label[i] == '-') {
      std::size_t j = i;
      while (j < label.size() && label[j] == '-') ++j;
      out.separators.push_back(label.substr(i, j - i));
      out.segments.emplace_back();
      i = j;
      continue;
    }
    std::string& seg = out.segments.back();
    if (!seg.empty()) {
      const CharKind a = kind(seg.back()), b = kind(label[i]);
      if (a != b && a != CharKind::Other && b != CharKind::Other) {
        out.separators.emplace_back();
        out.segments.emplace_back();
      }
    }
    out.segments.back() += label[i];
    ++i;
  }
  return out;
}

HostSplit split_host(const std::string& url) {
  const UrlParts parts = parse_url_parts(url);
  HostSplit out;
  if (parts.host.empty()) {
    out.suffix = url;
    return out;
  }
  out.prefix = parts.scheme + parts.userinfo;
  out.suffix = parts.port + parts.rest;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = parts.host.find('.', start);
    out.labels.push_back(split_label(parts.host.substr(start, dot == std::string::npos ? std::string::npos : dot - start)));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return out;
}

void AttackConfig::validate() const {
  if (malicious_domains.empty()) throw std::invalid_argument("attack: malicious domain list is empty");
  if (!(hyphen_probability >= 0.0 && hyphen_probability <= 1.0))
    throw std::invalid_argument("attack: hyphen probability must be in [0, 1]");
}

std::optional<std::string> compound_attack(const std::string& benign_url, const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  HostSplit split = split_host(benign_url);
  if (!split.has_host()) return std::nullopt;
  const std::size_t keep = split.labels.size() >= 2 ? split.labels.size() - 2 : 0;
  const std::string& domain = cfg.malicious_domains[rng.below(cfg.malicious_domains.size())];

  std::string host;
  for (std::size_t l = 0; l < keep; ++l) {
    HostLabel& label = split.labels[l];
    for (auto& sep : label.separators)
      if (sep.empty() && rng.bernoulli(cfg.hyphen_probability)) sep = "-";
    host += label.text();
    host += '.';
  }
  host += domain;
  return split.prefix + host + split.suffix;
}

std::optional<std::string> compound_attack(const std::string& benign_url, const AttackConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork("attack");
  return compound_attack(benign_url, cfg, rng);
}

void AdvTestSpec::validate() const {
  if (benign < 1 || malicious < 1 || adversarial < 1)
    throw std::invalid_argument("advtest: every count must be >= 1");
}

AdvTestResult build_advtest(const std::vector<std::string>& benign_pool,
                            const std::vector<std::string>& malicious_pool, const AdvTestSpec& spec,
                            const AttackConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (benign_pool.size() < spec.benign + spec.adversarial || malicious_pool.size() < spec.malicious)
    throw DataError("advtest: insufficient pool for the requested counts");

  const Rng root(spec.seed);
  std::vector<std::size_t> benign_order(benign_pool.size()), malicious_order(malicious_pool.size());
  for (std::size_t i = 0; i < benign_order.size(); ++i) benign_order[i] = i;
  for (std::size_t i = 0; i < malicious_order.size(); ++i) malicious_order[i] = i;
  Rng rb = root.fork("benign"), rm = root.fork("malicious");
  rb.shuffle(benign_order.begin(), benign_order.end());
  rm.shuffle(malicious_order.begin(), malicious_order.end());

  AdvTestResult out;
  out.set.class_names = {"benign", "malicious"};
  auto add = [&](const std::string& url, int label, AdvOrigin origin, const std::string& source) {
    out.set.records.push_back({url, label, out.set.class_names[static_cast<std::size_t>(label)]});
    out.origin.push_back(origin);
    out.source.push_back(source);
  };

  std::unordered_set<std::string> retained;
  for (std::size_t i = 0; i < spec.benign; ++i) {
    const std::string& url = benign_pool[benign_order[i]];
    retained.insert(url);
    add(url, 0, AdvOrigin::Benign, "");
  }
  for (std::size_t i = 0; i < spec.malicious; ++i) add(malicious_pool[malicious_order[i]], 1, AdvOrigin::Malicious, "");

  const Rng attack_root = Rng(cfg.seed).fork("attack");
  std::size_t made = 0;
  for (std::size_t i = spec.benign; i < benign_order.size() && made < spec.adversarial; ++i) {
    const std::string& src = benign_pool[benign_order[i]];
    if (retained.count(src)) {
      ++out.skipped;
      continue;
    }
    Rng rng = attack_root.fork("url", i);
    const auto adv = compound_attack(src, cfg, rng);
    if (!adv) {
      ++out.skipped;
      continue;
    }
    add(*adv, 1, AdvOrigin::Adversarial, src);
    ++made;
  }
  if (made < spec.adversarial) throw DataError("advtest: insufficient usable benign URLs for adversarial samples");

  std::vector<std::size_t> order(out.set.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng ro = root.fork("order");
  ro.shuffle(order.begin(), order.end());
  AdvTestResult shuffled;
  shuffled.set.class_names = out.set.class_names;
  shuffled.skipped = out.skipped;
  for (std::size_t i : order) {
    shuffled.set.records.push_back(out.set.records[i]);
    shuffled.origin.push_back(out.origin[i]);
    shuffled.source.push_back(out.source[i]);
  }
  return shuffled;
}

std::vector<std::string> load_domain_list(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open domain list " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(t);
  }
  if (out.empty()) throw DataError("domain list is empty: " + path.string());
  return out;
}

}  // namespace turl
