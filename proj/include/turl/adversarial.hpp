#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "turl/data_ingest.hpp"
#include "turl/rng.hpp"

namespace turl {

/// One host label cut at hyphen runs and digit/letter transitions.
/// `separators[i]` sits between segments i and i+1: the hyphen run, or empty
/// for a transition.
struct HostLabel {
  std::vector<std::string> segments;
  std::vector<std::string> separators;

  std::string text() const;
};

struct HostSplit {
  std::string prefix;  // scheme and userinfo
  std::vector<HostLabel> labels;
  std::string suffix;  // port, path, query, fragment

  bool has_host() const { return !labels.empty(); }
  std::string host() const;
  std::string join() const { return prefix + host() + suffix; }
};

HostLabel split_label(const std::string& label);

/// Lossless: join() reproduces the input. Host-less inputs keep everything
/// in `suffix`.
HostSplit split_host(const std::string& url);

struct AttackConfig {
  std::vector<std::string> malicious_domains;
  double hyphen_probability = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Hyphenates transition boundaries of the labels in front of the registrable
/// domain (last two labels) and swaps that domain for a listed one. Returns
/// nothing for host-less input.
std::optional<std::string> compound_attack(const std::string& benign_url, const AttackConfig& cfg, Rng& rng);
std::optional<std::string> compound_attack(const std::string& benign_url, const AttackConfig& cfg);

struct AdvTestSpec {
  std::size_t benign = 80000;
  std::size_t malicious = 40000;
  std::size_t adversarial = 40000;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class AdvOrigin { Benign, Malicious, Adversarial };

struct AdvTestResult {
  LabeledUrlSet set;               // classes {benign, malicious}
  std::vector<AdvOrigin> origin;   // per record
  std::vector<std::string> source; // benign source of adversarial records, else empty
  std::size_t skipped = 0;         // host-less or duplicate candidates
};

AdvTestResult build_advtest(const std::vector<std::string>& benign_pool,
                            const std::vector<std::string>& malicious_pool, const AdvTestSpec& spec,
                            const AttackConfig& cfg);

/// One host per line; blank lines and '#' comments are ignored.
std::vector<std::string> load_domain_list(const std::filesystem::path& path);

}  // namespace turl
