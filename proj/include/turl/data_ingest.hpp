#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace turl {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UrlRecord {
  std::string url;
  int label = 0;
  std::string class_name;
};

struct LabeledUrlSet {
  std::vector<UrlRecord> records;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  /// Class id by name, or -1.
  int class_id(std::string_view name) const;
  /// Throws DataError when a record violates the set invariants.
  void validate() const;
};

struct DatasetSchema {
  std::string url_column = "url";
  std::string label_column = "label";
  /// Fixed class list; when empty, ids follow first-seen order.
  std::vector<std::string> classes;
  /// Optional label rewrite applied before class lookup ("0" -> "benign").
  std::map<std::string, std::string> relabel;
};

LabeledUrlSet parse_dataset(std::string_view text, const DatasetSchema& schema = {});
LabeledUrlSet load_dataset(const std::filesystem::path& path, const DatasetSchema& schema = {});
/// Writes the `url,label` comma-separated format read by load_dataset.
void write_dataset(std::ostream& out, const LabeledUrlSet& set);
void save_dataset(const std::filesystem::path& path, const LabeledUrlSet& set);

struct TldShare {
  double com = 0.0;
  double country_code = 0.0;
  double other = 0.0;
};

struct ClassStats {
  std::string name;
  std::size_t count = 0;
  double mean_length = 0.0;
  TldShare tld;
};

struct DatasetStats {
  std::vector<ClassStats> classes;
};

DatasetStats dataset_stats(const LabeledUrlSet& set);
/// Keys `classes`, `avg_length`, `tld`; per-class objects keyed by class name.
nlohmann::ordered_json stats_to_json(const DatasetStats& stats);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Per-class seeded shuffle, then round(r * n) records per split (the test
/// split takes the remainder). Index lists are returned sorted.
SplitIndices stratified_split_indices(const LabeledUrlSet& set, std::array<double, 3> ratios,
                                      std::uint64_t seed);

struct DatasetSplits {
  LabeledUrlSet train;
  LabeledUrlSet val;
  LabeledUrlSet test;
};

DatasetSplits stratified_split(const LabeledUrlSet& set, std::array<double, 3> ratios,
                               std::uint64_t seed);

LabeledUrlSet subset(const LabeledUrlSet& set, const std::vector<std::size_t>& indices);

/// Keeps round(fraction * n_c) records of every class, in original order.
LabeledUrlSet subsample(const LabeledUrlSet& set, double fraction, std::uint64_t seed);

}  // namespace turl
