#include "turl/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "turl/rng.hpp"
#include "turl/url_parts.hpp"

namespace turl {

namespace {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// RFC 4180-style reader: quoted fields may contain delimiters, doubled
/// quotes and newlines. Blank lines are skipped.
std::vector<CsvRow> read_rows(std::string_view text, char delim) {
  std::vector<CsvRow> rows;
  std::size_t i = 0;
  std::size_t line = 1;
  while (i < text.size()) {
    CsvRow row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    bool any_content = false;
    while (i < text.size() && !row_done) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty()) {
        in_quotes = true;
        any_content = true;
        ++i;
      } else if (c == delim) {
        row.fields.push_back(std::move(field));
        field.clear();
        any_content = true;
        ++i;
      } else if (c == '\r' || c == '\n') {
        if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++i;
        ++line;
        row_done = true;
      } else {
        field += c;
        any_content = true;
        ++i;
      }
    }
    if (in_quotes) throw DataError("malformed row " + std::to_string(row.line) + ": unterminated quote");
    if (!any_content) continue;
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

char detect_delimiter(std::string_view text) {
  const auto eol = text.find_first_of("\r\n");
  const auto header = text.substr(0, eol);
  return header.find('\t') != std::string_view::npos ? '\t' : ',';
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (std::string(trim(header[i])) == name) return i;
  throw DataError("missing column '" + name + "' in header");
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

int LabeledUrlSet::class_id(std::string_view name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<int>(i);
  return -1;
}

void LabeledUrlSet::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (trim(r.url).empty()) throw DataError("record " + std::to_string(i) + ": empty url");
    if (r.label < 0 || r.label >= num_classes())
      throw DataError("record " + std::to_string(i) + ": label out of range");
  }
}

LabeledUrlSet parse_dataset(std::string_view text, const DatasetSchema& schema) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  const auto rows = read_rows(text, detect_delimiter(text));
  if (rows.size() < 2) throw DataError("no records");

  const auto& header = rows.front().fields;
  const std::size_t url_col = column_index(header, schema.url_column);
  const std::size_t label_col = column_index(header, schema.label_column);
  const std::size_t needed = std::max(url_col, label_col) + 1;

  LabeledUrlSet set;
  set.class_names = schema.classes;
  const bool fixed = !schema.classes.empty();
  set.records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() < needed)
      throw DataError("malformed row " + std::to_string(row.line) + ": expected at least " +
                      std::to_string(needed) + " fields");
    const auto url = trim(row.fields[url_col]);
    if (url.empty()) throw DataError("malformed row " + std::to_string(row.line) + ": empty url");
    std::string label(trim(row.fields[label_col]));
    if (auto it = schema.relabel.find(label); it != schema.relabel.end()) label = it->second;
    int id = set.class_id(label);
    if (id < 0) {
      if (fixed)
        throw DataError("row " + std::to_string(row.line) + ": unknown label '" + label + "'");
      id = set.num_classes();
      set.class_names.push_back(label);
    }
    set.records.push_back({std::string(url), id, label});
  }
  return set;
}

LabeledUrlSet load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema);
}

void write_dataset(std::ostream& out, const LabeledUrlSet& set) {
  out << "url,label\n";
  for (const auto& r : set.records)
    out << quote_csv(r.url) << ',' << quote_csv(set.class_names.at(static_cast<std::size_t>(r.label))) << '\n';
}

void save_dataset(const std::filesystem::path& path, const LabeledUrlSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file: " + path.string());
  write_dataset(out, set);
}

DatasetStats dataset_stats(const LabeledUrlSet& set) {
  if (set.empty()) throw DataError("no records");
  const auto k = static_cast<std::size_t>(set.num_classes());
  std::vector<std::size_t> count(k, 0);
  std::vector<std::size_t> total_length(k, 0);
  std::vector<std::array<std::size_t, 3>> tld(k, {0, 0, 0});
  for (const auto& r : set.records) {
    const auto c = static_cast<std::size_t>(r.label);
    ++count[c];
    total_length[c] += r.url.size();
    const auto parts = parse_url_parts(r.url);
    ++tld[c][static_cast<std::size_t>(classify_tld(parts.host))];
  }
  // integer accumulation keeps the result independent of record order
  DatasetStats stats;
  for (std::size_t c = 0; c < k; ++c) {
    ClassStats cs;
    cs.name = set.class_names[c];
    cs.count = count[c];
    if (count[c] > 0) {
      const double n = static_cast<double>(count[c]);
      cs.mean_length = static_cast<double>(total_length[c]) / n;
      cs.tld.com = static_cast<double>(tld[c][0]) / n;
      cs.tld.country_code = static_cast<double>(tld[c][1]) / n;
      cs.tld.other = static_cast<double>(tld[c][2]) / n;
    }
    stats.classes.push_back(cs);
  }
  return stats;
}

nlohmann::ordered_json stats_to_json(const DatasetStats& stats) {
  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  nlohmann::ordered_json avg = nlohmann::ordered_json::object();
  nlohmann::ordered_json tld = nlohmann::ordered_json::object();
  for (const auto& c : stats.classes) {
    classes[c.name] = c.count;
    avg[c.name] = c.mean_length;
    tld[c.name] = {{"com", c.tld.com}, {"ccTLD", c.tld.country_code}, {"other", c.tld.other}};
  }
  return {{"classes", classes}, {"avg_length", avg}, {"tld", tld}};
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const LabeledUrlSet& set) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(set.num_classes()));
  for (std::size_t i = 0; i < set.records.size(); ++i)
    by_class.at(static_cast<std::size_t>(set.records[i].label)).push_back(i);
  return by_class;
}

}  // namespace

SplitIndices stratified_split_indices(const LabeledUrlSet& set, std::array<double, 3> ratios,
                                      std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("ratios must sum to 1");
  for (double r : ratios)
    if (!(r > 0.0)) throw std::invalid_argument("every split ratio must be positive");

  const Rng root(seed);
  SplitIndices out;
  const auto by_class = indices_by_class(set);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    const auto n = idx.size();
    if (n == 0) continue;
    const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
    if (n < 3 || n_train == 0 || n_val == 0 || n_train + n_val >= n)
      throw DataError("class '" + set.class_names[c] + "' too small to appear in all splits");
    Rng rng = root.fork("stratified_split", c);
    rng.shuffle(idx.begin(), idx.end());
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
    out.val.insert(out.val.end(), idx.begin() + static_cast<long>(n_train),
                   idx.begin() + static_cast<long>(n_train + n_val));
    out.test.insert(out.test.end(), idx.begin() + static_cast<long>(n_train + n_val), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

LabeledUrlSet subset(const LabeledUrlSet& set, const std::vector<std::size_t>& indices) {
  LabeledUrlSet out;
  out.class_names = set.class_names;
  out.records.reserve(indices.size());
  for (auto i : indices) out.records.push_back(set.records.at(i));
  return out;
}

DatasetSplits stratified_split(const LabeledUrlSet& set, std::array<double, 3> ratios,
                               std::uint64_t seed) {
  const auto idx = stratified_split_indices(set, ratios, seed);
  return {subset(set, idx.train), subset(set, idx.val), subset(set, idx.test)};
}

LabeledUrlSet subsample(const LabeledUrlSet& set, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("subsample fraction must be in (0, 1]");
  const Rng root(seed);
  std::vector<std::size_t> keep;
  const auto by_class = indices_by_class(set);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto idx = by_class[c];
    if (idx.empty()) continue;
    const double want = fraction * static_cast<double>(idx.size());
    if (want < 1.0)
      throw DataError("fraction yields an empty class '" + set.class_names[c] + "'");
    const auto k = std::min(idx.size(), static_cast<std::size_t>(std::llround(want)));
    if (k < idx.size()) {
      Rng rng = root.fork("subsample", c);
      rng.shuffle(idx.begin(), idx.end());
    }
    keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<long>(k));
  }
  std::sort(keep.begin(), keep.end());
  return subset(set, keep);
}

}  // namespace turl
