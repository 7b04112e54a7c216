#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "turl/data_ingest.hpp"
#include "turl/url_parts.hpp"

using namespace turl;

namespace {

LabeledUrlSet balanced(std::size_t per_class) {
  LabeledUrlSet s;
  s.class_names = {"benign", "malicious"};
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    s.records.push_back({"http://h" + std::to_string(i) + ".com/", label, s.class_names[label]});
  }
  return s;
}

}  // namespace

TEST_CASE("fixed class list maps labels to ids") {
  DatasetSchema schema;
  schema.classes = {"good", "bad"};
  const auto set = parse_dataset("url,label\nhttp://a.com,bad\n", schema);
  REQUIRE(set.size() == 1);
  CHECK(set.records[0].url == "http://a.com");
  CHECK(set.records[0].label == 1);
}

TEST_CASE("labels follow first-seen order") {
  const auto set = parse_dataset("url,label\nx.com,phishing\ny.com,benign\nz.com,phishing\n");
  CHECK(set.class_names == std::vector<std::string>{"phishing", "benign"});
  CHECK(set.records[1].label == 1);
}

TEST_CASE("empty input is rejected") {
  CHECK_THROWS_WITH_AS(parse_dataset(""), "no records", DataError);
  CHECK_THROWS_WITH_AS(parse_dataset("url,label\n"), "no records", DataError);
}

TEST_CASE("four categories") {
  const auto set = parse_dataset(
      "url,label\na.com,benign\nb.com,defacement\nc.com,phishing\nd.com,malware\ne.com,benign\n");
  CHECK(set.num_classes() == 4);
}

TEST_CASE("unknown label with a fixed class list names the row") {
  DatasetSchema schema;
  schema.classes = {"good", "bad"};
  CHECK_THROWS_AS(parse_dataset("url,label\na.com,good\nb.com,ugly\n", schema), DataError);
  try {
    parse_dataset("url,label\na.com,good\nb.com,ugly\n", schema);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("relabel and quoted fields") {
  DatasetSchema schema;
  schema.relabel = {{"0", "benign"}, {"1", "malicious"}};
  const auto set = parse_dataset("url,label\n\"http://a.com/x,y\",1\nb.com,0\n", schema);
  CHECK(set.records[0].url == "http://a.com/x,y");
  CHECK(set.records[0].class_name == "malicious");
  CHECK(set.class_names == std::vector<std::string>{"malicious", "benign"});
}

TEST_CASE("write then parse round trip") {
  const auto set = parse_dataset("url,label\n\"http://a.com/x,y\",bad\nb.com,good\n");
  std::ostringstream out;
  write_dataset(out, set);
  const auto back = parse_dataset(out.str());
  REQUIRE(back.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(back.records[i].url == set.records[i].url);
    CHECK(back.records[i].label == set.records[i].label);
  }
}

TEST_CASE("tld fractions") {
  LabeledUrlSet s;
  s.class_names = {"benign"};
  s.records = {{"http://x.com", 0, "benign"}, {"http://y.de", 0, "benign"}};
  const auto st = dataset_stats(s);
  REQUIRE(st.classes.size() == 1);
  CHECK(st.classes[0].tld.com == 0.5);
  CHECK(st.classes[0].tld.country_code == 0.5);
  CHECK(st.classes[0].tld.other == 0.0);
  CHECK(st.classes[0].mean_length == doctest::Approx(11.5));

  LabeledUrlSet bare;
  bare.class_names = {"benign"};
  bare.records = {{"abc", 0, "benign"}};
  CHECK(dataset_stats(bare).classes[0].tld.other == 1.0);
}

TEST_CASE("stats are permutation invariant") {
  auto s = oracle::separable_corpus(50, 4);
  const auto a = stats_to_json(dataset_stats(s));
  std::reverse(s.records.begin(), s.records.end());
  CHECK(stats_to_json(dataset_stats(s)) == a);
}

TEST_CASE("tld buckets") {
  CHECK(classify_tld("example.com") == TldBucket::Com);
  CHECK(classify_tld("example.COM.") == TldBucket::Com);
  CHECK(classify_tld("example.co.uk") == TldBucket::CountryCode);
  CHECK(classify_tld("example.org") == TldBucket::Other);
  CHECK(classify_tld("10.0.0.1") == TldBucket::Other);
}

TEST_CASE("url parts are lossless") {
  for (const char* u : {"http://user@a.b.com:8080/p?q#f", "www.example.com/x", "abc", "https://x.de",
                        "ftp://[::1]/a", "mailto:someone"}) {
    CHECK(parse_url_parts(u).join() == u);
  }
  const auto p = parse_url_parts("http://user@a.b.com:8080/p?q#f");
  CHECK(p.host == "a.b.com");
  CHECK(p.port == ":8080");
  CHECK(parse_url_parts("www.example.com/x").host == "www.example.com");
  CHECK(parse_url_parts("abc").host.empty());
}

TEST_CASE("stratified split counts") {
  const auto set = balanced(50);
  const auto sp = stratified_split(set, {0.8, 0.1, 0.1}, 11);
  auto per_class = [](const LabeledUrlSet& s) {
    std::array<int, 2> c{0, 0};
    for (const auto& r : s.records) ++c[static_cast<std::size_t>(r.label)];
    return c;
  };
  CHECK(per_class(sp.train) == std::array<int, 2>{40, 40});
  CHECK(per_class(sp.val) == std::array<int, 2>{5, 5});
  CHECK(per_class(sp.test) == std::array<int, 2>{5, 5});
}

TEST_CASE("stratified split is a deterministic partition") {
  const auto set = oracle::separable_corpus(97, 2);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = stratified_split_indices(set, {0.7, 0.2, 0.1}, seed);
    const auto b = stratified_split_indices(set, {0.7, 0.2, 0.1}, seed);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    std::multiset<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    all.insert(a.test.begin(), a.test.end());
    REQUIRE(all.size() == set.size());
    std::size_t i = 0;
    for (auto v : all) CHECK(v == i++);
  }
}

TEST_CASE("split ratio and class size errors") {
  const auto set = balanced(50);
  CHECK_THROWS_WITH(stratified_split(set, {0.5, 0.5, 0.5}, 1), "ratios must sum to 1");
  CHECK_THROWS_AS(stratified_split(balanced(1), {0.8, 0.1, 0.1}, 1), DataError);
}

TEST_CASE("subsample") {
  const auto set = balanced(400);
  const auto s = subsample(set, 0.01, 3);
  std::array<int, 2> c{0, 0};
  for (const auto& r : s.records) ++c[static_cast<std::size_t>(r.label)];
  CHECK(c == std::array<int, 2>{4, 4});

  const auto same = subsample(set, 1.0, 3);
  REQUIRE(same.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i) CHECK(same.records[i].url == set.records[i].url);

  const auto again = subsample(subsample(set, 0.1, 5), 1.0, 9);
  const auto once = subsample(set, 0.1, 5);
  REQUIRE(again.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(again.records[i].url == once.records[i].url);

  LabeledUrlSet small;
  small.class_names = {"benign"};
  for (int i = 0; i < 10; ++i) small.records.push_back({"a" + std::to_string(i) + ".com", 0, "benign"});
  CHECK_THROWS_AS(subsample(small, 0.05, 1), DataError);
}
