#include <doctest.h>

#include <set>

#include "turl/adversarial.hpp"
#include "turl/url_parts.hpp"

using namespace turl;

namespace {

std::vector<std::string> segs(const HostLabel& l) { return l.segments; }

std::vector<std::string> pool(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("http://www." + stem + std::to_string(i) + "shop.com/p" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("host splitting") {
  const auto a = split_host("http://paypal.com/a");
  REQUIRE(a.labels.size() == 2u);
  CHECK(a.labels[0].text() == "paypal");
  CHECK(a.labels[1].text() == "com");
  CHECK(a.suffix == "/a");
  CHECK(a.prefix == "http://");

  const auto b = split_host("abc");
  CHECK_FALSE(b.has_host());
  CHECK(b.suffix == "abc");

  const auto c = split_host("http://my-site2.co.uk/x");
  CHECK(segs(c.labels[0]) == std::vector<std::string>{"my", "site", "2"});
  CHECK(c.labels[0].separators == std::vector<std::string>{"-", ""});
  CHECK(c.labels.size() == 3u);
}

TEST_CASE("host splitting is lossless") {
  for (const char* u : {"http://my-site2.co.uk/x", "https://u@a--b9c.d-e.org:81/q?x=1#f", "abc", "www.a1b2.net",
                        "http://-x-.com", "http://x.com"}) {
    CHECK(split_host(u).join() == u);
  }
}

TEST_CASE("substitution without hyphens") {
  AttackConfig cfg{{"evil.com"}, 0.0, 1};
  CHECK(compound_attack("http://www.good.com/x", cfg) == std::optional<std::string>("http://www.evil.com/x"));
  CHECK(compound_attack("good.com", cfg) == std::optional<std::string>("evil.com"));
  CHECK_FALSE(compound_attack("no host here", cfg).has_value());
}

TEST_CASE("probability one hyphenates every transition") {
  AttackConfig cfg{{"evil.net"}, 1.0, 1};
  CHECK(*compound_attack("http://shop24x7.my-site2.good.com/a", cfg) == "http://shop-24-x-7.my-site-2.evil.net/a");
}

TEST_CASE("attack is deterministic under its seed") {
  AttackConfig cfg{{"a.com", "b.org", "c.net"}, 0.5, 9};
  const std::string url = "https://login1.account2.secure3.bank.com/x";
  CHECK(compound_attack(url, cfg) == compound_attack(url, cfg));
  std::set<std::string> outs;
  for (std::uint64_t s = 1; s < 30; ++s) {
    cfg.seed = s;
    outs.insert(*compound_attack(url, cfg));
  }
  CHECK(outs.size() > 3u);
}

TEST_CASE("attack config validation") {
  CHECK_THROWS(compound_attack("http://a.com", AttackConfig{{}, 0.5, 1}));
  CHECK_THROWS(compound_attack("http://a.com", AttackConfig{{"x.com"}, 1.5, 1}));
}

TEST_CASE("scaled advtest counts") {
  AdvTestSpec spec{8, 4, 4, 3};
  AttackConfig cfg{{"evil.com", "bad.net"}, 0.5, 3};
  std::vector<std::string> mal;
  for (int i = 0; i < 10; ++i) mal.push_back("http://m" + std::to_string(i) + ".ru/x");
  const auto r = build_advtest(pool("b", 20), mal, spec, cfg);
  CHECK(r.set.size() == 16u);
  int benign = 0, malicious = 0, adversarial = 0;
  std::set<std::string> retained, sources;
  for (std::size_t i = 0; i < r.set.size(); ++i) {
    (r.set.records[i].label == 0 ? benign : malicious)++;
    if (r.origin[i] == AdvOrigin::Benign) retained.insert(r.set.records[i].url);
    if (r.origin[i] == AdvOrigin::Adversarial) {
      ++adversarial;
      CHECK(r.set.records[i].label == 1);
      sources.insert(r.source[i]);
    }
  }
  CHECK(benign == 8);
  CHECK(malicious == 8);
  CHECK(adversarial == 4);
  for (const auto& s : sources) CHECK(retained.count(s) == 0);
  const auto again = build_advtest(pool("b", 20), mal, spec, cfg);
  for (std::size_t i = 0; i < r.set.size(); ++i) CHECK(again.set.records[i].url == r.set.records[i].url);
}

TEST_CASE("duplicates of retained urls are not attacked") {
  std::vector<std::string> benign(12, "http://www.same.com/");
  benign.push_back("http://www.other1.com/");
  benign.push_back("http://www.other2.com/");
  const auto r = build_advtest(benign, {"http://m.ru/"}, AdvTestSpec{1, 1, 2, 1}, AttackConfig{{"e.com"}, 0.5, 1});
  for (std::size_t i = 0; i < r.set.size(); ++i)
    if (r.origin[i] == AdvOrigin::Adversarial) CHECK(r.source[i] != "http://www.same.com/");
}

TEST_CASE("insufficient pools") {
  AttackConfig cfg{{"evil.com"}, 0.5, 1};
  CHECK_THROWS_AS(build_advtest(pool("b", 5), {"http://m.ru"}, AdvTestSpec{4, 1, 4, 1}, cfg), DataError);
  CHECK_THROWS_AS(build_advtest(pool("b", 20), {}, AdvTestSpec{4, 1, 4, 1}, cfg), DataError);
  CHECK_THROWS(build_advtest(pool("b", 20), {"http://m.ru"}, AdvTestSpec{0, 1, 4, 1}, cfg));
}

TEST_CASE("full-size advtest counts are accepted") {
  std::vector<std::string> benign, mal;
  for (int i = 0; i < 120000; ++i) benign.push_back("http://b" + std::to_string(i) + ".com/");
  for (int i = 0; i < 40000; ++i) mal.push_back("http://m" + std::to_string(i) + ".ru/");
  const auto r = build_advtest(benign, mal, AdvTestSpec{}, AttackConfig{{"evil.com"}, 0.5, 1});
  CHECK(r.set.size() == 160000u);
}
