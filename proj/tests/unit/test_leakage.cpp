#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "qforge/error.hpp"
#include "qforge/leakage.hpp"
#include "qforge/rng.hpp"
#include "qforge/text.hpp"

using namespace qforge;

namespace {

std::string random_text(Rng& rng, std::size_t max_len, std::string_view alphabet) {
  const std::size_t n = rng.uniform_below(max_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng.uniform_below(alphabet.size())]);
  return s;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(WindowDistance, ExactContainment) {
  const auto m = best_window_distance(std::string_view("part of"), std::string_view("a wheel is part of a car"));
  EXPECT_EQ(m.distance, 0u);
  EXPECT_EQ(m.span, (Span{11, 18}));
}

TEST(WindowDistance, KittenSitting) {
  const auto m = best_window_distance(std::string_view("kitten"), std::string_view("xxsittingxx"));
  const auto o = oracle::brute_window(U"kitten", U"xxsittingxx");
  EXPECT_EQ(o.distance, 2u);  // "sittin"
  EXPECT_EQ(m.distance, o.distance);
}

TEST(WindowDistance, PatternLongerThanText) {
  const auto m = best_window_distance(std::string_view("abcde"), std::string_view("xy"));
  const auto o = oracle::brute_window(U"abcde", U"xy");
  EXPECT_EQ(m.distance, o.distance);
  EXPECT_EQ(m.span, (Span{o.start, o.end}));
}

TEST(WindowDistance, EmptyPatternRejected) {
  EXPECT_THROW(best_window_distance(std::string_view(""), std::string_view("abc")), Error);
}

TEST(WindowDistance, EmptyText) {
  const auto m = best_window_distance(std::string_view("abc"), std::string_view(""));
  EXPECT_EQ(m.distance, 3u);
  EXPECT_EQ(m.span, (Span{0, 0}));
}

TEST(WindowDistance, CodePointsNotBytes) {
  const auto m = best_window_distance(std::string_view("caf\xC3\xA9"), std::string_view("le caf\xC3\xA9 noir"));
  EXPECT_EQ(m.distance, 0u);
  EXPECT_EQ(m.span, (Span{3, 7}));
}

TEST(WindowDistance, RandomPairsMatchBruteForce) {
  Rng rng(31);
  for (int i = 0; i < 2000; ++i) {
    auto p = oracle::widen(random_text(rng, 8, "abcd"));
    if (p.empty()) p = U"a";
    const auto t = oracle::widen(random_text(rng, 10, "abcd"));
    const auto m = best_window_distance(p, t);
    const auto o = oracle::brute_window(p, t);
    ASSERT_EQ(m.distance, o.distance);
    ASSERT_EQ(m.span, (Span{o.start, o.end}));
  }
}

TEST(WindowDistance, ZeroIffSubstring) {
  Rng rng(32);
  for (int i = 0; i < 3000; ++i) {
    auto p = random_text(rng, 4, "ab");
    if (p.empty()) p = "b";
    const auto t = random_text(rng, 8, "ab");
    EXPECT_EQ(best_window_distance(std::string_view(p), std::string_view(t)).distance == 0,
              t.find(p) != std::string::npos);
  }
}

TEST(WindowDistance, SecondOracleAgreesWithFirst) {
  Rng rng(33);
  for (int i = 0; i < 500; ++i) {
    auto p = oracle::widen(random_text(rng, 7, "abc"));
    if (p.empty()) p = U"c";
    const auto t = oracle::widen(random_text(rng, 9, "abc"));
    const auto a = oracle::brute_window(p, t);
    const auto b = oracle::window_by_start(p, t);
    ASSERT_EQ(a.distance, b.distance);
    ASSERT_EQ(a.start, b.start);
    ASSERT_EQ(a.end, b.end);
  }
}

TEST(CheckLeak, VerbatimFeaturedSnippet) {
  SnippetSet s;
  s.query = "q";
  s.snippets = {"nothing to see here"};
  s.featured = "Trivia: A wheel is PART of a car, everyone knows.";
  const auto r = check_leak("A wheel is part of a car?", s, PlatformConfig{});
  EXPECT_TRUE(r.leaked);
  EXPECT_EQ(r.best_distance_normalized, 0.0);
  EXPECT_TRUE(r.best_is_featured);
  EXPECT_FALSE(r.best_snippet_index.has_value());
}

TEST(CheckLeak, EmptySetIsNotLeaked) {
  const auto r = check_leak("anything at all", SnippetSet{}, PlatformConfig{});
  EXPECT_FALSE(r.leaked);
  EXPECT_EQ(r.best_distance_normalized, 1.0);
}

TEST(CheckLeak, ReportsIndexAndSpanWithinBounds) {
  SnippetSet s;
  s.snippets = {"unrelated words", "they say fish can swim in rivers", "more filler"};
  const auto r = check_leak("Fish can swim?", s, PlatformConfig{});
  ASSERT_TRUE(r.best_snippet_index.has_value());
  EXPECT_EQ(*r.best_snippet_index, 1u);
  const auto norm = text::to_code_points(text::normalize_for_match(s.snippets[1]));
  EXPECT_LE(r.best_span.start, r.best_span.end);
  EXPECT_LE(r.best_span.end, norm.size());
}

TEST(CheckLeak, RandomPairsMatchOracleFlag) {
  Rng rng(41);
  const PlatformConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    std::string q = random_text(rng, 40, "abc ");
    if (text::normalize_for_match(q).empty()) q = "a";
    SnippetSet s;
    s.snippets = {rng.bernoulli(0.3) ? "x" + q + "y" : random_text(rng, 40, "abc ")};
    const auto p = text::to_code_points(text::normalize_for_match(q));
    const auto t = text::to_code_points(text::normalize_for_match(s.snippets[0]));
    const auto o = oracle::window_by_start(p, t);
    const double norm = static_cast<double>(o.distance) / std::max<std::size_t>(1, p.size());
    const auto r = check_leak(q, s, cfg);
    ASSERT_EQ(r.leaked, norm <= cfg.leakage_threshold) << q;
    ASSERT_DOUBLE_EQ(r.best_distance_normalized, norm);
  }
}

TEST(CheckLeak, MonotoneInThreshold) {
  Rng rng(42);
  for (int i = 0; i < 300; ++i) {
    std::string q = random_text(rng, 20, "ab ");
    if (text::normalize_for_match(q).empty()) q = "b";
    SnippetSet s;
    s.snippets = {random_text(rng, 30, "ab ")};
    bool prev = false;
    for (double th : {0.0, 0.1, 0.15, 0.3, 0.6, 1.0}) {
      PlatformConfig cfg;
      cfg.leakage_threshold = th;
      const bool now = check_leak(q, s, cfg).leaked;
      EXPECT_TRUE(!prev || now);
      prev = now;
    }
  }
}

TEST(CheckLeak, HundredSnippetsUnderASecond) {
  Rng rng(43);
  std::string q;
  while (q.size() < 100) q += static_cast<char>('a' + rng.uniform_below(26));
  SnippetSet s;
  for (int i = 0; i < 100; ++i) {
    std::string sn;
    while (sn.size() < 300) sn += static_cast<char>('a' + rng.uniform_below(26));
    s.snippets.push_back(sn);
  }
  const auto t0 = std::chrono::steady_clock::now();
  check_leak(q, s, PlatformConfig{});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 1.0);
}

TEST(Fetcher, PassthroughAndCache) {
  SnippetSet three{"fish swim", {"s1", "s2", "s3"}, std::nullopt};
  auto mock = std::make_shared<MockSnippetSource>(std::map<std::string, SnippetSet>{{"fish swim", three}});
  SnippetFetcher fetcher(mock, fresh_dir("qforge_fetch_cache"));
  auto first = fetcher.fetch("fish swim");
  EXPECT_EQ(first.snippets.snippets.size(), 3u);
  EXPECT_FALSE(first.from_cache);
  EXPECT_EQ(mock->calls(), 1u);
  auto second = fetcher.fetch("fish swim");
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.snippets, first.snippets);
  EXPECT_EQ(mock->calls(), 1u);
  EXPECT_TRUE(std::filesystem::exists(fetcher.cache_path("fish swim")));
}

TEST(Fetcher, UnavailableClientFailsOpen) {
  auto mock = std::make_shared<MockSnippetSource>(std::map<std::string, SnippetSet>{});
  mock->set_available(false);
  SnippetFetcher fetcher(mock, fresh_dir("qforge_fetch_down"));
  const auto r = fetcher.fetch("anything");
  EXPECT_TRUE(r.client_unavailable);
  EXPECT_TRUE(r.snippets.snippets.empty());
  EXPECT_FALSE(r.warnings.empty());
  // failures are not cached
  mock->set_available(true);
  EXPECT_FALSE(fetcher.fetch("anything").from_cache);
}

TEST(Fetcher, CapsSnippetCount) {
  SnippetSet many{"q", {}, std::string("featured")};
  for (int i = 0; i < 150; ++i) many.snippets.push_back("s" + std::to_string(i));
  auto mock = std::make_shared<MockSnippetSource>(std::map<std::string, SnippetSet>{{"q", many}});
  SnippetFetcher fetcher(mock, fresh_dir("qforge_fetch_cap"));
  const auto r = fetcher.fetch("q");
  EXPECT_EQ(r.snippets.snippets.size(), 100u);
  EXPECT_EQ(r.snippets.featured, "featured");
}

TEST(Fetcher, MockFromJsonl) {
  const auto path = std::filesystem::temp_directory_path() / "qforge_mock_corpus.jsonl";
  std::ofstream(path) << R"({"query":"a","snippets":["x","y"],"featured":"z"})" << "\n"
                      << R"({"query":"b","snippets":[]})" << "\n";
  auto mock = MockSnippetSource::from_jsonl(path);
  auto a = mock->search("a");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->snippets.size(), 2u);
  EXPECT_EQ(a->featured, "z");
  auto missing = mock->search("zzz");
  ASSERT_TRUE(missing);
  EXPECT_TRUE(missing->snippets.empty());
}
