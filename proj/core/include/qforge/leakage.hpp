#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "qforge/config.hpp"

namespace qforge {

struct SnippetSet {
  std::string query;
  std::vector<std::string> snippets;  // at most 100
  std::optional<std::string> featured;

  bool operator==(const SnippetSet&) const = default;
};

struct Span {
  std::size_t start = 0;  // code point offsets, half-open
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct WindowMatch {
  std::size_t distance = 0;
  Span span;
};

// Minimum Levenshtein distance between `pattern` and any contiguous substring
// of `text` (the empty substring included), with the leftmost, then
// shortest, span achieving it. Both inputs are code point sequences;
// O(|p|*|t|) time, O(|p|) space. Throws Error("invalid_argument") on an
// empty pattern.
WindowMatch best_window_distance(std::u32string_view pattern, std::u32string_view text);

// UTF-8 convenience overload; inputs are used as given (no normalization).
WindowMatch best_window_distance(std::string_view pattern, std::string_view text);

struct LeakReport {
  bool leaked = false;
  double best_distance_normalized = 1.0;
  std::optional<std::size_t> best_snippet_index;  // index into SnippetSet::snippets
  bool best_is_featured = false;
  Span best_span;  // offsets into the normalized best snippet

  bool operator==(const LeakReport&) const = default;
};

// Normalizes question and snippets, scans every snippet (featured included)
// and flags a leak when distance / max(1, |question|) <= cfg.leakage_threshold.
LeakReport check_leak(std::string_view question_text, const SnippetSet& snippets,
                      const PlatformConfig& cfg);

// Search backend. Returns nullopt when unavailable.
class SnippetSource {
 public:
  virtual ~SnippetSource() = default;
  virtual std::optional<SnippetSet> search(const std::string& query) = 0;
};

// Backed by a JSONL corpus {"query","snippets":[...],"featured":optional}.
// Unknown queries yield an empty set.
class MockSnippetSource final : public SnippetSource {
 public:
  explicit MockSnippetSource(std::map<std::string, SnippetSet> corpus);
  static std::unique_ptr<MockSnippetSource> from_jsonl(const std::filesystem::path& path);

  std::optional<SnippetSet> search(const std::string& query) override;
  std::size_t calls() const;
  void set_available(bool available);

 private:
  std::map<std::string, SnippetSet> corpus_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  bool available_ = true;
};

// GET <path>?q=<query> returning a JSON object shaped like SnippetSet.
class HttpSnippetSource final : public SnippetSource {
 public:
  HttpSnippetSource(std::string host, int port, std::string path = "/search");
  std::optional<SnippetSet> search(const std::string& query) override;

 private:
  std::string host_;
  int port_;
  std::string path_;
};

struct FetchResult {
  SnippetSet snippets;
  bool from_cache = false;
  bool client_unavailable = false;
  std::vector<std::string> warnings;
};

// Caches successful lookups under `cache_dir/<h[0:2]>/<h>.json` where h is the
// hex FNV-1a hash of the query; the stored query is compared on read so a
// hash collision degrades to a miss. An unavailable client yields an empty
// set plus a warning (fail-open).
class SnippetFetcher {
 public:
  SnippetFetcher(std::shared_ptr<SnippetSource> client, std::filesystem::path cache_dir,
                 std::size_t max_snippets = 100);

  FetchResult fetch(const std::string& query);
  std::filesystem::path cache_path(const std::string& query) const;

 private:
  std::shared_ptr<SnippetSource> client_;
  std::filesystem::path cache_dir_;
  std::size_t max_snippets_;
  std::shared_mutex cache_mu_;
};

}  // namespace qforge
