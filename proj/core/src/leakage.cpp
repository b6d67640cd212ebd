#include "qforge/leakage.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "qforge/error.hpp"
#include "qforge/json_io.hpp"
#include "qforge/text.hpp"

namespace qforge {

WindowMatch best_window_distance(std::u32string_view pattern, std::u32string_view text) {
  if (pattern.empty()) throw Error("invalid_argument", "pattern must be non-empty");
  const std::size_t m = pattern.size();

  // One column per text position; cost[i] pairs with the leftmost start
  // among optimal alignments of pattern[0:i] ending at the current column.
  std::vector<std::size_t> cost(m + 1);
  std::vector<std::size_t> start(m + 1, 0);
  for (std::size_t i = 0; i <= m; ++i) cost[i] = i;

  WindowMatch best{cost[m], Span{0, 0}};
  std::vector<std::size_t> next_cost(m + 1);
  std::vector<std::size_t> next_start(m + 1);
  for (std::size_t j = 1; j <= text.size(); ++j) {
    next_cost[0] = 0;
    next_start[0] = j;
    const char32_t tc = text[j - 1];
    for (std::size_t i = 1; i <= m; ++i) {
      std::size_t c = cost[i - 1] + (pattern[i - 1] == tc ? 0 : 1);
      std::size_t s = start[i - 1];
      auto consider = [&](std::size_t cc, std::size_t ss) {
        if (cc < c || (cc == c && ss < s)) {
          c = cc;
          s = ss;
        }
      };
      consider(next_cost[i - 1] + 1, next_start[i - 1]);  // pattern char unmatched
      consider(cost[i] + 1, start[i]);                    // extra text char
      next_cost[i] = c;
      next_start[i] = s;
    }
    std::swap(cost, next_cost);
    std::swap(start, next_start);
    if (cost[m] < best.distance || (cost[m] == best.distance && start[m] < best.span.start)) {
      best = WindowMatch{cost[m], Span{start[m], j}};
    }
  }
  return best;
}

WindowMatch best_window_distance(std::string_view pattern, std::string_view text) {
  return best_window_distance(text::to_code_points(pattern), text::to_code_points(text));
}

LeakReport check_leak(std::string_view question_text, const SnippetSet& snippets,
                      const PlatformConfig& cfg) {
  LeakReport report;
  const std::u32string pattern = text::to_code_points(text::normalize_for_match(question_text));
  if (pattern.empty()) return report;
  const double denom = static_cast<double>(std::max<std::size_t>(1, pattern.size()));

  bool any = false;
  auto scan = [&](const std::string& snippet, std::optional<std::size_t> index, bool featured) {
    const std::u32string t = text::to_code_points(text::normalize_for_match(snippet));
    const WindowMatch w = best_window_distance(pattern, t);
    const double d = static_cast<double>(w.distance) / denom;
    if (!any || d < report.best_distance_normalized) {
      any = true;
      report.best_distance_normalized = d;
      report.best_snippet_index = index;
      report.best_is_featured = featured;
      report.best_span = w.span;
    }
  };
  if (snippets.featured) scan(*snippets.featured, std::nullopt, true);
  for (std::size_t i = 0; i < snippets.snippets.size(); ++i) scan(snippets.snippets[i], i, false);

  report.leaked = any && report.best_distance_normalized <= cfg.leakage_threshold;
  return report;
}

MockSnippetSource::MockSnippetSource(std::map<std::string, SnippetSet> corpus)
    : corpus_(std::move(corpus)) {}

std::unique_ptr<MockSnippetSource> MockSnippetSource::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open snippet corpus " + path.string());
  std::map<std::string, SnippetSet> corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      SnippetSet s = nlohmann::json::parse(line).get<SnippetSet>();
      std::string key = s.query;
      corpus[key] = std::move(s);
    } catch (const nlohmann::json::exception& e) {
      throw Error("parse_error", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return std::make_unique<MockSnippetSource>(std::move(corpus));
}

std::optional<SnippetSet> MockSnippetSource::search(const std::string& query) {
  std::lock_guard lock(mu_);
  ++calls_;
  if (!available_) return std::nullopt;
  auto it = corpus_.find(query);
  if (it == corpus_.end()) return SnippetSet{query, {}, std::nullopt};
  return it->second;
}

std::size_t MockSnippetSource::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

void MockSnippetSource::set_available(bool available) {
  std::lock_guard lock(mu_);
  available_ = available;
}

SnippetFetcher::SnippetFetcher(std::shared_ptr<SnippetSource> client,
                               std::filesystem::path cache_dir, std::size_t max_snippets)
    : client_(std::move(client)), cache_dir_(std::move(cache_dir)), max_snippets_(max_snippets) {}

std::filesystem::path SnippetFetcher::cache_path(const std::string& query) const {
  const std::string h = text::hex64(text::fnv1a64(query));
  return cache_dir_ / h.substr(0, 2) / (h + ".json");
}

FetchResult SnippetFetcher::fetch(const std::string& query) {
  FetchResult out;
  out.snippets.query = query;
  const auto path = cache_path(query);
  {
    std::shared_lock lock(cache_mu_);
    std::ifstream in(path);
    if (in) {
      try {
        nlohmann::json j = nlohmann::json::parse(in);
        SnippetSet cached = j.get<SnippetSet>();
        if (cached.query == query) {
          out.snippets = std::move(cached);
          out.from_cache = true;
          return out;
        }
      } catch (const nlohmann::json::exception&) {
        out.warnings.push_back("ignoring unreadable cache entry " + path.string());
      }
    }
  }

  std::optional<SnippetSet> got = client_ ? client_->search(query) : std::nullopt;
  if (!got) {
    out.client_unavailable = true;
    out.warnings.push_back("snippet client unavailable; proceeding with no snippets");
    return out;
  }
  got->query = query;
  if (got->snippets.size() > max_snippets_) got->snippets.resize(max_snippets_);
  out.snippets = std::move(*got);

  std::unique_lock lock(cache_mu_);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    if (f) f << nlohmann::json(out.snippets).dump();
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) out.warnings.push_back("could not write cache entry " + path.string());
  return out;
}

}  // namespace qforge
