#include "qforge/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "qforge/error.hpp"

namespace qforge {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& field, const std::string& v) {
  T out{};
  const char* first = v.data();
  const char* last = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(field, "cannot parse '" + v + "' as a number");
  }
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, d);
  (void)ec;
  return std::string(buf, ptr);
}

struct Field {
  const char* key;
  std::function<void(PlatformConfig&, const std::string&)> set;
  std::function<std::string(const PlatformConfig&)> get;
};

template <class T>
Field scalar(const char* key, T PlatformConfig::*member) {
  return Field{
      key,
      [key, member](PlatformConfig& c, const std::string& v) {
        c.*member = parse_number<T>(key, v);
      },
      [member](const PlatformConfig& c) {
        if constexpr (std::is_floating_point_v<T>) {
          return fmt_double(c.*member);
        } else {
          return std::to_string(c.*member);
        }
      }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = [] {
    std::vector<Field> f;
    f.push_back(scalar("beat_ai", &PlatformConfig::beat_ai));
    f.push_back(scalar("relational_bonus", &PlatformConfig::relational_bonus));
    f.push_back(scalar("topic_bonus", &PlatformConfig::topic_bonus));
    f.push_back(scalar("ai_correct_default", &PlatformConfig::ai_correct_default));
    f.push_back(scalar("discard_penalty", &PlatformConfig::discard_penalty));
    f.push_back(scalar("flip_penalty", &PlatformConfig::flip_penalty));
    f.push_back(scalar("validation_reward", &PlatformConfig::validation_reward));
    f.push_back(scalar("expert_check_penalty", &PlatformConfig::expert_check_penalty));
    f.push_back(scalar("payout_points", &PlatformConfig::payout_points));
    f.push_back(scalar("payout_amount_cents", &PlatformConfig::payout_amount_cents));
    f.push_back(scalar("compose_fraction", &PlatformConfig::compose_fraction));
    f.push_back(scalar("expert_check_fraction", &PlatformConfig::expert_check_fraction));
    f.push_back(Field{
        "retrain_thresholds",
        [](PlatformConfig& c, const std::string& v) {
          c.retrain_thresholds.clear();
          for (const auto& item : split_list(v)) {
            c.retrain_thresholds.push_back(parse_number<std::int64_t>("retrain_thresholds", item));
          }
        },
        [](const PlatformConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.retrain_thresholds.size(); ++i) {
            if (i) out += ", ";
            out += std::to_string(c.retrain_thresholds[i]);
          }
          return out;
        }});
    f.push_back(scalar("hash_bits", &PlatformConfig::hash_bits));
    f.push_back(scalar("answerer_epochs", &PlatformConfig::answerer_epochs));
    f.push_back(scalar("answerer_learning_rate", &PlatformConfig::answerer_learning_rate));
    f.push_back(scalar("answerer_l2", &PlatformConfig::answerer_l2));
    f.push_back(scalar("answerer_batch_size", &PlatformConfig::answerer_batch_size));
    f.push_back(scalar("answerer_min_improvement", &PlatformConfig::answerer_min_improvement));
    f.push_back(scalar("verifier_confidence_floor", &PlatformConfig::verifier_confidence_floor));
    f.push_back(scalar("acc_high_threshold", &PlatformConfig::acc_high_threshold));
    f.push_back(scalar("exp_high_threshold", &PlatformConfig::exp_high_threshold));
    f.push_back(scalar("verifier_iterations", &PlatformConfig::verifier_iterations));
    f.push_back(scalar("verifier_learning_rate", &PlatformConfig::verifier_learning_rate));
    f.push_back(scalar("verifier_l2", &PlatformConfig::verifier_l2));
    f.push_back(scalar("worker_min_expert_accuracy", &PlatformConfig::worker_min_expert_accuracy));
    f.push_back(scalar("worker_max_discard_rate", &PlatformConfig::worker_max_discard_rate));
    f.push_back(scalar("gate_min_history", &PlatformConfig::gate_min_history));
    f.push_back(scalar("unmeasured_accuracy_prior", &PlatformConfig::unmeasured_accuracy_prior));
    f.push_back(scalar("leakage_threshold", &PlatformConfig::leakage_threshold));
    f.push_back(scalar("max_snippets", &PlatformConfig::max_snippets));
    f.push_back(scalar("snippet_char_budget", &PlatformConfig::snippet_char_budget));
    f.push_back(Field{
        "split_ratios",
        [](PlatformConfig& c, const std::string& v) {
          const auto items = split_list(v);
          if (items.size() != 3) throw ConfigError("split_ratios", "expected 3 values (train, dev, test)");
          for (std::size_t i = 0; i < 3; ++i) {
            c.split_ratios[i] = parse_number<double>("split_ratios", items[i]);
          }
        },
        [](const PlatformConfig& c) {
          return fmt_double(c.split_ratios[0]) + ", " + fmt_double(c.split_ratios[1]) + ", " +
                 fmt_double(c.split_ratios[2]);
        }});
    f.push_back(scalar("top_n_concepts", &PlatformConfig::top_n_concepts));
    f.push_back(Field{
        "relational_weights",
        [](PlatformConfig& c, const std::string& v) {
          c.relational_weights.clear();
          for (const auto& item : split_list(v)) {
            const std::size_t colon = item.rfind(':');
            if (colon == std::string::npos) {
              throw ConfigError("relational_weights", "expected phrase:weight, got '" + item + "'");
            }
            c.relational_weights[trim(item.substr(0, colon))] =
                parse_number<double>("relational_weights", trim(item.substr(colon + 1)));
          }
        },
        [](const PlatformConfig& c) {
          std::string out;
          for (const auto& [phrase, w] : c.relational_weights) {
            if (!out.empty()) out += ", ";
            out += phrase + ":" + fmt_double(w);
          }
          return out;
        }});
    f.push_back(scalar("session_idle_timeout_ms", &PlatformConfig::session_idle_timeout_ms));
    f.push_back(scalar("rng_seed", &PlatformConfig::rng_seed));
    return f;
  }();
  return kFields;
}

void require_fraction(const char* field, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(field, "must lie in [0, 1]");
}

void require_non_negative(const char* field, long long v) {
  if (v < 0) throw ConfigError(field, "must be non-negative");
}

}  // namespace

void validate(const PlatformConfig& c) {
  require_non_negative("beat_ai", c.beat_ai);
  require_non_negative("relational_bonus", c.relational_bonus);
  require_non_negative("topic_bonus", c.topic_bonus);
  require_non_negative("ai_correct_default", c.ai_correct_default);
  require_non_negative("discard_penalty", c.discard_penalty);
  require_non_negative("flip_penalty", c.flip_penalty);
  require_non_negative("validation_reward", c.validation_reward);
  require_non_negative("expert_check_penalty", c.expert_check_penalty);
  if (c.payout_points <= 0) throw ConfigError("payout_points", "must be positive");
  require_non_negative("payout_amount_cents", c.payout_amount_cents);
  require_fraction("compose_fraction", c.compose_fraction);
  require_fraction("expert_check_fraction", c.expert_check_fraction);
  for (std::size_t i = 0; i < c.retrain_thresholds.size(); ++i) {
    if (c.retrain_thresholds[i] <= 0) {
      throw ConfigError("retrain_thresholds", "thresholds must be positive");
    }
    if (i > 0 && c.retrain_thresholds[i] <= c.retrain_thresholds[i - 1]) {
      throw ConfigError("retrain_thresholds", "must be strictly increasing");
    }
  }
  if (c.hash_bits < 4 || c.hash_bits > 26) throw ConfigError("hash_bits", "must lie in [4, 26]");
  if (c.answerer_epochs < 1) throw ConfigError("answerer_epochs", "must be >= 1");
  if (!(c.answerer_learning_rate > 0)) throw ConfigError("answerer_learning_rate", "must be positive");
  if (!(c.answerer_l2 >= 0)) throw ConfigError("answerer_l2", "must be non-negative");
  if (c.answerer_batch_size < 1) throw ConfigError("answerer_batch_size", "must be >= 1");
  if (!(c.answerer_min_improvement >= 0)) {
    throw ConfigError("answerer_min_improvement", "must be non-negative");
  }
  require_fraction("verifier_confidence_floor", c.verifier_confidence_floor);
  require_fraction("acc_high_threshold", c.acc_high_threshold);
  require_non_negative("exp_high_threshold", c.exp_high_threshold);
  if (c.verifier_iterations < 1) throw ConfigError("verifier_iterations", "must be >= 1");
  if (!(c.verifier_learning_rate > 0)) throw ConfigError("verifier_learning_rate", "must be positive");
  if (!(c.verifier_l2 >= 0)) throw ConfigError("verifier_l2", "must be non-negative");
  require_fraction("worker_min_expert_accuracy", c.worker_min_expert_accuracy);
  require_fraction("worker_max_discard_rate", c.worker_max_discard_rate);
  require_non_negative("gate_min_history", c.gate_min_history);
  require_fraction("unmeasured_accuracy_prior", c.unmeasured_accuracy_prior);
  require_fraction("leakage_threshold", c.leakage_threshold);
  if (c.max_snippets < 0 || c.max_snippets > 100) throw ConfigError("max_snippets", "must lie in [0, 100]");
  require_non_negative("snippet_char_budget", c.snippet_char_budget);
  double sum = 0.0;
  for (double r : c.split_ratios) {
    require_fraction("split_ratios", r);
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_ratios", "ratios must sum to 1");
  if (c.top_n_concepts < 1) throw ConfigError("top_n_concepts", "must be >= 1");
  for (const auto& [phrase, w] : c.relational_weights) {
    if (!(w >= 0.0)) throw ConfigError("relational_weights", "weight for '" + phrase + "' is negative");
  }
  if (c.session_idle_timeout_ms <= 0) throw ConfigError("session_idle_timeout_ms", "must be positive");
}

PlatformConfig parse_config(std::string_view text) {
  PlatformConfig cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw Error("parse_error", "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const auto& fs = fields();
    auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.key; });
    if (it == fs.end()) {
      throw ConfigError(key, "line " + std::to_string(lineno) + ": unknown key");
    }
    if (!seen.insert(key).second) {
      throw ConfigError(key, "line " + std::to_string(lineno) + ": duplicate key");
    }
    it->set(cfg, value);
  }
  validate(cfg);
  return cfg;
}

PlatformConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const PlatformConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace qforge
