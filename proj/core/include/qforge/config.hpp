#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace qforge {

// Platform configuration. Defaults reproduce the published point economy and
// worker gates; everything is overridable through the key/value file.
//
// File grammar (one entry per line):
//   # comment                  full-line or trailing comments
//   key = value                whitespace around '=' ignored
//   key = a, b, c              lists are comma separated
// Unknown keys are rejected.
struct PlatformConfig {
  // point economy
  int beat_ai = 5;
  int relational_bonus = 4;
  int topic_bonus = 4;
  int ai_correct_default = 3;
  int discard_penalty = 3;
  int flip_penalty = 2;
  int validation_reward = 2;
  int expert_check_penalty = 1;
  int payout_points = 300;
  int payout_amount_cents = 440;

  // task routing
  double compose_fraction = 0.70;
  double expert_check_fraction = 0.10;

  // answer loop
  std::vector<std::int64_t> retrain_thresholds{1000, 2000, 5000, 10000, 20000};
  int hash_bits = 18;
  int answerer_epochs = 20;
  double answerer_learning_rate = 0.5;
  double answerer_l2 = 1e-4;
  int answerer_batch_size = 32;
  double answerer_min_improvement = 1e-6;

  // verifier
  double verifier_confidence_floor = 0.6;
  double acc_high_threshold = 0.8;
  int exp_high_threshold = 50;
  int verifier_iterations = 400;
  double verifier_learning_rate = 0.5;
  double verifier_l2 = 1e-3;

  // worker gates
  double worker_min_expert_accuracy = 0.60;
  double worker_max_discard_rate = 0.30;
  int gate_min_history = 10;
  double unmeasured_accuracy_prior = 0.7;

  // leakage
  double leakage_threshold = 0.15;
  int max_snippets = 100;
  int snippet_char_budget = 0;  // 0 = unlimited

  // dataset
  std::array<double, 3> split_ratios{0.6472, 0.1774, 0.1754};
  int top_n_concepts = 1875;

  // relational prompt sampling weights (phrase -> weight); empty = uniform
  std::map<std::string, double> relational_weights;

  // service
  std::int64_t session_idle_timeout_ms = 18LL * 60 * 1000;

  std::uint64_t rng_seed = 0;

  bool operator==(const PlatformConfig&) const = default;
};

// Throws ConfigError naming the first offending field.
void validate(const PlatformConfig& cfg);

PlatformConfig parse_config(std::string_view text);
PlatformConfig load_config(const std::filesystem::path& path);

// Emits every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const PlatformConfig& cfg);

}  // namespace qforge
