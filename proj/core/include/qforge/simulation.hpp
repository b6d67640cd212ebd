#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "qforge/answer_loop.hpp"
#include "qforge/config.hpp"
#include "qforge/game_service.hpp"
#include "qforge/prompts.hpp"
#include "qforge/rng.hpp"

namespace qforge {

enum class AgentKind { HonestPlayer, PatternAttacker, LazyValidator, AccurateValidator };
std::string_view to_string(AgentKind k);
AgentKind parse_agent_kind(std::string_view s);

struct AgentProfile {
  std::string id;
  AgentKind kind = AgentKind::HonestPlayer;
  double accuracy = 0.9;          // labeling / answering accuracy, [0.5, 1]
  std::string pattern = "never";  // token the attacker inserts
  std::uint64_t seed = 0;
};

// Throws Error("invalid_argument") when a parameter is out of range.
void validate_profile(const AgentProfile& p);

// JSONL of {"id","kind","accuracy","pattern","seed"}; missing fields default.
std::vector<AgentProfile> read_agents(const std::filesystem::path& path);

// 2 attackers, 3 honest players, 2 accurate and 1 lazy validator.
std::vector<AgentProfile> default_agents(std::uint64_t seed);

// Synthetic concept graph with planted true triples over the templated
// relations.
struct SyntheticWorld {
  std::vector<std::string> concepts;
  std::vector<Triple> true_triples;
  std::set<Triple> true_set;

  ConceptGraph graph() const;
};

SyntheticWorld make_world(std::size_t n_concepts, std::size_t triples_per_concept, Rng& rng);

// "a wheel is part of a car" -> "a wheel is never part of a car". Empty when
// the template has no "is" to negate.
std::string attack_text(const Triple& t, const std::string& pattern);

struct SimOptions {
  PlatformConfig cfg;
  std::vector<AgentProfile> agents;
  std::size_t n_questions = 500;
  std::size_t parallelism = 8;
  std::uint64_t seed = 0;
  std::size_t world_concepts = 150;
  std::size_t triples_per_concept = 4;
  std::size_t crowd_questions = 4000;  // verifier training set size
  std::size_t expert_items = 60;
  // Agents stop once the budget is spent and this many consecutive tasks
  // came back as compose (nothing left to validate).
  int idle_compose_limit = 25;
  // Simulated human think time before each submission.
  int think_ms = 10;
  std::string host = "127.0.0.1";
};

struct VersionBeat {
  int version = 0;
  std::size_t attack_n = 0;
  std::size_t attack_beats = 0;
  std::size_t all_n = 0;
  std::size_t all_beats = 0;
};

struct SimReport {
  std::size_t n_agents = 0;
  std::size_t n_questions = 0;
  std::vector<VersionBeat> by_version;
  std::vector<RetrainEvent> retrains;
  double attacker_beat_before = 0.0;  // model version 0
  double attacker_beat_after = 0.0;   // model version >= 1
  std::size_t attacker_n_before = 0;
  std::size_t attacker_n_after = 0;
  std::size_t n_decided = 0;
  std::size_t n_kept = 0;
  std::size_t n_discarded = 0;
  std::size_t n_pending = 0;
  double discard_rate = 0.0;
  double verifier_accuracy_kept = 0.0;  // vs planted truth
  double verifier_heldout_accuracy = 0.0;
  bool ledger_ok = true;
  std::size_t ledger_mismatches = 0;
  std::size_t self_validations = 0;
  bool notifications_ok = true;
  std::size_t adjustments = 0;
  std::size_t notifications = 0;
  double runtime_seconds = 0.0;
  std::optional<std::string> error;
};

// Boots a GameService behind HttpServer on an ephemeral port and drives the
// agents through the HTTP API.
SimReport run_simulation(const SimOptions& opts);

nlohmann::json sim_report_to_json(const SimReport& r);

}  // namespace qforge
