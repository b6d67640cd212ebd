#pragma once

#include <map>
#include <string>
#include <vector>

#include "qforge/config.hpp"
#include "qforge/rng.hpp"
#include "qforge/types.hpp"
#include "qforge/verifier.hpp"

namespace qforge {

// Synthetic crowdsourcing world with planted gold labels.
struct CrowdConfig {
  std::size_t n_questions = 4000;
  std::size_t n_workers = 80;
  double bad_fraction = 0.10;
  double yes_fraction = 0.5;              // among answerable questions
  double validator_accuracy_lo = 0.55;
  double validator_accuracy_hi = 0.95;
  double author_accuracy_lo = 0.75;
  double author_accuracy_hi = 0.95;
  double model_accuracy = 0.6;
  // Wrong labels on answerable questions: opposite / don't know / bad question.
  double wrong_opposite = 0.6;
  double wrong_dont_know = 0.2;
  int expert_checks_lo = 5;  // per worker, to estimate accuracy
  int expert_checks_hi = 40;
  int experience_max = 150;
};

struct CrowdWorker {
  PlayerId id;
  double validator_accuracy = 0.0;  // true, unobserved
  double author_accuracy = 0.0;
  AnnotatorStats stats;             // observed
};

struct CrowdItem {
  GoldLabel truth = GoldLabel::True;
  PlayerId author_id;
  Answer author_answer = Answer::Yes;
  Answer model_answer = Answer::Yes;
  std::vector<Validation> validations;
};

struct CrowdData {
  std::vector<CrowdWorker> workers;
  std::vector<CrowdItem> items;

  std::map<PlayerId, AnnotatorStats> stats() const;
};

// One worker's label for a question whose gold is `truth`.
ValidationLabel sample_label(GoldLabel truth, double accuracy, const CrowdConfig& cc, Rng& rng);

// Two validations per question from distinct non-author workers, plus a
// third when the first two disagree after collapsing.
CrowdData generate_crowd(const CrowdConfig& cc, Rng& rng);

std::vector<VerifierExample> verifier_examples(const CrowdData& data, const PlatformConfig& cfg);

struct CrowdScore {
  double verifier_accuracy = 0.0;
  double majority_accuracy = 0.0;
  double kept_accuracy = 0.0;  // among verdict=keep
  double kept_fraction = 0.0;
  std::size_t n = 0;
};

// Gold-label accuracy of `model` vs plurality vote (random tie-breaks) on
// `data`, both measured against the planted truth.
CrowdScore score_crowd(const VerifierModel& model, const CrowdData& data, const PlatformConfig& cfg,
                       Rng& rng);

}  // namespace qforge
