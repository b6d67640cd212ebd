#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qforge/config.hpp"
#include "qforge/rng.hpp"
#include "qforge/types.hpp"

namespace qforge {

struct AnnotatorStats {
  PlayerId annotator_id;
  double expert_check_accuracy = 0.0;
  int n_expert_checks = 0;
  int n_validations = 0;
  int n_questions_authored = 0;
  int n_questions_discarded = 0;
};

// Multiset of active features, keyed by feature string. Validator features
// read `Label:<L>,Acc:<High|Low>,Exp:<High|Low>`; the single player feature
// reads `Player:Ans:<yes|no>,Model:<yes|no>,Acc:<High|Low>,Exp:<High|Low>`.
struct VerifierFeatureVector {
  std::map<std::string, int> counts;

  bool operator==(const VerifierFeatureVector&) const = default;
};

// Label token used inside feature strings (True, False, DontKnow, ...).
std::string_view feature_label(ValidationLabel l);

// True iff `feature` matches one of the two documented grammars.
bool is_valid_feature(std::string_view feature);

// Annotators missing from `stats` fall into the Low/Low bucket.
VerifierFeatureVector featurize(const std::vector<Validation>& validations,
                                const std::map<PlayerId, AnnotatorStats>& stats,
                                const PlayerId& author_id, Answer player_answer,
                                Answer model_answer, const PlatformConfig& cfg);

// Class order: true, false, bad_question.
constexpr std::size_t kGoldClasses = 3;
using ClassScores = std::array<double, kGoldClasses>;

struct VerifierModel {
  std::map<std::string, ClassScores> weights;
  ClassScores bias{0.0, 0.0, 0.0};

  ClassScores probabilities(const VerifierFeatureVector& fv) const;

  // Hand-set model equivalent to a label vote (ties lean on the author's
  // answer); used when no trained verifier is available.
  static VerifierModel vote_prior();
};

struct VerifierExample {
  VerifierFeatureVector features;
  GoldLabel gold = GoldLabel::True;
};

struct VerifierTraining {
  VerifierModel model;
  double heldout_accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_heldout = 0;
  std::vector<double> loss_history;
};

// Mean cross-entropy + (l2/2)|W|^2 over `data` using feature index `vocab`.
// Parameters are laid out as [feature][class] followed by the 3 biases.
double verifier_objective(const std::vector<double>& params,
                          const std::vector<std::string>& vocab,
                          const std::vector<VerifierExample>& data, double l2,
                          std::vector<double>* grad = nullptr);

std::vector<std::string> verifier_vocabulary(const std::vector<VerifierExample>& data);

// Fits on a seeded 90% split and reports accuracy on the remaining 10%, then
// refits on all data. Throws Error("missing_class") unless all three classes
// occur.
VerifierTraining train_verifier(const std::vector<VerifierExample>& labeled,
                                const PlatformConfig& cfg, std::uint64_t seed);

// `sensitive` forces discard regardless of the model output.
GoldDecision decide_gold(const VerifierModel& model, const VerifierFeatureVector& fv,
                         const PlatformConfig& cfg, bool sensitive = false);

enum class Vote { Yes, No, Tie };

// Throws Error("invalid_argument") on an empty list.
Vote majority_vote(const std::vector<Answer>& answers);

// Plurality over collapsed validation labels; ties broken uniformly at random.
GoldLabel plurality_gold(const std::vector<Validation>& validations, Rng& rng);

struct GateResult {
  bool eligible = true;
  std::string reason;  // "accuracy" or "discard-rate" when ineligible
};

GateResult worker_gate(const AnnotatorStats& stats, const PlatformConfig& cfg);

}  // namespace qforge
