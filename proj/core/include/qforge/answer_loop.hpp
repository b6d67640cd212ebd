#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "qforge/config.hpp"
#include "qforge/prompts.hpp"
#include "qforge/rng.hpp"
#include "qforge/types.hpp"

namespace qforge {

enum class SeedSource { TwentyQStyle, TripleTemplate, Collected };

std::string_view to_string(SeedSource s);
SeedSource parse_seed_source(std::string_view s);

struct SeedExample {
  std::string text;
  Answer label = Answer::Yes;
  SeedSource source = SeedSource::TripleTemplate;

  bool operator==(const SeedExample&) const = default;
};

// Relations with a registered surface template. Accepts ConceptNet spellings
// ("PartOf", "/r/PartOf") as well as kebab-case ("part-of").
std::vector<std::string> registered_relations();
bool has_template(std::string_view relation);

// Literal template fill, label yes. Throws Error("unknown_relation").
SeedExample templated_assertion(std::string_view head, std::string_view relation,
                                std::string_view tail);

// Replaces the tail with a different bank concept (never the original tail,
// never a triple listed in `known_true`), label no. Throws
// Error("degenerate_bank") when no replacement exists.
SeedExample corrupt_triple(const Triple& triple, const ConceptBank& bank, Rng& rng,
                           const std::set<Triple>& known_true = {});

struct SeedCorpus {
  std::vector<SeedExample> examples;
  std::size_t skipped_unknown_relation = 0;
};

// One templated positive and one corrupted negative per usable triple.
SeedCorpus build_seed_corpus(const std::vector<Triple>& triples, const ConceptBank& bank, Rng& rng);

// Sparse feature vector: strictly increasing indices, L2-normalized values.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

// Hashed word unigrams + character 3-5-grams over the canonical text.
// Colliding features share a bucket.
SparseVector featurize_text(std::string_view text, int hash_bits);

struct AnswerResult {
  Answer label = Answer::Yes;
  double confidence = 0.5;  // probability of `label`, >= 0.5
};

// Anything that can answer a yes/no question. Implementations must be safe
// to call concurrently.
class Answerer {
 public:
  virtual ~Answerer() = default;
  virtual AnswerResult answer(std::string_view question_text) const = 0;
  virtual int version() const = 0;
};

class AnswerModel final : public Answerer {
 public:
  AnswerModel() = default;
  explicit AnswerModel(int hash_bits);

  AnswerResult answer(std::string_view question_text) const override;
  int version() const override { return version_; }

  double score(std::string_view question_text) const;
  double score(const SparseVector& x) const;

  int hash_bits() const { return hash_bits_; }
  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }

  void set_bias(double b) { bias_ = b; }
  void set_version(int v) { version_ = v; }
  std::vector<double>& mutable_weights() { return weights_; }

 private:
  int hash_bits_ = 18;
  std::vector<double> weights_ = std::vector<double>(std::size_t{1} << 18, 0.0);
  double bias_ = 0.0;
  int version_ = 0;
};

struct LabeledVector {
  SparseVector x;
  double y = 0.0;  // 1 = yes
};

std::vector<LabeledVector> featurize_examples(const std::vector<SeedExample>& examples,
                                              int hash_bits);

// Mean log-loss + (l2/2)|w|^2 (bias unregularized). Fills the gradient when
// the out-parameters are non-null.
double answerer_objective(const std::vector<double>& weights, double bias,
                          const std::vector<LabeledVector>& data, double l2,
                          std::vector<double>* grad_weights = nullptr,
                          double* grad_bias = nullptr);

struct AnswererTraining {
  AnswerModel model;
  std::vector<double> epoch_loss;  // [0] = initial objective, then one per epoch
  int epochs_run = 0;
};

// Mini-batch gradient descent with L2. An epoch that raises the full-data
// objective is rolled back and the step size halved, so `epoch_loss` is
// non-increasing. Stops after cfg.answerer_epochs epochs or when an accepted
// epoch improves the objective by less than cfg.answerer_min_improvement.
// Throws Error("single_class") unless both labels are present.
AnswererTraining train_answerer_detailed(const std::vector<SeedExample>& examples,
                                         const PlatformConfig& cfg, std::uint64_t seed,
                                         int version = 0);
AnswerModel train_answerer(const std::vector<SeedExample>& examples, const PlatformConfig& cfg,
                           std::uint64_t seed, int version = 0);

// Client for an external model speaking POST /answer {"question"} ->
// {"label","confidence"}.
class HttpAnswerer final : public Answerer {
 public:
  HttpAnswerer(std::string host, int port, int version = 0);

  AnswerResult answer(std::string_view question_text) const override;
  int version() const override { return version_; }

 private:
  std::string host_;
  int port_;
  int version_;
};

struct RetrainCounter {
  std::int64_t unvalidated_count = 0;
  std::set<std::int64_t> fired_thresholds;
};

struct RetrainJob {
  std::optional<std::int64_t> threshold;  // empty for manual triggers
  std::int64_t question_count = 0;
};

// Fires the smallest unfired threshold <= count, marking it fired. At most one
// job per call.
std::optional<RetrainJob> retrain_check(RetrainCounter& counter, const PlatformConfig& cfg);

// Thread-safe wrapper: the count increment and the fired-set update happen
// under one lock.
class RetrainScheduler {
 public:
  explicit RetrainScheduler(PlatformConfig cfg) : cfg_(std::move(cfg)) {}

  std::optional<RetrainJob> record_question();
  RetrainCounter snapshot() const;

 private:
  PlatformConfig cfg_;
  mutable std::mutex mu_;
  RetrainCounter counter_;
};

}  // namespace qforge
