#include "qforge/answer_loop.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>

#include "qforge/error.hpp"
#include "qforge/text.hpp"

namespace qforge {
namespace {

struct TemplateDef {
  const char* name;
  const char* key;  // normalized lookup key
  const char* pattern;
};

constexpr std::array<TemplateDef, 8> kTemplates{{
    {"part-of", "partof", "a {head} is part of a {tail}"},
    {"is-a", "isa", "a {head} is a {tail}"},
    {"capable-of", "capableof", "a {head} is capable of {tail}"},
    {"has", "has", "a {head} has a {tail}"},
    {"used-for", "usedfor", "a {head} is used for {tail}"},
    {"at-location", "atlocation", "a {head} is found at a {tail}"},
    {"causes", "causes", "{head} causes {tail}"},
    {"made-of", "madeof", "a {head} is made of {tail}"},
}};

std::string relation_key(std::string_view relation) {
  if (relation.rfind("/r/", 0) == 0) relation.remove_prefix(3);
  std::string key;
  for (char c : relation) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "hasa") key = "has";
  return key;
}

const TemplateDef* find_template(std::string_view relation) {
  const std::string key = relation_key(relation);
  for (const auto& t : kTemplates) {
    if (key == t.key) return &t;
  }
  return nullptr;
}

std::string fill(const TemplateDef& t, std::string_view head, std::string_view tail) {
  std::string out = t.pattern;
  auto replace = [&out](std::string_view slot, std::string_view value) {
    const std::size_t pos = out.find(slot);
    if (pos != std::string::npos) out.replace(pos, slot.size(), value);
  };
  replace("{head}", text::canonical(head));
  replace("{tail}", text::canonical(tail));
  return out;
}

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + exp(s)) without overflow
double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double dot(const std::vector<double>& w, const SparseVector& x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.index.size(); ++k) s += w[x.index[k]] * x.value[k];
  return s;
}

}  // namespace

std::string_view to_string(SeedSource s) {
  switch (s) {
    case SeedSource::TwentyQStyle: return "twentyq-style";
    case SeedSource::TripleTemplate: return "triple-template";
    case SeedSource::Collected: return "collected";
  }
  return "collected";
}

SeedSource parse_seed_source(std::string_view s) {
  if (s == "twentyq-style") return SeedSource::TwentyQStyle;
  if (s == "triple-template") return SeedSource::TripleTemplate;
  if (s == "collected") return SeedSource::Collected;
  throw Error("bad_enum", "unknown seed source '" + std::string(s) + "'");
}

std::vector<std::string> registered_relations() {
  std::vector<std::string> out;
  for (const auto& t : kTemplates) out.emplace_back(t.name);
  return out;
}

bool has_template(std::string_view relation) { return find_template(relation) != nullptr; }

SeedExample templated_assertion(std::string_view head, std::string_view relation,
                                std::string_view tail) {
  const TemplateDef* t = find_template(relation);
  if (!t) throw Error("unknown_relation", "no template for relation '" + std::string(relation) + "'");
  return SeedExample{fill(*t, head, tail), Answer::Yes, SeedSource::TripleTemplate};
}

SeedExample corrupt_triple(const Triple& triple, const ConceptBank& bank, Rng& rng,
                           const std::set<Triple>& known_true) {
  const TemplateDef* t = find_template(triple.relation);
  if (!t) {
    throw Error("unknown_relation", "no template for relation '" + triple.relation + "'");
  }
  if (bank.concepts.size() < 2) throw Error("degenerate_bank", "corruption needs >= 2 concepts");

  auto acceptable = [&](const std::string& candidate) {
    if (candidate == triple.tail) return false;
    return known_true.empty() ||
           known_true.count(Triple{triple.head, triple.relation, candidate}) == 0;
  };
  // rejection sampling first, exhaustive fallback keeps this total
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto& c = bank.concepts[rng.uniform_below(bank.concepts.size())].concept_text;
    if (acceptable(c)) {
      return SeedExample{fill(*t, triple.head, c), Answer::No, SeedSource::TripleTemplate};
    }
  }
  std::vector<std::size_t> options;
  for (std::size_t i = 0; i < bank.concepts.size(); ++i) {
    if (acceptable(bank.concepts[i].concept_text)) options.push_back(i);
  }
  if (options.empty()) {
    throw Error("degenerate_bank", "no concept can replace the tail of (" + triple.head + ", " +
                                       triple.relation + ", " + triple.tail + ")");
  }
  const auto& c = bank.concepts[options[rng.uniform_below(options.size())]].concept_text;
  return SeedExample{fill(*t, triple.head, c), Answer::No, SeedSource::TripleTemplate};
}

SeedCorpus build_seed_corpus(const std::vector<Triple>& triples, const ConceptBank& bank, Rng& rng) {
  SeedCorpus corpus;
  std::set<Triple> known(triples.begin(), triples.end());
  for (const Triple& tr : triples) {
    if (!has_template(tr.relation)) {
      ++corpus.skipped_unknown_relation;
      continue;
    }
    corpus.examples.push_back(templated_assertion(tr.head, tr.relation, tr.tail));
    corpus.examples.push_back(corrupt_triple(tr, bank, rng, known));
  }
  return corpus;
}

SparseVector featurize_text(std::string_view question, int hash_bits) {
  const std::uint32_t mask = (std::uint32_t{1} << hash_bits) - 1;
  std::map<std::uint32_t, double> counts;
  auto add = [&](std::string_view prefix, std::string_view feature) {
    std::uint64_t h = text::fnv1a64(prefix);
    h = text::fnv1a64(feature, h);
    counts[static_cast<std::uint32_t>(h) & mask] += 1.0;
  };
  for (const std::string& tok : text::tokenize(question)) add("w:", tok);
  const std::u32string padded = text::to_code_points(" " + text::canonical(question) + " ");
  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      add("c:", text::to_utf8(std::u32string_view(padded).substr(i, n)));
    }
  }
  SparseVector x;
  double norm = 0.0;
  for (const auto& [idx, c] : counts) norm += c * c;
  norm = std::sqrt(norm);
  for (const auto& [idx, c] : counts) {
    x.index.push_back(idx);
    x.value.push_back(c / norm);
  }
  return x;
}

AnswerModel::AnswerModel(int hash_bits)
    : hash_bits_(hash_bits), weights_(std::size_t{1} << hash_bits, 0.0) {}

double AnswerModel::score(const SparseVector& x) const { return dot(weights_, x) + bias_; }

double AnswerModel::score(std::string_view question_text) const {
  return score(featurize_text(question_text, hash_bits_));
}

AnswerResult AnswerModel::answer(std::string_view question_text) const {
  const double p = sigmoid(score(question_text));
  if (p >= 0.5) return AnswerResult{Answer::Yes, p};
  return AnswerResult{Answer::No, 1.0 - p};
}

std::vector<LabeledVector> featurize_examples(const std::vector<SeedExample>& examples,
                                              int hash_bits) {
  std::vector<LabeledVector> data;
  data.reserve(examples.size());
  for (const auto& ex : examples) {
    data.push_back(LabeledVector{featurize_text(ex.text, hash_bits), ex.label == Answer::Yes ? 1.0 : 0.0});
  }
  return data;
}

double answerer_objective(const std::vector<double>& weights, double bias,
                          const std::vector<LabeledVector>& data, double l2,
                          std::vector<double>* grad_weights, double* grad_bias) {
  if (grad_weights) grad_weights->assign(weights.size(), 0.0);
  if (grad_bias) *grad_bias = 0.0;
  const double n = static_cast<double>(data.size());
  double loss = 0.0;
  for (const auto& ex : data) {
    const double s = dot(weights, ex.x) + bias;
    loss += softplus(s) - ex.y * s;
    const double r = (sigmoid(s) - ex.y) / n;
    if (grad_weights) {
      for (std::size_t k = 0; k < ex.x.index.size(); ++k) (*grad_weights)[ex.x.index[k]] += r * ex.x.value[k];
    }
    if (grad_bias) *grad_bias += r;
  }
  loss /= n;
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  loss += 0.5 * l2 * sq;
  if (grad_weights) {
    for (std::size_t i = 0; i < weights.size(); ++i) (*grad_weights)[i] += l2 * weights[i];
  }
  return loss;
}

namespace {

// w = scale * v, so the L2 shrink is O(1) per step.
struct ScaledWeights {
  std::vector<double> v;
  double scale = 1.0;
  double bias = 0.0;

  double dot(const SparseVector& x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < x.index.size(); ++k) s += v[x.index[k]] * x.value[k];
    return scale * s + bias;
  }

  void normalize() {
    if (scale == 1.0) return;
    for (double& w : v) w *= scale;
    scale = 1.0;
  }
};

double objective(const ScaledWeights& w, const std::vector<LabeledVector>& data, double l2) {
  double loss = 0.0;
  for (const auto& ex : data) {
    const double s = w.dot(ex.x);
    loss += softplus(s) - ex.y * s;
  }
  loss /= static_cast<double>(data.size());
  double sq = 0.0;
  for (double x : w.v) sq += x * x;
  return loss + 0.5 * l2 * w.scale * w.scale * sq;
}

}  // namespace

AnswererTraining train_answerer_detailed(const std::vector<SeedExample>& examples,
                                         const PlatformConfig& cfg, std::uint64_t seed,
                                         int version) {
  bool has_yes = false;
  bool has_no = false;
  for (const auto& e : examples) (e.label == Answer::Yes ? has_yes : has_no) = true;
  if (examples.size() < 2 || !has_yes || !has_no) {
    throw Error("single_class", "training needs at least one yes and one no example");
  }

  const auto data = featurize_examples(examples, cfg.hash_bits);
  const double l2 = cfg.answerer_l2;
  double lr = cfg.answerer_learning_rate;
  const std::size_t batch = static_cast<std::size_t>(cfg.answerer_batch_size);

  ScaledWeights w;
  w.v.assign(std::size_t{1} << cfg.hash_bits, 0.0);

  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  AnswererTraining out;
  double prev = objective(w, data, l2);
  out.epoch_loss.push_back(prev);

  for (int epoch = 0; epoch < cfg.answerer_epochs; ++epoch) {
    const ScaledWeights snapshot = w;
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      // residuals are taken at the pre-step point for the whole batch
      std::vector<double> residual(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        residual[i - start] = (sigmoid(w.dot(ex.x)) - ex.y) * inv_b;
      }
      w.scale *= (1.0 - lr * l2);
      if (w.scale < 1e-6) w.normalize();
      double gb = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        const double r = residual[i - start];
        for (std::size_t k = 0; k < ex.x.index.size(); ++k) {
          w.v[ex.x.index[k]] -= lr * r * ex.x.value[k] / w.scale;
        }
        gb += r;
      }
      w.bias -= lr * gb;
    }
    ++out.epochs_run;
    const double loss = objective(w, data, l2);
    if (!(loss <= prev)) {
      w = snapshot;
      lr *= 0.5;
      out.epoch_loss.push_back(prev);
      continue;
    }
    out.epoch_loss.push_back(loss);
    const double improvement = prev - loss;
    prev = loss;
    if (improvement < cfg.answerer_min_improvement) break;
  }

  w.normalize();
  out.model = AnswerModel(cfg.hash_bits);
  out.model.mutable_weights() = std::move(w.v);
  out.model.set_bias(w.bias);
  out.model.set_version(version);
  return out;
}

AnswerModel train_answerer(const std::vector<SeedExample>& examples, const PlatformConfig& cfg,
                           std::uint64_t seed, int version) {
  return train_answerer_detailed(examples, cfg, seed, version).model;
}

std::optional<RetrainJob> retrain_check(RetrainCounter& counter, const PlatformConfig& cfg) {
  for (std::int64_t t : cfg.retrain_thresholds) {
    if (t > counter.unvalidated_count) break;
    if (counter.fired_thresholds.insert(t).second) {
      return RetrainJob{t, counter.unvalidated_count};
    }
  }
  return std::nullopt;
}

std::optional<RetrainJob> RetrainScheduler::record_question() {
  std::lock_guard lock(mu_);
  ++counter_.unvalidated_count;
  return retrain_check(counter_, cfg_);
}

RetrainCounter RetrainScheduler::snapshot() const {
  std::lock_guard lock(mu_);
  return counter_;
}

}  // namespace qforge
