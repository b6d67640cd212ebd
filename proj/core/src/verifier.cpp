#include "qforge/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <unordered_map>

#include "qforge/error.hpp"

namespace qforge {
namespace {

std::size_t class_index(GoldLabel g) { return static_cast<std::size_t>(g); }

ClassScores softmax(const ClassScores& z) {
  const double m = std::max({z[0], z[1], z[2]});
  ClassScores p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kGoldClasses; ++k) {
    p[k] = std::exp(z[k] - m);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

const char* bucket(bool high) { return high ? "High" : "Low"; }

std::pair<bool, bool> buckets_for(const PlayerId& id,
                                  const std::map<PlayerId, AnnotatorStats>& stats,
                                  const PlatformConfig& cfg) {
  auto it = stats.find(id);
  if (it == stats.end()) return {false, false};
  return {it->second.expert_check_accuracy >= cfg.acc_high_threshold,
          it->second.n_validations >= cfg.exp_high_threshold};
}

// Sparse design: per example, (feature slot, count) pairs.
struct Encoded {
  std::vector<std::pair<std::size_t, double>> feats;
  std::size_t y = 0;
};

std::vector<Encoded> encode(const std::vector<VerifierExample>& data,
                            const std::vector<std::string>& vocab) {
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < vocab.size(); ++i) slot.emplace(vocab[i], i);
  std::vector<Encoded> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    Encoded e;
    e.y = class_index(ex.gold);
    for (const auto& [f, c] : ex.features.counts) {
      auto it = slot.find(f);
      if (it != slot.end()) e.feats.emplace_back(it->second, static_cast<double>(c));
    }
    out.push_back(std::move(e));
  }
  return out;
}

double objective_encoded(const std::vector<double>& params, std::size_t n_feats,
                         const std::vector<Encoded>& data, double l2,
                         std::vector<double>* grad) {
  const std::size_t bias_off = n_feats * kGoldClasses;
  if (grad) grad->assign(params.size(), 0.0);
  const double n = static_cast<double>(data.size());
  double loss = 0.0;
  for (const auto& ex : data) {
    ClassScores z{params[bias_off], params[bias_off + 1], params[bias_off + 2]};
    for (const auto& [f, c] : ex.feats) {
      for (std::size_t k = 0; k < kGoldClasses; ++k) z[k] += params[f * kGoldClasses + k] * c;
    }
    const ClassScores p = softmax(z);
    loss -= std::log(std::max(p[ex.y], 1e-300));
    if (grad) {
      for (std::size_t k = 0; k < kGoldClasses; ++k) {
        const double r = (p[k] - (k == ex.y ? 1.0 : 0.0)) / n;
        for (const auto& [f, c] : ex.feats) (*grad)[f * kGoldClasses + k] += r * c;
        (*grad)[bias_off + k] += r;
      }
    }
  }
  loss /= n;
  double sq = 0.0;
  for (std::size_t i = 0; i < bias_off; ++i) sq += params[i] * params[i];
  loss += 0.5 * l2 * sq;
  if (grad) {
    for (std::size_t i = 0; i < bias_off; ++i) (*grad)[i] += l2 * params[i];
  }
  return loss;
}

struct Fit {
  std::vector<double> params;
  std::vector<double> loss_history;
};

// Full-batch gradient descent; a step that raises the objective is retried
// at half the step size.
Fit fit(std::size_t n_feats, const std::vector<Encoded>& data, const PlatformConfig& cfg) {
  Fit out;
  out.params.assign(n_feats * kGoldClasses + kGoldClasses, 0.0);
  std::vector<double> grad;
  double lr = cfg.verifier_learning_rate;
  double loss = objective_encoded(out.params, n_feats, data, cfg.verifier_l2, &grad);
  out.loss_history.push_back(loss);
  for (int it = 0; it < cfg.verifier_iterations; ++it) {
    std::vector<double> trial = out.params;
    for (std::size_t i = 0; i < trial.size(); ++i) trial[i] -= lr * grad[i];
    std::vector<double> trial_grad;
    const double trial_loss = objective_encoded(trial, n_feats, data, cfg.verifier_l2, &trial_grad);
    if (trial_loss > loss) {
      lr *= 0.5;
      if (lr < 1e-12) break;
      continue;
    }
    const double improvement = loss - trial_loss;
    out.params = std::move(trial);
    grad = std::move(trial_grad);
    loss = trial_loss;
    out.loss_history.push_back(loss);
    if (improvement < 1e-12) break;
  }
  return out;
}

VerifierModel to_model(const std::vector<double>& params, const std::vector<std::string>& vocab) {
  VerifierModel m;
  for (std::size_t f = 0; f < vocab.size(); ++f) {
    m.weights[vocab[f]] = ClassScores{params[f * kGoldClasses], params[f * kGoldClasses + 1],
                                      params[f * kGoldClasses + 2]};
  }
  const std::size_t off = vocab.size() * kGoldClasses;
  m.bias = ClassScores{params[off], params[off + 1], params[off + 2]};
  return m;
}

}  // namespace

std::string_view feature_label(ValidationLabel l) {
  switch (l) {
    case ValidationLabel::True: return "True";
    case ValidationLabel::False: return "False";
    case ValidationLabel::DontKnow: return "DontKnow";
    case ValidationLabel::BadQuestion: return "BadQuestion";
    case ValidationLabel::Sensitive: return "Sensitive";
  }
  return "DontKnow";
}

bool is_valid_feature(std::string_view feature) {
  static const std::regex kValidator(
      "Label:(True|False|DontKnow|BadQuestion|Sensitive),Acc:(High|Low),Exp:(High|Low)");
  static const std::regex kPlayer("Player:Ans:(yes|no),Model:(yes|no),Acc:(High|Low),Exp:(High|Low)");
  const std::string s(feature);
  return std::regex_match(s, kValidator) || std::regex_match(s, kPlayer);
}

VerifierFeatureVector featurize(const std::vector<Validation>& validations,
                                const std::map<PlayerId, AnnotatorStats>& stats,
                                const PlayerId& author_id, Answer player_answer,
                                Answer model_answer, const PlatformConfig& cfg) {
  VerifierFeatureVector fv;
  for (const auto& v : validations) {
    const auto [acc, exp] = buckets_for(v.validator_id, stats, cfg);
    std::string f = "Label:";
    f += feature_label(v.label);
    f += ",Acc:";
    f += bucket(acc);
    f += ",Exp:";
    f += bucket(exp);
    ++fv.counts[f];
  }
  const auto [acc, exp] = buckets_for(author_id, stats, cfg);
  std::string p = "Player:Ans:";
  p += to_string(player_answer);
  p += ",Model:";
  p += to_string(model_answer);
  p += ",Acc:";
  p += bucket(acc);
  p += ",Exp:";
  p += bucket(exp);
  ++fv.counts[p];
  return fv;
}

ClassScores VerifierModel::probabilities(const VerifierFeatureVector& fv) const {
  ClassScores z = bias;
  for (const auto& [f, c] : fv.counts) {
    auto it = weights.find(f);
    if (it == weights.end()) continue;
    for (std::size_t k = 0; k < kGoldClasses; ++k) z[k] += it->second[k] * c;
  }
  return softmax(z);
}

VerifierModel VerifierModel::vote_prior() {
  VerifierModel m;
  const char* levels[] = {"High", "Low"};
  for (ValidationLabel l : {ValidationLabel::True, ValidationLabel::False, ValidationLabel::DontKnow,
                            ValidationLabel::BadQuestion, ValidationLabel::Sensitive}) {
    ClassScores w{0.0, 0.0, 0.0};
    w[class_index(collapse(l))] = 2.0;
    for (const char* a : levels) {
      for (const char* e : levels) {
        m.weights["Label:" + std::string(feature_label(l)) + ",Acc:" + a + ",Exp:" + e] = w;
      }
    }
  }
  for (const char* ans : {"yes", "no"}) {
    ClassScores w{0.0, 0.0, 0.0};
    w[std::string(ans) == "yes" ? 0 : 1] = 1.0;
    for (const char* model : {"yes", "no"}) {
      for (const char* a : levels) {
        for (const char* e : levels) {
          m.weights[std::string("Player:Ans:") + ans + ",Model:" + model + ",Acc:" + a + ",Exp:" + e] = w;
        }
      }
    }
  }
  return m;
}

std::vector<std::string> verifier_vocabulary(const std::vector<VerifierExample>& data) {
  std::vector<std::string> vocab;
  for (const auto& ex : data) {
    for (const auto& [f, _] : ex.features.counts) vocab.push_back(f);
  }
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  return vocab;
}

double verifier_objective(const std::vector<double>& params, const std::vector<std::string>& vocab,
                          const std::vector<VerifierExample>& data, double l2,
                          std::vector<double>* grad) {
  if (params.size() != vocab.size() * kGoldClasses + kGoldClasses) {
    throw Error("invalid_argument", "parameter vector does not match vocabulary");
  }
  return objective_encoded(params, vocab.size(), encode(data, vocab), l2, grad);
}

VerifierTraining train_verifier(const std::vector<VerifierExample>& labeled,
                                const PlatformConfig& cfg, std::uint64_t seed) {
  std::array<bool, kGoldClasses> present{};
  for (const auto& ex : labeled) present[class_index(ex.gold)] = true;
  if (!present[0] || !present[1] || !present[2]) {
    throw Error("missing_class", "verifier training needs true, false and bad_question examples");
  }

  std::vector<std::size_t> order(labeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_heldout = labeled.size() / 10;
  std::vector<VerifierExample> train;
  std::vector<VerifierExample> heldout;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_heldout ? heldout : train).push_back(labeled[order[i]]);
  }

  VerifierTraining out;
  out.n_train = train.size();
  out.n_heldout = heldout.size();
  if (!heldout.empty()) {
    const auto vocab = verifier_vocabulary(train);
    const Fit f = fit(vocab.size(), encode(train, vocab), cfg);
    const VerifierModel m = to_model(f.params, vocab);
    std::size_t correct = 0;
    for (const auto& ex : heldout) {
      const ClassScores p = m.probabilities(ex.features);
      const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      if (best == class_index(ex.gold)) ++correct;
    }
    out.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());
  }

  const auto vocab = verifier_vocabulary(labeled);
  Fit full = fit(vocab.size(), encode(labeled, vocab), cfg);
  out.model = to_model(full.params, vocab);
  out.loss_history = std::move(full.loss_history);
  return out;
}

GoldDecision decide_gold(const VerifierModel& model, const VerifierFeatureVector& fv,
                         const PlatformConfig& cfg, bool sensitive) {
  const ClassScores p = model.probabilities(fv);
  const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  GoldDecision d;
  d.label = static_cast<GoldLabel>(best);
  d.confidence = p[best];
  const bool keep = !sensitive && d.label != GoldLabel::BadQuestion &&
                    d.confidence >= cfg.verifier_confidence_floor;
  d.verdict = keep ? Verdict::Keep : Verdict::Discard;
  return d;
}

Vote majority_vote(const std::vector<Answer>& answers) {
  if (answers.empty()) throw Error("invalid_argument", "majority vote over an empty list");
  const auto yes = std::count(answers.begin(), answers.end(), Answer::Yes);
  const auto no = static_cast<std::ptrdiff_t>(answers.size()) - yes;
  if (yes > no) return Vote::Yes;
  if (no > yes) return Vote::No;
  return Vote::Tie;
}

GoldLabel plurality_gold(const std::vector<Validation>& validations, Rng& rng) {
  std::array<int, kGoldClasses> counts{};
  for (const auto& v : validations) ++counts[class_index(collapse(v.label))];
  const int top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::size_t> tied;
  for (std::size_t k = 0; k < kGoldClasses; ++k) {
    if (counts[k] == top) tied.push_back(k);
  }
  return static_cast<GoldLabel>(tied[rng.uniform_below(tied.size())]);
}

GateResult worker_gate(const AnnotatorStats& stats, const PlatformConfig& cfg) {
  if (stats.expert_check_accuracy < cfg.worker_min_expert_accuracy) return {false, "accuracy"};
  if (stats.n_questions_authored > 0) {
    const double rate = static_cast<double>(stats.n_questions_discarded) /
                        static_cast<double>(stats.n_questions_authored);
    if (!(rate < cfg.worker_max_discard_rate)) return {false, "discard-rate"};
  }
  return {true, ""};
}

}  // namespace qforge
