#include "qforge/crowd_generator.hpp"

#include <algorithm>

#include "qforge/error.hpp"

namespace qforge {

std::map<PlayerId, AnnotatorStats> CrowdData::stats() const {
  std::map<PlayerId, AnnotatorStats> out;
  for (const auto& w : workers) out[w.id] = w.stats;
  return out;
}

ValidationLabel sample_label(GoldLabel truth, double accuracy, const CrowdConfig& cc, Rng& rng) {
  const bool correct = rng.bernoulli(accuracy);
  switch (truth) {
    case GoldLabel::True:
    case GoldLabel::False: {
      const ValidationLabel right = truth == GoldLabel::True ? ValidationLabel::True : ValidationLabel::False;
      const ValidationLabel opposite = truth == GoldLabel::True ? ValidationLabel::False : ValidationLabel::True;
      if (correct) return right;
      const double u = rng.uniform01();
      if (u < cc.wrong_opposite) return opposite;
      if (u < cc.wrong_opposite + cc.wrong_dont_know) return ValidationLabel::DontKnow;
      return ValidationLabel::BadQuestion;
    }
    case GoldLabel::BadQuestion:
      if (correct) return ValidationLabel::BadQuestion;
      return rng.bernoulli(0.5) ? ValidationLabel::True : ValidationLabel::False;
  }
  return ValidationLabel::DontKnow;
}

CrowdData generate_crowd(const CrowdConfig& cc, Rng& rng) {
  if (cc.n_workers < 4) throw Error("invalid_argument", "crowd needs at least 4 workers");
  CrowdData data;
  data.workers.reserve(cc.n_workers);
  for (std::size_t i = 0; i < cc.n_workers; ++i) {
    CrowdWorker w;
    w.id = "w" + std::to_string(i);
    w.validator_accuracy = rng.uniform(cc.validator_accuracy_lo, cc.validator_accuracy_hi);
    w.author_accuracy = rng.uniform(cc.author_accuracy_lo, cc.author_accuracy_hi);
    w.stats.annotator_id = w.id;
    const int checks = cc.expert_checks_lo +
                       static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(cc.expert_checks_hi - cc.expert_checks_lo + 1)));
    int hits = 0;
    for (int c = 0; c < checks; ++c) hits += rng.bernoulli(w.validator_accuracy) ? 1 : 0;
    w.stats.n_expert_checks = checks;
    w.stats.expert_check_accuracy = checks == 0 ? 0.0 : static_cast<double>(hits) / checks;
    w.stats.n_validations = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(cc.experience_max + 1)));
    data.workers.push_back(std::move(w));
  }

  data.items.reserve(cc.n_questions);
  for (std::size_t q = 0; q < cc.n_questions; ++q) {
    CrowdItem item;
    if (rng.bernoulli(cc.bad_fraction)) {
      item.truth = GoldLabel::BadQuestion;
    } else {
      item.truth = rng.bernoulli(cc.yes_fraction) ? GoldLabel::True : GoldLabel::False;
    }
    const std::size_t author = static_cast<std::size_t>(rng.uniform_below(cc.n_workers));
    const CrowdWorker& a = data.workers[author];
    item.author_id = a.id;
    if (item.truth == GoldLabel::BadQuestion) {
      item.author_answer = rng.bernoulli(0.5) ? Answer::Yes : Answer::No;
      item.model_answer = rng.bernoulli(0.5) ? Answer::Yes : Answer::No;
    } else {
      const Answer right = *to_answer(item.truth);
      item.author_answer = rng.bernoulli(a.author_accuracy) ? right : flip(right);
      item.model_answer = rng.bernoulli(cc.model_accuracy) ? right : flip(right);
    }

    std::vector<std::size_t> used{author};
    auto add_validation = [&] {
      std::size_t v;
      do {
        v = static_cast<std::size_t>(rng.uniform_below(cc.n_workers));
      } while (std::find(used.begin(), used.end(), v) != used.end());
      used.push_back(v);
      const CrowdWorker& w = data.workers[v];
      item.validations.push_back(
          Validation{w.id, sample_label(item.truth, w.validator_accuracy, cc, rng), false, 0});
    };
    add_validation();
    add_validation();
    if (collapse(item.validations[0].label) != collapse(item.validations[1].label)) add_validation();
    data.items.push_back(std::move(item));
  }
  return data;
}

std::vector<VerifierExample> verifier_examples(const CrowdData& data, const PlatformConfig& cfg) {
  const auto stats = data.stats();
  std::vector<VerifierExample> out;
  out.reserve(data.items.size());
  for (const auto& item : data.items) {
    out.push_back(VerifierExample{
        featurize(item.validations, stats, item.author_id, item.author_answer, item.model_answer, cfg),
        item.truth});
  }
  return out;
}

CrowdScore score_crowd(const VerifierModel& model, const CrowdData& data, const PlatformConfig& cfg,
                       Rng& rng) {
  const auto stats = data.stats();
  CrowdScore s;
  s.n = data.items.size();
  std::size_t v_ok = 0, m_ok = 0, kept = 0, kept_ok = 0;
  for (const auto& item : data.items) {
    const auto fv = featurize(item.validations, stats, item.author_id, item.author_answer, item.model_answer, cfg);
    const GoldDecision d = decide_gold(model, fv, cfg);
    if (d.label == item.truth) ++v_ok;
    if (plurality_gold(item.validations, rng) == item.truth) ++m_ok;
    if (d.verdict == Verdict::Keep) {
      ++kept;
      if (d.label == item.truth) ++kept_ok;
    }
  }
  if (s.n == 0) return s;
  s.verifier_accuracy = static_cast<double>(v_ok) / static_cast<double>(s.n);
  s.majority_accuracy = static_cast<double>(m_ok) / static_cast<double>(s.n);
  s.kept_accuracy = kept == 0 ? 0.0 : static_cast<double>(kept_ok) / static_cast<double>(kept);
  s.kept_fraction = static_cast<double>(kept) / static_cast<double>(s.n);
  return s;
}

}  // namespace qforge
