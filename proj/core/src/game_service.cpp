#include "qforge/game_service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "qforge/dataset.hpp"
#include "qforge/error.hpp"
#include "qforge/text.hpp"

namespace qforge {
namespace {

constexpr std::int64_t kDayMs = 24LL * 60 * 60 * 1000;

bool labels_agree(const std::vector<Validation>& vs) {
  if (vs.size() < 2) return false;
  const GoldLabel first = collapse(vs.front().label);
  return std::all_of(vs.begin(), vs.end(),
                     [&](const Validation& v) { return collapse(v.label) == first; });
}

}  // namespace

TimestampMs system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string_view to_string(Band b) {
  switch (b) {
    case Band::Red:
      return "red";
    case Band::Yellow:
      return "yellow";
    case Band::Green:
      return "green";
  }
  return "red";
}

Band band_for(double value) {
  if (value < 0.15) return Band::Red;
  if (value < 0.30) return Band::Yellow;
  return Band::Green;
}

std::string_view to_string(NotificationKind k) {
  return k == NotificationKind::AnswerFlipped ? "answer_flipped" : "question_discarded";
}

JobQueue::JobQueue() : worker_([this] { run(); }) {}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  worker_.join();
}

void JobQueue::push(std::function<void()> job) {
  {
    std::lock_guard lock(mu_);
    jobs_.push_back(std::move(job));
  }
  cv_.notify_one();
}

void JobQueue::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return jobs_.empty() && !busy_; });
}

void JobQueue::run() {
  for (;;) {
    std::function<void()> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
      busy_ = true;
    }
    try {
      job();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "background job failed: %s\n", e.what());
    }
    {
      std::lock_guard lock(mu_);
      busy_ = false;
      if (jobs_.empty()) idle_cv_.notify_all();
    }
  }
}

GameService::GameService(ServiceOptions opts)
    : opts_(std::move(opts)),
      rng_(opts_.cfg.rng_seed),
      answerer_(opts_.answerer),
      scheduler_(opts_.cfg) {
  validate(opts_.cfg);
  if (!answerer_) throw Error("bad_request", "service needs an answerer");
  if (opts_.bank.concepts.empty() || opts_.bank.relational_prompts.empty()) {
    throw Error("bad_request", "service needs a non-empty concept bank");
  }
  if (!opts_.clock) opts_.clock = system_now_ms;
  for (const auto& x : opts_.expert_pool) experts_[x.id] = x;
}

GameService::~GameService() { jobs_.wait_idle(); }

TimestampMs GameService::now() const { return opts_.clock(); }

Session GameService::open_session(const PlayerId& player_id) {
  if (player_id.empty()) throw Error("bad_request", "player_id is required");
  std::lock_guard lock(mu_);
  auto prev = active_token_.find(player_id);
  if (prev != active_token_.end()) sessions_.erase(prev->second);
  Session s;
  s.session_id = text::hex64(rng_.next_u64()) + text::hex64(rng_.next_u64());
  s.player_id = player_id;
  s.started_at = now();
  s.last_seen = s.started_at;
  s.idle_timeout_ms = opts_.cfg.session_idle_timeout_ms;
  sessions_[s.session_id] = s;
  active_token_[player_id] = s.session_id;
  player_locked(player_id);
  stats_locked(player_id);
  return s;
}

Session GameService::authenticate(const std::string& token) {
  std::lock_guard lock(mu_);
  return touch_locked(token);
}

Session GameService::touch_locked(const std::string& token) {
  auto it = sessions_.find(token);
  if (it == sessions_.end()) throw Error("unauthorized", "unknown session token");
  const TimestampMs t = now();
  if (t - it->second.last_seen > it->second.idle_timeout_ms) {
    active_token_.erase(it->second.player_id);
    sessions_.erase(it);
    throw Error("session_expired", "session idle past its timeout");
  }
  it->second.last_seen = t;
  return it->second;
}

GameService::PlayerState& GameService::player_locked(const PlayerId& id) { return players_[id]; }

AnnotatorStats& GameService::stats_locked(const PlayerId& id) {
  auto& s = stats_[id];
  s.annotator_id = id;
  return s;
}

void GameService::clear_route_locked(const PlayerId& id) {
  auto& p = player_locked(id);
  if (p.routed && !p.routed_expert) {
    auto it = records_.find(*p.routed);
    if (it != records_.end()) it->second.inflight.erase(id);
  }
  p.routed.reset();
  p.routed_expert = false;
}

bool GameService::routable_locked(const Record& r, const PlayerId& player) const {
  const Question& q = r.question;
  if (q.state != QuestionState::Pending || !q.feedback_given || !r.leak_checked) return false;
  if (q.author_id == player) return false;
  for (const auto& v : q.validations) {
    if (v.validator_id == player) return false;
  }
  if (r.inflight.count(player) > 0) return false;
  const std::size_t have = q.validations.size() + r.inflight.size();
  if (have < 2) return true;
  return q.validations.size() == 2 && r.inflight.empty() && !labels_agree(q.validations);
}

Task GameService::next_task(const std::string& token) {
  std::lock_guard lock(mu_);
  const Session s = touch_locked(token);
  AnnotatorStats effective = stats_locked(s.player_id);
  if (effective.n_expert_checks < opts_.cfg.gate_min_history) {
    effective.expert_check_accuracy = opts_.cfg.unmeasured_accuracy_prior;
  }
  if (effective.n_questions_authored < opts_.cfg.gate_min_history) {
    effective.n_questions_discarded = 0;
  }
  const GateResult gate = worker_gate(effective, opts_.cfg);
  if (!gate.eligible) throw Error("ineligible", "player fails the " + gate.reason + " gate");

  clear_route_locked(s.player_id);
  auto& p = player_locked(s.player_id);
  Task task;
  if (!rng_.bernoulli(opts_.cfg.compose_fraction)) {
    if (!experts_.empty() && rng_.bernoulli(opts_.cfg.expert_check_fraction)) {
      auto it = experts_.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(rng_.uniform_below(experts_.size())));
      p.routed = it->first;
      p.routed_expert = true;
      task.validate = ValidateTask{it->first, it->second.text, true};
      return task;
    }
    for (const auto& id : order_) {
      auto& r = records_.at(id);
      if (!routable_locked(r, s.player_id)) continue;
      r.inflight.insert(s.player_id);
      p.routed = id;
      task.validate = ValidateTask{id, r.question.text, false};
      return task;
    }
  }
  p.issued_pair = sample_prompt_pair(opts_.bank, rng_);
  task.compose = ComposeTask{*p.issued_pair};
  return task;
}

std::shared_ptr<const Answerer> GameService::current_answerer() const {
  std::lock_guard lock(model_mu_);
  return answerer_;
}

AnswerResult GameService::answer(const std::string& text) const {
  return current_answerer()->answer(text);
}

int GameService::model_version() const { return current_answerer()->version(); }

SubmitResult GameService::submit_question(const std::string& token, const std::string& text,
                                          const std::optional<PromptPair>& pair,
                                          Answer author_answer) {
  if (text::canonical(text).empty()) throw Error("bad_request", "question text is empty");
  PromptPair issued;
  PlayerId author;
  {
    std::lock_guard lock(mu_);
    const Session s = touch_locked(token);
    author = s.player_id;
    auto& p = player_locked(author);
    if (!p.issued_pair) throw Error("not_routed", "no compose task was issued to this player");
    if (pair && !(*pair == *p.issued_pair)) {
      throw Error("not_routed", "prompt pair does not match the issued compose task");
    }
    if (authored_text_.count({author, text::canonical(text)}) > 0) {
      throw Error("duplicate", "question already submitted by this player");
    }
    issued = *p.issued_pair;
  }

  const auto model = current_answerer();
  const AnswerResult ans = model->answer(text);

  std::lock_guard lock(mu_);
  const std::string key = text::canonical(text);
  if (authored_text_.count({author, key}) > 0) {
    throw Error("duplicate", "question already submitted by this player");
  }
  auto& p = player_locked(author);
  if (!p.issued_pair || !(*p.issued_pair == issued)) {
    throw Error("not_routed", "compose task was superseded");
  }
  p.issued_pair.reset();

  char buf[32];
  std::snprintf(buf, sizeof buf, "q%06llu", static_cast<unsigned long long>(next_id_++));
  Record r;
  Question& q = r.question;
  q.id = buf;
  q.text = text;
  q.prompt_pair = issued;
  q.author_id = author;
  q.author_answer = author_answer;
  q.model_answer = ans.label;
  q.model_confidence = ans.confidence;
  q.model_version = model->version();
  q.created_at = now();
  r.leak_checked = opts_.snippets == nullptr;
  authored_text_[{author, key}] = q.id;
  order_.push_back(q.id);

  SubmitResult out;
  out.question_id = q.id;
  out.model_answer = ans.label;
  out.confidence = ans.confidence;
  out.model_version = q.model_version;
  out.usage = detect_usage(text, issued);
  out.points_preview = score_compose(ComposeOutcome{ans.label != author_answer, out.usage}, opts_.cfg);
  records_.emplace(q.id, std::move(r));
  return out;
}

int GameService::submit_feedback(const std::string& token, const QuestionId& id, bool model_correct) {
  int points = 0;
  std::optional<RetrainJob> job;
  std::string text;
  bool check_leak = false;
  {
    std::lock_guard lock(mu_);
    const Session s = touch_locked(token);
    auto it = records_.find(id);
    if (it == records_.end()) throw Error("not_found", "no question " + id);
    Question& q = it->second.question;
    if (q.author_id != s.player_id) throw Error("not_found", "no question " + id + " for this player");
    if (q.feedback_given) throw Error("duplicate", "feedback already recorded for " + id);
    if (model_correct != (q.model_answer == q.author_answer)) {
      throw Error("inconsistent_feedback", "mark disagrees with the author's stated answer");
    }
    q.feedback_given = true;
    q.author_marked_model_correct = model_correct;
    const UsageFlags usage = detect_usage(q.text, q.prompt_pair);
    points = score_compose(ComposeOutcome{!model_correct, usage}, opts_.cfg);
    ledger_.append(LedgerEvent{q.author_id, LedgerKind::ComposeOutcome, points, q.id, now()});
    ++stats_locked(q.author_id).n_questions_authored;
    job = scheduler_.record_question();
    check_leak = !it->second.leak_checked;
    text = q.text;
  }
  if (check_leak) enqueue([this, id, text] { run_leak_check(id, text); });
  if (job) enqueue([this, j = *job] { run_retrain(j); });
  return points;
}

void GameService::notify_locked(const Question& q, NotificationKind kind, int delta) {
  if (!notified_.insert({q.id, kind}).second) return;
  Notification n;
  n.player_id = q.author_id;
  n.kind = kind;
  n.question_id = q.id;
  n.delta = delta;
  if (kind == NotificationKind::AnswerFlipped) {
    n.message = "Validators changed the answer to \"" + q.text + "\" (" + std::to_string(delta) + ")";
  } else {
    n.message = "\"" + q.text + "\" was discarded (" + std::to_string(delta) + ")";
  }
  notifications_.push_back(std::move(n));
}

void GameService::decide_locked(Record& r) {
  Question& q = r.question;
  const bool sensitive = std::any_of(q.validations.begin(), q.validations.end(), [](const Validation& v) {
    return v.label == ValidationLabel::Sensitive;
  });
  const auto fv = featurize(q.validations, stats_, q.author_id, q.author_answer, q.model_answer, opts_.cfg);
  const GoldDecision d = decide_gold(opts_.verifier, fv, opts_.cfg, sensitive);
  q.decision = d;
  q.decided_at = now();
  if (d.verdict == Verdict::Discard) {
    q.state = QuestionState::Discarded;
    ++stats_locked(q.author_id).n_questions_discarded;
    const auto e = ledger_.apply_adjustment(q.author_id, q.id, Adjustment::Discarded, opts_.cfg, q.decided_at);
    notify_locked(q, NotificationKind::QuestionDiscarded, e.delta);
    return;
  }
  q.state = QuestionState::Validated;
  if (to_answer(d.label) != q.author_answer) {
    const auto e = ledger_.apply_adjustment(q.author_id, q.id, Adjustment::AnswerFlipped, opts_.cfg, q.decided_at);
    notify_locked(q, NotificationKind::AnswerFlipped, e.delta);
  }
}

ValidationResult GameService::submit_validation(const std::string& token, const QuestionId& id,
                                                ValidationLabel label) {
  std::lock_guard lock(mu_);
  const Session s = touch_locked(token);
  auto& p = player_locked(s.player_id);
  if (auto rec = records_.find(id); rec != records_.end()) {
    for (const auto& v : rec->second.question.validations) {
      if (v.validator_id == s.player_id) throw Error("already_validated", "player already validated " + id);
    }
  }
  if (!p.routed || *p.routed != id) throw Error("not_routed", "question " + id + " was not routed to this player");
  ValidationResult out;
  const TimestampMs t = now();

  if (p.routed_expert) {
    const ExpertItem& x = experts_.at(id);
    const bool matched = collapse(label) == x.gold;
    out.delta = score_validation(true, matched, opts_.cfg);
    ledger_.append(LedgerEvent{s.player_id, LedgerKind::ValidationReward, out.delta, id, t});
    auto& st = stats_locked(s.player_id);
    st.expert_check_accuracy =
        (st.expert_check_accuracy * st.n_expert_checks + (matched ? 1.0 : 0.0)) / (st.n_expert_checks + 1);
    ++st.n_expert_checks;
    p.expert_results.emplace_back(t, matched);
    p.routed.reset();
    p.routed_expert = false;
    return out;
  }

  auto it = records_.find(id);
  if (it == records_.end()) throw Error("not_found", "no question " + id);
  Record& r = it->second;
  Question& q = r.question;
  r.inflight.erase(s.player_id);
  p.routed.reset();
  if (q.state != QuestionState::Pending) throw Error("duplicate", "question " + id + " is already decided");

  q.validations.push_back(Validation{s.player_id, label, false, t});
  out.delta = score_validation(false, std::nullopt, opts_.cfg);
  ledger_.append(LedgerEvent{s.player_id, LedgerKind::ValidationReward, out.delta, id, t});
  ++stats_locked(s.player_id).n_validations;

  if (labels_agree(q.validations) || q.validations.size() >= 3) {
    decide_locked(r);
    out.decided = true;
    out.decision = q.decision;
  }
  return out;
}

FeedbackReport GameService::feedback_report(const std::string& token, std::int64_t window_ms) {
  std::lock_guard lock(mu_);
  const Session s = touch_locked(token);
  FeedbackReport rep;
  rep.window_end = now();
  rep.window_start = window_ms > 0 ? rep.window_end - window_ms : rep.window_end - rep.window_end % kDayMs;
  auto in_window = [&](TimestampMs t) { return t >= rep.window_start && t <= rep.window_end; };

  std::size_t authored = 0, beats = 0, decided = 0, kept = 0;
  for (const auto& [id, r] : records_) {
    const Question& q = r.question;
    if (q.author_id != s.player_id || !q.feedback_given || !in_window(q.created_at)) continue;
    ++authored;
    if (!q.author_marked_model_correct) ++beats;
    if (q.decision) {
      ++decided;
      if (q.state == QuestionState::Validated || q.state == QuestionState::Exported) ++kept;
    }
  }
  std::size_t checks = 0, matched = 0;
  for (const auto& [t, ok] : player_locked(s.player_id).expert_results) {
    if (!in_window(t)) continue;
    ++checks;
    if (ok) ++matched;
  }
  auto metric = [](std::size_t num, std::size_t den) {
    MetricBand m;
    m.n = den;
    m.value = den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    m.band = band_for(m.value);
    return m;
  };
  rep.ai_beat_rate = metric(beats, authored);
  rep.pass_verification_rate = metric(kept, decided);
  rep.expert_check_accuracy = metric(matched, checks);
  rep.insufficient_data = authored == 0;
  return rep;
}

std::vector<Notification> GameService::notifications(const std::string& token) {
  std::lock_guard lock(mu_);
  const Session s = touch_locked(token);
  std::vector<Notification> out;
  for (auto& n : notifications_) {
    if (n.player_id != s.player_id) continue;
    out.push_back(n);
    n.delivered = true;
  }
  return out;
}

std::vector<Notification> GameService::all_notifications() const {
  std::lock_guard lock(mu_);
  return notifications_;
}

std::vector<LeaderboardEntry> GameService::leaderboard() const {
  std::vector<LeaderboardEntry> out;
  for (const auto& [player, total] : ledger_.totals()) {
    out.push_back(LeaderboardEntry{player, total, payout_due(total, opts_.cfg)});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LeaderboardEntry& a, const LeaderboardEntry& b) { return a.points > b.points; });
  return out;
}

void GameService::request_retrain() {
  const auto count = scheduler_.snapshot().unvalidated_count;
  enqueue([this, count] { run_retrain(RetrainJob{std::nullopt, count}); });
}

std::vector<RetrainEvent> GameService::retrain_events() const {
  std::lock_guard lock(mu_);
  return retrains_;
}

std::vector<Question> GameService::questions() const {
  std::lock_guard lock(mu_);
  std::vector<Question> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(records_.at(id).question);
  return out;
}

std::vector<DatasetExample> GameService::export_kept() const {
  std::vector<DatasetExample> out;
  for (const auto& q : questions()) {
    if (q.state == QuestionState::Validated && !q.leaked && q.gold()) out.push_back(to_dataset_example(q));
  }
  return out;
}

std::map<PlayerId, AnnotatorStats> GameService::annotator_stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

void GameService::wait_idle() { jobs_.wait_idle(); }

void GameService::enqueue(std::function<void()> job) {
  if (opts_.inline_jobs) {
    job();
  } else {
    jobs_.push(std::move(job));
  }
}

void GameService::run_leak_check(const QuestionId& id, const std::string& text) {
  const FetchResult fetched = opts_.snippets->fetch(text);
  const LeakReport report = check_leak(text, fetched.snippets, opts_.cfg);
  std::lock_guard lock(mu_);
  Record& r = records_.at(id);
  r.leak_checked = true;
  if (!report.leaked) return;
  Question& q = r.question;
  q.leaked = true;
  if (q.state != QuestionState::Pending) return;
  q.state = QuestionState::Discarded;
  q.decided_at = now();
  ++stats_locked(q.author_id).n_questions_discarded;
  const auto e = ledger_.apply_adjustment(q.author_id, q.id, Adjustment::Discarded, opts_.cfg, q.decided_at);
  notify_locked(q, NotificationKind::QuestionDiscarded, e.delta);
}

void GameService::run_retrain(RetrainJob job) {
  std::lock_guard serial(retrain_mu_);
  RetrainEvent ev;
  ev.threshold = job.threshold;
  ev.question_count = job.question_count;
  ev.started_at = now();
  std::vector<SeedExample> data = opts_.seed_examples;
  {
    std::lock_guard lock(mu_);
    for (const auto& id : order_) {
      const Question& q = records_.at(id).question;
      if (q.feedback_given) data.push_back(SeedExample{q.text, q.author_answer, SeedSource::Collected});
    }
  }
  ev.training_examples = data.size();
  const int version = current_answerer()->version() + 1;
  auto model = std::make_shared<AnswerModel>(
      train_answerer(data, opts_.cfg, opts_.cfg.rng_seed + static_cast<std::uint64_t>(version), version));
  {
    std::lock_guard lock(model_mu_);
    answerer_ = model;
  }
  ev.version = version;
  ev.finished_at = now();
  std::lock_guard lock(mu_);
  retrains_.push_back(ev);
}

}  // namespace qforge
