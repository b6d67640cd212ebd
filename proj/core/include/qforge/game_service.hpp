#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qforge/answer_loop.hpp"
#include "qforge/config.hpp"
#include "qforge/leakage.hpp"
#include "qforge/prompts.hpp"
#include "qforge/rng.hpp"
#include "qforge/scoring.hpp"
#include "qforge/types.hpp"
#include "qforge/verifier.hpp"

namespace qforge {

using Clock = std::function<TimestampMs()>;
TimestampMs system_now_ms();

enum class Band { Red, Yellow, Green };
std::string_view to_string(Band b);
// red < 0.15 <= yellow < 0.30 <= green
Band band_for(double value);

struct Session {
  std::string session_id;  // doubles as the bearer token
  PlayerId player_id;
  TimestampMs started_at = 0;
  TimestampMs last_seen = 0;
  std::int64_t idle_timeout_ms = 0;
};

struct ExpertItem {
  QuestionId id;
  std::string text;
  GoldLabel gold = GoldLabel::True;
};

enum class NotificationKind { AnswerFlipped, QuestionDiscarded };
std::string_view to_string(NotificationKind k);

struct Notification {
  PlayerId player_id;
  NotificationKind kind = NotificationKind::QuestionDiscarded;
  QuestionId question_id;
  std::string message;
  int delta = 0;
  bool delivered = false;
};

struct ComposeTask {
  PromptPair prompt_pair;
};

struct ValidateTask {
  QuestionId question_id;
  std::string text;
  bool is_expert_check = false;
};

struct Task {
  std::optional<ComposeTask> compose;
  std::optional<ValidateTask> validate;
};

struct SubmitResult {
  QuestionId question_id;
  Answer model_answer = Answer::Yes;
  double confidence = 0.5;
  int model_version = 0;
  int points_preview = 0;
  UsageFlags usage;
};

struct ValidationResult {
  int delta = 0;
  bool decided = false;
  std::optional<GoldDecision> decision;
};

struct MetricBand {
  double value = 0.0;
  Band band = Band::Red;
  std::size_t n = 0;
};

struct FeedbackReport {
  MetricBand ai_beat_rate;
  MetricBand pass_verification_rate;
  MetricBand expert_check_accuracy;
  bool insufficient_data = false;
  TimestampMs window_start = 0;
  TimestampMs window_end = 0;
};

struct LeaderboardEntry {
  PlayerId player_id;
  long long points = 0;
  Payout payout;
};

struct RetrainEvent {
  std::optional<std::int64_t> threshold;
  std::int64_t question_count = 0;
  int version = 0;
  std::size_t training_examples = 0;
  TimestampMs started_at = 0;
  TimestampMs finished_at = 0;
};

struct ServiceOptions {
  PlatformConfig cfg;
  ConceptBank bank;
  std::shared_ptr<const Answerer> answerer;
  VerifierModel verifier = VerifierModel::vote_prior();
  std::vector<SeedExample> seed_examples;  // retraining base set
  std::vector<ExpertItem> expert_pool;
  std::shared_ptr<SnippetFetcher> snippets;  // null disables leak checks
  Clock clock;
  // Run retrain and leak-check jobs on the submitting thread.
  bool inline_jobs = false;
};

// Single-worker background queue.
class JobQueue {
 public:
  JobQueue();
  ~JobQueue();
  JobQueue(const JobQueue&) = delete;
  JobQueue& operator=(const JobQueue&) = delete;

  void push(std::function<void()> job);
  void wait_idle();

 private:
  void run();

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> jobs_;
  bool busy_ = false;
  bool stop_ = false;
  std::thread worker_;
};

// Live game state. All public methods are thread-safe. Failures throw
// Error with codes: unauthorized, session_expired (401), ineligible (403),
// not_found (404), duplicate, already_validated (409), bad_request,
// not_routed, inconsistent_feedback (400).
class GameService {
 public:
  explicit GameService(ServiceOptions opts);
  ~GameService();

  Session open_session(const PlayerId& player_id);
  // Resolves a bearer token, refreshing its idle timer.
  Session authenticate(const std::string& token);

  Task next_task(const std::string& token);
  SubmitResult submit_question(const std::string& token, const std::string& text,
                               const std::optional<PromptPair>& pair, Answer author_answer);
  // `model_correct` is the author's mark on the model's answer; it must agree
  // with the author's stated answer. Returns the compose points written.
  int submit_feedback(const std::string& token, const QuestionId& id, bool model_correct);
  ValidationResult submit_validation(const std::string& token, const QuestionId& id,
                                     ValidationLabel label);

  // window_ms <= 0 means the current UTC day.
  FeedbackReport feedback_report(const std::string& token, std::int64_t window_ms = 0);
  std::vector<Notification> notifications(const std::string& token);
  std::vector<LeaderboardEntry> leaderboard() const;

  void request_retrain();
  std::vector<RetrainEvent> retrain_events() const;
  std::vector<Question> questions() const;
  std::vector<DatasetExample> export_kept() const;
  std::vector<LedgerEvent> ledger_events() const { return ledger_.events(); }
  std::vector<Notification> all_notifications() const;
  std::map<PlayerId, AnnotatorStats> annotator_stats() const;
  AnswerResult answer(const std::string& text) const;
  int model_version() const;

  // Blocks until queued retrain and leak-check jobs have drained.
  void wait_idle();

  const PlatformConfig& config() const { return opts_.cfg; }

 private:
  struct Record {
    Question question;
    bool leak_checked = false;
    std::set<PlayerId> inflight;  // validators currently routed here
  };
  struct PlayerState {
    std::optional<PromptPair> issued_pair;
    std::optional<QuestionId> routed;
    bool routed_expert = false;
    std::vector<std::pair<TimestampMs, bool>> expert_results;
  };

  TimestampMs now() const;
  Session touch_locked(const std::string& token);
  PlayerState& player_locked(const PlayerId& id);
  AnnotatorStats& stats_locked(const PlayerId& id);
  void clear_route_locked(const PlayerId& id);
  bool routable_locked(const Record& r, const PlayerId& player) const;
  void decide_locked(Record& r);
  void notify_locked(const Question& q, NotificationKind kind, int delta);
  void run_leak_check(const QuestionId& id, const std::string& text);
  void run_retrain(RetrainJob job);
  std::shared_ptr<const Answerer> current_answerer() const;
  void enqueue(std::function<void()> job);

  ServiceOptions opts_;
  mutable std::mutex mu_;
  Rng rng_;
  std::map<std::string, Session> sessions_;
  std::map<PlayerId, std::string> active_token_;
  std::map<PlayerId, PlayerState> players_;
  std::map<PlayerId, AnnotatorStats> stats_;
  std::map<QuestionId, Record> records_;
  std::vector<QuestionId> order_;
  std::map<std::pair<PlayerId, std::string>, QuestionId> authored_text_;
  std::map<QuestionId, ExpertItem> experts_;
  std::vector<Notification> notifications_;
  std::set<std::pair<QuestionId, NotificationKind>> notified_;
  std::vector<RetrainEvent> retrains_;
  std::uint64_t next_id_ = 1;

  mutable std::mutex model_mu_;
  std::mutex retrain_mu_;
  std::shared_ptr<const Answerer> answerer_;

  Ledger ledger_;
  RetrainScheduler scheduler_;
  JobQueue jobs_;
};

}  // namespace qforge
