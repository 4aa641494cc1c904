#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "leitnerq/log_store.hpp"

namespace leitnerq {

enum class SimDelayMode { kClocked, kMeanRecall };

/// How per-deck review rates are given.
enum class RateRule {
  kExplicit,     // `mu` as listed
  kBudgetTight,  // mu_k proportional to k^-exponent, summing to budget - lambda_ext
};

struct SimConfig {
  int n_decks = 5;  // 0 means unbounded
  double lambda_ext = 0.0;
  RateRule rate_rule = RateRule::kExplicit;
  std::vector<double> mu;
  double rate_exponent = 0.5;
  double theta = 0.01;
  std::vector<double> item_theta;  // by item id; ids past the end use theta
  double budget = 1.0;
  std::optional<long> max_events;  // event slots, including intros and idles
  std::optional<double> duration;
  std::optional<long> max_unique_items;
  SimDelayMode delay_mode = SimDelayMode::kClocked;
  std::vector<double> mean_recall_lambda;  // per-deck arrival rates
  int mastery_deck = 6;  // unbounded decks only
  bool resample_on_empty = false;
  std::uint64_t seed = 0;
  bool record_trace = false;
};

SimConfig sim_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimConfig& config);

/// Per-deck review rates of `config` at its arrival rate.
std::vector<double> resolve_review_rates(const SimConfig& config);

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const SimConfig& config);

enum class SimAction { kIntroduce, kReview, kIdle };

struct TraceEvent {
  double time = 0.0;
  SimAction action = SimAction::kIdle;
  long item_id = -1;
  int deck = 0;  // reviewed deck, 0 otherwise
  std::optional<bool> outcome;
  int q_before = 0;
  int q_after = 0;
};

struct SimResult {
  long introduced = 0;
  long mastered = 0;
  std::vector<long> occupancy;  // final items per deck
  double elapsed = 0.0;
  long events = 0;
  double lambda_out = 0.0;
  std::vector<long> deck_reviews;
  std::vector<long> deck_recalls;
  std::vector<TraceEvent> trace;
};

/// Runs one session. Events arrive at Poisson rate `budget`; each is an
/// introduction, a review of one deck's oldest item, or idle. With finite
/// decks an item recalled at deck n is mastered and leaves; with unbounded
/// decks items ending at mastery_deck or above count as mastered, and
/// `occupancy` covers decks 1..mastery_deck-1.
SimResult simulate(const SimConfig& config, std::uint64_t seed);
SimResult simulate(const SimConfig& config);

/// `time,action,item_id,deck,outcome,q_after`
std::string trace_csv(std::span<const TraceEvent> trace);

struct SweepPoint {
  double lambda_ext = 0.0;
  double mean_lambda_out = 0.0;
  double stderr_ = 0.0;
  std::vector<double> mean_occupancy;
  double mean_mastered = 0.0;
  double mean_introduced = 0.0;
  int trials = 0;
};

struct SkippedRate {
  double lambda_ext = 0.0;
  std::string reason;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<SkippedRate> skipped;
};

/// Independent trials per rate. Trial seeds depend on the root seed, the
/// rate value and the trial index only. In mean-recall mode the per-deck
/// arrival rates come from the flow-balance solution; rates that break the
/// budget or are infeasible are skipped and recorded.
SweepResult sweep_arrival_rates(const SimConfig& base, std::span<const double> rates,
                                int trials, std::uint64_t seed, unsigned threads = 0);

/// `lambda_ext,mean_lambda_out,stderr,occ_1..occ_n,mastered`
std::string sweep_csv(const SweepResult& sweep);

/// Per-rate table of the share of introduced items finishing in each deck.
std::string occupancy_csv(const SweepResult& sweep);

nlohmann::json to_json(const SweepResult& sweep);

struct Session {
  double duration = 0.0;  // seconds
  std::vector<ReviewLog> logs;
};

struct EmpiricalParams {
  double budget = 0.0;  // logs per second
  double theta = 0.0;   // per second, forgetting curve with deck strength
  std::size_t sessions = 0;
  std::size_t logs = 0;
};

/// Review budget from log counts and durations, and the global difficulty
/// of the deck-strength forgetting curve fitted to the sessions' reviews.
EmpiricalParams estimate_empirical_params(std::span<const Session> sessions);

/// Turns a recorded trace into review logs (self-assessment grades, times
/// in seconds). Introductions are logged as failed first exposures.
Session session_from_trace(const SimResult& result, const std::string& user_id);

}  // namespace leitnerq
