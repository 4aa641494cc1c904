#include "leitnerq/lqn_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "format.hpp"

#include "leitnerq/memory_models.hpp"
#include "leitnerq/planner.hpp"
#include "leitnerq/rng.hpp"

namespace leitnerq {

namespace {

using detail::format_double;

std::string_view action_name(SimAction a) {
  switch (a) {
    case SimAction::kIntroduce:
      return "introduce";
    case SimAction::kReview:
      return "review";
    case SimAction::kIdle:
      break;
  }
  return "idle";
}

struct Card {
  long id;
  double last_review;
};

// Mean-recall arrival rates, solving the flow balance when not given.
std::vector<double> mean_recall_rates(const SimConfig& config, std::span<const double> mu) {
  if (!config.mean_recall_lambda.empty()) return config.mean_recall_lambda;
  const FlowSolution flow = solve_flow_balance(mu, config.lambda_ext, config.theta);
  if (!flow.feasible) {
    throw std::invalid_argument(
        "mean-recall mode: schedule is infeasible (deck " +
        std::to_string(flow.starved_deck.value_or(0)) + " starved)");
  }
  return flow.lambda;
}

}  // namespace

std::vector<double> resolve_review_rates(const SimConfig& config) {
  if (config.rate_rule == RateRule::kExplicit) return config.mu;
  if (config.n_decks < 1) {
    throw std::invalid_argument("budget-tight review rates need a finite deck count");
  }
  return budget_tight_rates(config.n_decks, config.budget, config.lambda_ext,
                            config.rate_exponent);
}

void validate(const SimConfig& config) {
  if (config.n_decks < 0) throw std::invalid_argument("n_decks must be >= 0");
  if (!(config.lambda_ext >= 0.0)) throw std::invalid_argument("lambda_ext must be >= 0");
  if (!(config.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  for (double t : config.item_theta) {
    if (!(t > 0.0)) throw std::invalid_argument("item thetas must be positive");
  }
  if (!(config.budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (config.max_events.has_value() == config.duration.has_value()) {
    throw std::invalid_argument("exactly one of max_reviews and duration must be set");
  }
  if (config.max_events && *config.max_events < 0) {
    throw std::invalid_argument("max_reviews must be >= 0");
  }
  if (config.duration && !(*config.duration >= 0.0)) {
    throw std::invalid_argument("duration must be >= 0");
  }
  if (config.max_unique_items && *config.max_unique_items < 0) {
    throw std::invalid_argument("max_unique_items must be >= 0");
  }
  if (config.n_decks == 0 && config.mastery_deck < 2) {
    throw std::invalid_argument("mastery_deck must be >= 2");
  }
  const auto mu = resolve_review_rates(config);
  if (mu.empty()) throw std::invalid_argument("no review rates");
  if (config.n_decks > 0 && mu.size() != static_cast<std::size_t>(config.n_decks)) {
    throw std::invalid_argument("expected " + std::to_string(config.n_decks) +
                                " review rates, got " + std::to_string(mu.size()));
  }
  for (double m : mu) {
    if (!(m >= 0.0)) throw std::invalid_argument("review rates must be >= 0");
  }
  const double total = config.lambda_ext + std::accumulate(mu.begin(), mu.end(), 0.0);
  if (total > config.budget * (1.0 + 1e-12)) {
    throw std::invalid_argument("budget exceeded: lambda_ext + sum(mu) = " +
                                format_double(total) + " > " + format_double(config.budget));
  }
  if (config.delay_mode == SimDelayMode::kMeanRecall && !config.mean_recall_lambda.empty()) {
    if (config.mean_recall_lambda.size() != mu.size()) {
      throw std::invalid_argument("mean_recall_lambda needs one rate per deck");
    }
    for (std::size_t k = 0; k < mu.size(); ++k) {
      if (!(mu[k] > config.mean_recall_lambda[k])) {
        throw std::invalid_argument("mean-recall mode needs mu_k > lambda_k (deck " +
                                    std::to_string(k + 1) + ")");
      }
    }
  }
}

SimResult simulate(const SimConfig& config) { return simulate(config, config.seed); }

SimResult simulate(const SimConfig& config, std::uint64_t seed) {
  validate(config);
  const std::vector<double> mu = resolve_review_rates(config);
  std::vector<double> mean_lambda;
  if (config.delay_mode == SimDelayMode::kMeanRecall) mean_lambda = mean_recall_rates(config, mu);

  const bool unbounded = config.n_decks == 0;
  const std::size_t scheduled = mu.size();
  const double slack = std::max(
      0.0, config.budget - config.lambda_ext - std::accumulate(mu.begin(), mu.end(), 0.0));

  Rng rng(seed);
  std::vector<std::deque<Card>> decks(unbounded ? scheduled + 1 : scheduled);
  SimResult result;
  result.deck_reviews.assign(scheduled, 0);
  result.deck_recalls.assign(scheduled, 0);

  auto intro_available = [&] {
    return !config.max_unique_items || result.introduced < *config.max_unique_items;
  };
  auto theta_of = [&](long id) {
    return static_cast<std::size_t>(id) < config.item_theta.size() ? config.item_theta[id]
                                                                     : config.theta;
  };

  // Action index: -1 idle, 0 introduce, k >= 1 review deck k.
  auto draw_action = [&]() -> int {
    if (!config.resample_on_empty) {
      double u = rng.uniform() * config.budget;
      if (u < config.lambda_ext) return intro_available() ? 0 : -1;
      u -= config.lambda_ext;
      for (std::size_t k = 0; k < scheduled; ++k) {
        if (u < mu[k]) return decks[k].empty() ? -1 : static_cast<int>(k + 1);
        u -= mu[k];
      }
      return -1;
    }
    double total = slack;
    if (intro_available()) total += config.lambda_ext;
    for (std::size_t k = 0; k < scheduled; ++k) {
      if (!decks[k].empty()) total += mu[k];
    }
    if (!(total > 0.0)) return -1;
    double u = rng.uniform() * total;
    if (intro_available()) {
      if (u < config.lambda_ext) return 0;
      u -= config.lambda_ext;
    }
    for (std::size_t k = 0; k < scheduled; ++k) {
      if (decks[k].empty()) continue;
      if (u < mu[k]) return static_cast<int>(k + 1);
      u -= mu[k];
    }
    return -1;
  };

  double now = 0.0;
  const int top = static_cast<int>(scheduled);
  while (true) {
    if (config.max_events && result.events >= *config.max_events) break;
    const double next = now + rng.exponential(config.budget);
    if (config.duration && next > *config.duration) break;
    now = next;
    ++result.events;

    TraceEvent ev;
    ev.time = now;
    const int action = draw_action();
    if (action == 0) {
      const long id = result.introduced++;
      decks[0].push_back({id, now});
      ev.action = SimAction::kIntroduce;
      ev.item_id = id;
      ev.q_after = 1;
    } else if (action > 0) {
      const int k = action;
      auto& deck = decks[k - 1];
      const Card card = deck.front();
      deck.pop_front();
      const double delay = config.delay_mode == SimDelayMode::kClocked
                               ? now - card.last_review
                               : rng.exponential(mu[k - 1] - mean_lambda[k - 1]);
      const double p = std::exp(-theta_of(card.id) * delay / k);
      const bool recalled = rng.bernoulli(p);
      ++result.deck_reviews[k - 1];
      if (recalled) ++result.deck_recalls[k - 1];
      int dest = recalled ? k + 1 : std::max(k - 1, 1);
      if (dest > top && !unbounded) {
        ++result.mastered;
      } else {
        if (static_cast<std::size_t>(dest) > decks.size()) decks.resize(dest);
        decks[dest - 1].push_back({card.id, now});
      }
      ev.action = SimAction::kReview;
      ev.item_id = card.id;
      ev.deck = k;
      ev.outcome = recalled;
      ev.q_before = k;
      ev.q_after = dest;
    }
    if (config.record_trace) result.trace.push_back(ev);
  }

  result.elapsed = config.duration ? *config.duration : now;
  if (unbounded) {
    const auto keep = static_cast<std::size_t>(config.mastery_deck - 1);
    result.occupancy.assign(keep, 0);
    for (std::size_t k = 0; k < decks.size(); ++k) {
      const auto size = static_cast<long>(decks[k].size());
      if (k < keep) {
        result.occupancy[k] = size;
      } else {
        result.mastered += size;
      }
    }
  } else {
    for (const auto& d : decks) result.occupancy.push_back(static_cast<long>(d.size()));
  }
  result.lambda_out =
      result.elapsed > 0.0 ? static_cast<double>(result.mastered) / result.elapsed : 0.0;
  return result;
}

std::string trace_csv(std::span<const TraceEvent> trace) {
  std::ostringstream os;
  os << "time,action,item_id,deck,outcome,q_after\n";
  for (const auto& ev : trace) {
    os << format_double(ev.time) << ',' << action_name(ev.action) << ',';
    if (ev.item_id >= 0) os << ev.item_id;
    os << ',';
    if (ev.deck > 0) os << ev.deck;
    os << ',';
    if (ev.outcome) os << (*ev.outcome ? 1 : 0);
    os << ',';
    if (ev.action != SimAction::kIdle) os << ev.q_after;
    os << '\n';
  }
  return os.str();
}

SweepResult sweep_arrival_rates(const SimConfig& base, std::span<const double> rates,
                                int trials, std::uint64_t seed, unsigned threads) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  SweepResult sweep;

  struct Job {
    SimConfig config;
    std::vector<SimResult> results;
  };
  std::vector<Job> jobs;
  for (double rate : rates) {
    SimConfig config = base;
    config.lambda_ext = rate;
    config.record_trace = false;
    config.mean_recall_lambda.clear();
    try {
      validate(config);
      if (config.delay_mode == SimDelayMode::kMeanRecall) {
        config.mean_recall_lambda = mean_recall_rates(config, resolve_review_rates(config));
      }
    } catch (const std::invalid_argument& e) {
      sweep.skipped.push_back({rate, e.what()});
      continue;
    }
    jobs.push_back({std::move(config), std::vector<SimResult>(trials)});
  }

  const std::size_t total = jobs.size() * static_cast<std::size_t>(trials);
  auto run = [&](std::size_t task) {
    Job& job = jobs[task / trials];
    const std::size_t trial = task % trials;
    const auto rate_bits = std::bit_cast<std::uint64_t>(job.config.lambda_ext);
    job.results[trial] = simulate(job.config, derive_seed(seed, rate_bits, trial));
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(total, 1)));
  if (threads <= 1) {
    for (std::size_t t = 0; t < total; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < total; t += threads) run(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (const auto& job : jobs) {
    SweepPoint pt;
    pt.lambda_ext = job.config.lambda_ext;
    pt.trials = trials;
    const std::size_t decks = job.results.front().occupancy.size();
    pt.mean_occupancy.assign(decks, 0.0);
    double sum = 0.0;
    for (const auto& r : job.results) {
      sum += r.lambda_out;
      pt.mean_mastered += static_cast<double>(r.mastered);
      pt.mean_introduced += static_cast<double>(r.introduced);
      for (std::size_t k = 0; k < decks; ++k) {
        pt.mean_occupancy[k] += static_cast<double>(r.occupancy[k]);
      }
    }
    const double count = static_cast<double>(trials);
    pt.mean_lambda_out = sum / count;
    pt.mean_mastered /= count;
    pt.mean_introduced /= count;
    for (double& o : pt.mean_occupancy) o /= count;
    if (trials > 1) {
      double ss = 0.0;
      for (const auto& r : job.results) {
        ss += (r.lambda_out - pt.mean_lambda_out) * (r.lambda_out - pt.mean_lambda_out);
      }
      pt.stderr_ = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    }
    sweep.points.push_back(std::move(pt));
  }
  return sweep;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream os;
  const std::size_t decks = sweep.points.empty() ? 0 : sweep.points.front().mean_occupancy.size();
  os << "lambda_ext,mean_lambda_out,stderr";
  for (std::size_t k = 0; k < decks; ++k) os << ",occ_" << k + 1;
  os << ",mastered\n";
  for (const auto& p : sweep.points) {
    os << format_double(p.lambda_ext) << ',' << format_double(p.mean_lambda_out) << ','
       << format_double(p.stderr_);
    for (double o : p.mean_occupancy) os << ',' << format_double(o);
    os << ',' << format_double(p.mean_mastered) << '\n';
  }
  return os.str();
}

std::string occupancy_csv(const SweepResult& sweep) {
  std::ostringstream os;
  const std::size_t decks = sweep.points.empty() ? 0 : sweep.points.front().mean_occupancy.size();
  os << "lambda_ext";
  for (std::size_t k = 0; k < decks; ++k) os << ",deck_" << k + 1;
  os << ",mastered\n";
  for (const auto& p : sweep.points) {
    const double introduced = p.mean_introduced;
    auto share = [&](double v) { return introduced > 0.0 ? v / introduced : 0.0; };
    os << format_double(p.lambda_ext);
    for (double o : p.mean_occupancy) os << ',' << format_double(share(o));
    os << ',' << format_double(share(p.mean_mastered)) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const SweepResult& sweep) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : sweep.points) {
    points.push_back({{"lambda_ext", p.lambda_ext},
                      {"mean_lambda_out", p.mean_lambda_out},
                      {"stderr", p.stderr_},
                      {"mean_occupancy", p.mean_occupancy},
                      {"mean_mastered", p.mean_mastered},
                      {"mean_introduced", p.mean_introduced},
                      {"trials", p.trials}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : sweep.skipped) {
    skipped.push_back({{"lambda_ext", s.lambda_ext}, {"reason", s.reason}});
  }
  return {{"points", points}, {"skipped", skipped}};
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  if (j.contains("n_decks")) {
    const auto& n = j.at("n_decks");
    if (n.is_string()) {
      if (n.get<std::string>() != "unbounded") {
        throw std::invalid_argument("n_decks must be an integer or \"unbounded\"");
      }
      c.n_decks = 0;
    } else {
      c.n_decks = n.get<int>();
    }
  }
  c.lambda_ext = j.value("lambda_ext", 0.0);
  if (j.contains("mu_rule")) {
    const auto rule = j.at("mu_rule").get<std::string>();
    if (rule != "inv_sqrt" && rule != "power") {
      throw std::invalid_argument("unknown mu_rule '" + rule + "' (inv_sqrt, power)");
    }
    c.rate_rule = RateRule::kBudgetTight;
    c.rate_exponent = j.value("mu_exponent", 0.5);
  } else if (j.contains("mu")) {
    c.mu = j.at("mu").get<std::vector<double>>();
  }
  c.theta = j.value("theta", c.theta);
  if (j.contains("item_theta")) c.item_theta = j.at("item_theta").get<std::vector<double>>();
  c.budget = j.value("budget", c.budget);
  if (j.contains("horizon")) {
    const auto& h = j.at("horizon");
    if (h.contains("max_reviews")) c.max_events = h.at("max_reviews").get<long>();
    if (h.contains("duration")) c.duration = h.at("duration").get<double>();
  }
  if (j.contains("max_unique_items") && !j.at("max_unique_items").is_null()) {
    c.max_unique_items = j.at("max_unique_items").get<long>();
  }
  const auto mode = j.value("delay_mode", std::string("clocked"));
  if (mode == "clocked") {
    c.delay_mode = SimDelayMode::kClocked;
  } else if (mode == "mean_recall") {
    c.delay_mode = SimDelayMode::kMeanRecall;
  } else {
    throw std::invalid_argument("unknown delay_mode '" + mode + "' (clocked, mean_recall)");
  }
  if (j.contains("mean_recall_lambda")) {
    c.mean_recall_lambda = j.at("mean_recall_lambda").get<std::vector<double>>();
  }
  c.mastery_deck = j.value("mastery_deck", c.mastery_deck);
  c.resample_on_empty = j.value("resample_on_empty", false);
  c.seed = j.value("seed", std::uint64_t{0});
  c.record_trace = j.value("record_trace", false);
  return c;
}

nlohmann::json to_json(const SimConfig& c) {
  nlohmann::json j;
  j["n_decks"] = c.n_decks == 0 ? nlohmann::json("unbounded") : nlohmann::json(c.n_decks);
  j["lambda_ext"] = c.lambda_ext;
  if (c.rate_rule == RateRule::kBudgetTight) {
    j["mu_rule"] = "power";
    j["mu_exponent"] = c.rate_exponent;
  } else {
    j["mu"] = c.mu;
  }
  j["theta"] = c.theta;
  if (!c.item_theta.empty()) j["item_theta"] = c.item_theta;
  j["budget"] = c.budget;
  nlohmann::json horizon = nlohmann::json::object();
  if (c.max_events) horizon["max_reviews"] = *c.max_events;
  if (c.duration) horizon["duration"] = *c.duration;
  j["horizon"] = horizon;
  j["max_unique_items"] =
      c.max_unique_items ? nlohmann::json(*c.max_unique_items) : nlohmann::json(nullptr);
  j["delay_mode"] = c.delay_mode == SimDelayMode::kClocked ? "clocked" : "mean_recall";
  if (!c.mean_recall_lambda.empty()) j["mean_recall_lambda"] = c.mean_recall_lambda;
  j["mastery_deck"] = c.mastery_deck;
  j["resample_on_empty"] = c.resample_on_empty;
  j["seed"] = c.seed;
  j["record_trace"] = c.record_trace;
  return j;
}

EmpiricalParams estimate_empirical_params(std::span<const Session> sessions) {
  if (sessions.empty()) throw std::invalid_argument("no sessions");
  EmpiricalParams out;
  double duration = 0.0;
  std::vector<Sample> samples;
  for (const auto& s : sessions) {
    if (!(s.duration > 0.0)) throw std::invalid_argument("session duration must be positive");
    duration += s.duration;
    out.logs += s.logs.size();
    LogSet set{s.logs, Dialect::kSelfAssessment, TimeUnit::kSeconds};
    for (const auto& h : build_histories(set)) {
      if (h.interactions.size() < 2) continue;
      auto part = samples_of(h, 1, h.interactions.size());
      samples.insert(samples.end(), part.begin(), part.end());
    }
  }
  out.sessions = sessions.size();
  out.budget = static_cast<double>(out.logs) / duration;
  if (!samples.empty()) {
    out.theta = fit_efc_global(samples, StrengthMode::kLeitner, DelayMode::kWithDelay).theta;
  }
  return out;
}

Session session_from_trace(const SimResult& result, const std::string& user_id) {
  Session s;
  s.duration = result.elapsed;
  for (const auto& ev : result.trace) {
    if (ev.action == SimAction::kIdle) continue;
    ReviewLog log;
    log.user_id = user_id;
    log.item_id = std::to_string(ev.item_id);
    log.timestamp = ev.time;
    log.outcome = ev.action == SimAction::kReview && *ev.outcome;
    log.grade = log.outcome ? 3 : 1;
    s.logs.push_back(std::move(log));
  }
  return s;
}

}  // namespace leitnerq
