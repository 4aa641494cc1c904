// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "leitnerq/log_store.hpp"
#include "leitnerq/lqn_sim.hpp"
#include "leitnerq/memory_models.hpp"
#include "leitnerq/model_eval.hpp"
#include "leitnerq/planner.hpp"
#include "leitnerq/rng.hpp"
#include "leitnerq/synthetic.hpp"
#include "oracles.hpp"

using namespace leitnerq;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

nlohmann::json load_config(const std::string& name) {
  std::ifstream in(std::string(LEITNERQ_CONFIGS) + "/" + name);
  if (!in) throw std::runtime_error("missing config " + name);
  return nlohmann::json::parse(in);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double coefficient_of_variation(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (v.size() - 1)) / mean;
}

// Shared between criteria 1-3 and 5.
struct PhaseSweep {
  SimConfig base;
  std::vector<double> rates;
  int trials = 0;
  std::uint64_t seed = 0;
  SweepResult sweep;
  double seconds = 0.0;
  double threshold = 0.0;
};

PhaseSweep& phase_sweep() {
  static PhaseSweep f = [] {
    PhaseSweep out;
    const auto j = load_config("phase_transition.json");
    out.base = sim_config_from_json(j);
    out.rates = j.at("rates").get<std::vector<double>>();
    out.trials = j.at("trials").get<int>();
    out.seed = j.at("seed").get<std::uint64_t>();
    const auto t0 = std::chrono::steady_clock::now();
    out.sweep = sweep_arrival_rates(out.base, out.rates, out.trials, out.seed);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.threshold =
        max_feasible_arrival_budget_tight(out.base.n_decks, out.base.budget, out.base.theta,
                                          out.base.rate_exponent);
    return out;
  }();
  return f;
}

Outcome phase_transition() {
  const auto& f = phase_sweep();
  const auto& pts = f.sweep.points;
  if (pts.size() != f.rates.size()) return {false, "some rates were skipped"};
  std::vector<double> mean;
  for (const auto& p : pts) mean.push_back(p.mean_lambda_out);
  const auto peak = static_cast<std::size_t>(
      std::max_element(mean.begin(), mean.end()) - mean.begin());
  bool ok = f.trials >= 200 && peak > 0 && peak + 1 < mean.size();
  for (std::size_t i = 1; i <= peak; ++i) ok = ok && mean[i] >= mean[i - 1];
  for (std::size_t i = peak + 1; i < mean.size(); ++i) ok = ok && mean[i] <= mean[i - 1];
  const bool falls = mean.back() <= 0.5 * mean[peak];
  double worst = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (f.rates[i] <= 0.5 * f.threshold) {
      worst = std::max(worst, std::abs(mean[i] - f.rates[i]) / f.rates[i]);
    }
  }
  const bool fast = f.seconds < 120.0;
  return {ok && falls && worst <= 0.25 && fast,
          fmt("peak %.4g at rate %.4g, last %.4g, rising-limb error %.1f%%, %.1fs",
              mean[peak], f.rates[peak], mean.back(), 100 * worst, f.seconds)};
}

Outcome threshold_conservative() {
  const auto& f = phase_sweep();
  std::size_t peak = 0;
  for (std::size_t i = 1; i < f.sweep.points.size(); ++i) {
    if (f.sweep.points[i].mean_lambda_out > f.sweep.points[peak].mean_lambda_out) peak = i;
  }
  const double argmax = f.sweep.points[peak].lambda_ext;
  return {f.threshold <= argmax, fmt("lambda_t %.6f <= argmax %.4g", f.threshold, argmax)};
}

Outcome mean_recall_agreement() {
  const auto& f = phase_sweep();
  const auto j = load_config("mean_recall.json");
  const SimConfig mean_recall = sim_config_from_json(j);
  SimConfig clocked = mean_recall;
  clocked.delay_mode = SimDelayMode::kClocked;
  std::vector<double> rates;
  for (double r : j.at("rates").get<std::vector<double>>()) {
    if (r <= 0.5 * f.threshold) rates.push_back(r);
  }
  const int trials = j.at("trials").get<int>();
  const auto seed = j.at("seed").get<std::uint64_t>();
  const auto a = sweep_arrival_rates(mean_recall, rates, trials, seed);
  const auto b = sweep_arrival_rates(clocked, rates, trials, seed);
  if (a.points.size() != rates.size() || b.points.size() != rates.size() || rates.empty()) {
    return {false, "rates skipped"};
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double se = std::hypot(a.points[i].stderr_, b.points[i].stderr_);
    const double diff = std::abs(a.points[i].mean_lambda_out - b.points[i].mean_lambda_out);
    worst = std::max(worst, se > 0.0 ? diff / se : (diff > 0.0 ? INFINITY : 0.0));
  }
  return {worst <= 2.0, fmt("%zu rates, largest gap %.2f pooled std-errs", rates.size(), worst)};
}

Outcome flow_balance() {
  Rng rng(404);
  double worst = 0.0, worst_cut = 0.0;
  int solved = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 3;
    std::vector<double> mu;
    for (int k = 0; k < n; ++k) mu.push_back(0.05 + 0.45 * rng.uniform());
    const double theta = std::exp(std::log(1e-3) + std::log(100.0) * rng.uniform());
    const double lambda_ext = (0.05 + 0.9 * rng.uniform()) * max_feasible_arrival(mu, theta);
    const auto sol = solve_flow_balance(mu, lambda_ext, theta);
    const auto ref = oracle::newton_flow(mu, lambda_ext, theta);
    if (!sol.feasible || !ref) continue;
    ++solved;
    for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(sol.lambda[k] - (*ref)[k]));
    worst_cut = std::max(worst_cut, std::abs(sol.recall[n - 1] * sol.lambda[n - 1] - lambda_ext));
  }
  return {solved == 100 && worst <= 1e-6 && worst_cut <= 1e-9,
          fmt("%d/100 instances, max |diff| %.2e, max cut error %.2e", solved, worst, worst_cut)};
}

Outcome ergodicity() {
  const auto& f = phase_sweep();
  SimConfig c = f.base;
  c.delay_mode = SimDelayMode::kMeanRecall;
  c.max_unique_items.reset();
  c.max_events = 100000;
  c.lambda_ext = 0.5 * f.threshold;
  const double rates[] = {c.lambda_ext};
  const auto s = sweep_arrival_rates(c, rates, 10, 5);
  if (s.points.empty()) return {false, "rate skipped"};
  const double out = s.points[0].mean_lambda_out;
  const double rel = std::abs(out - c.lambda_ext) / c.lambda_ext;
  return {rel <= 0.05, fmt("lambda_out %.6f vs lambda_ext %.6f (%.2f%%, 10 runs of 1e5 events)",
                           out, c.lambda_ext, 100 * rel)};
}

Outcome schedule_structure() {
  const auto j = load_config("optimal_schedule.json");
  const int n = j.at("decks");
  const double budget = j.at("budget"), theta = j.at("theta");
  const auto plan = optimize_schedule(n, budget, theta);
  bool ok = plan.flow.feasible && plan.converged;
  for (int k = 2; k < n - 1; ++k) {
    ok = ok && plan.flow.expected_delay[k - 1] <= plan.flow.expected_delay[k] * (1 + 1e-9);
  }
  for (double q : plan.flow.expected_queue) ok = ok && std::isfinite(q);

  const double best = plan.schedule.lambda_ext;
  Rng rng(606);
  int feasible = 0, attempts = 0, beaten = 0;
  while (feasible < 1000 && attempts < 200000) {
    ++attempts;
    std::vector<double> w(n);
    double sum = 0.0;
    for (auto& v : w) sum += (v = rng.exponential(1.0));
    const double lambda_ext = 1.2 * best * rng.uniform();
    std::vector<double> mu(n);
    for (int k = 0; k < n; ++k) mu[k] = (budget - lambda_ext) * w[k] / sum;
    if (!solve_flow_balance(mu, lambda_ext, theta).feasible) continue;
    ++feasible;
    if (lambda_ext > best) ++beaten;
  }
  return {ok && feasible == 1000 && beaten == 0,
          fmt("lambda* %.6f, interior delays non-decreasing: %s, %d random feasible schedules, "
              "%d beat the optimum",
              best, ok ? "yes" : "no", feasible, beaten)};
}

Outcome sensitivity() {
  const auto j8 = load_config("sensitivity_theta.json");
  const auto j9 = load_config("sensitivity_budget.json");
  const auto by_theta = sensitivity_theta(j8.at("decks"), j8.at("budget"),
                                          j8.at("sweep_theta").get<std::vector<double>>());
  const auto by_budget = sensitivity_budget(j9.at("decks"), j9.at("theta"),
                                            j9.at("sweep_budget").get<std::vector<double>>());
  bool ok = by_theta.size() == 5 && by_budget.size() == 5;
  for (std::size_t i = 1; i < by_theta.size(); ++i) {
    ok = ok && by_theta[i].lambda_star <= by_theta[i - 1].lambda_star;
  }
  for (std::size_t i = 1; i < by_budget.size(); ++i) {
    ok = ok && by_budget[i].lambda_star >= by_budget[i - 1].lambda_star;
  }
  // Divided second difference at the lowest interior grid point.
  const auto slope = [&](std::size_t i) {
    return (by_budget[i + 1].lambda_star - by_budget[i].lambda_star) /
           (by_budget[i + 1].param - by_budget[i].param);
  };
  const double second = (slope(1) - slope(0)) / (by_budget[2].param - by_budget[0].param);
  return {ok && second > 0.0,
          fmt("lambda*(theta) %.5f..%.5f, lambda*(U) %.5f..%.5f, second difference %.4g",
              by_theta.front().lambda_star, by_theta.back().lambda_star,
              by_budget.front().lambda_star, by_budget.back().lambda_star, second)};
}

Outcome multi_difficulty() {
  const auto j = load_config("multi_difficulty.json");
  const auto thetas = j.at("thetas").get<std::vector<double>>();
  const auto plan = optimize_multi_difficulty(j.at("decks"), j.at("budget"), thetas);
  const std::size_t easy = std::min_element(thetas.begin(), thetas.end()) - thetas.begin();
  const std::size_t hard = std::max_element(thetas.begin(), thetas.end()) - thetas.begin();
  const double cv_easy = coefficient_of_variation(plan.bins[easy].schedule.mu);
  const double cv_hard = coefficient_of_variation(plan.bins[hard].schedule.mu);
  return {cv_easy < cv_hard, fmt("CV easy %.3f < hard %.3f", cv_easy, cv_hard)};
}

Outcome blow_up() {
  const auto& f = phase_sweep();
  SimConfig c = f.base;
  c.max_unique_items.reset();
  c.max_events = 5000;
  const double rates[] = {2.0 * f.threshold};
  const auto s = sweep_arrival_rates(c, rates, 200, 9);
  if (s.points.empty()) return {false, "rate skipped"};
  const auto& p = s.points[0];
  const double intro = p.mean_introduced;
  const double deck1 = p.mean_occupancy[0] / intro;
  const double mastered = p.mean_mastered / intro;
  double others = 0.0;
  for (std::size_t k = 1; k < p.mean_occupancy.size(); ++k) {
    others = std::max(others, p.mean_occupancy[k] / intro);
  }
  return {deck1 >= 0.5 && mastered < 0.1 && others < 0.15,
          fmt("deck 1 %.1f%%, mastered %.1f%%, largest of decks 2-5 %.1f%%", 100 * deck1,
              100 * mastered, 100 * others)};
}

bool gradient_checks() {
  Rng rng(1010);
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-5 * std::max(1.0, std::abs(b));
  };
  auto check = [&](std::size_t dim, const std::function<double(std::span<const double>,
                                                               std::span<double>)>& f) {
    std::vector<double> x(dim), g(dim), scratch(dim);
    for (auto& v : x) v = 0.5 * rng.normal();
    f(x, g);
    for (std::size_t k = 0; k < dim; ++k) {
      auto xp = x, xm = x;
      xp[k] += 1e-5;
      xm[k] -= 1e-5;
      if (!close(g[k], (f(xp, scratch) - f(xm, scratch)) / 2e-5)) return false;
    }
    return true;
  };
  std::vector<Sample> rows;
  for (int r = 0; r < 400; ++r) {
    FeatureVector fv;
    fv.user_id = "u" + std::to_string(rng.below(6));
    fv.item_id = "i" + std::to_string(rng.below(5));
    fv.delay = 0.1 + 5.0 * rng.uniform();
    fv.n = 1 + static_cast<int>(rng.below(5));
    fv.q = 1 + static_cast<int>(rng.below(5));
    rows.push_back({fv, rng.bernoulli(std::exp(-0.2 * *fv.delay / fv.q))});
  }
  bool ok = true;
  for (int row : {5, 6, 7, 8, 9}) {
    const EfcObjective obj(rows, model_from_row(row));
    for (double theta : {0.01, 0.2, 3.0}) {
      const double h = 1e-5 * theta;
      ok = ok && close(obj.derivative(theta), (obj.value(theta + h) - obj.value(theta - h)) / (2 * h));
    }
  }
  for (auto variant : {ModelKind::kIrt0User, ModelKind::kIrt0Item, ModelKind::kIrt1}) {
    const IrtObjective obj(rows, variant, 0.1);
    ok = ok && check(obj.dimension(), [&](auto x, auto g) { return obj.value_and_gradient(x, g); });
  }
  std::vector<double> design(200 * kLogRegFeatures);
  std::vector<char> labels(200);
  for (auto& v : design) v = rng.normal();
  for (auto& v : labels) v = rng.bernoulli(0.4);
  const LogRegObjective lr(design, labels, 0.5);
  ok = ok && check(lr.dimension(), [&](auto x, auto g) { return lr.value_and_gradient(x, g); });
  return ok;
}

Outcome memory_pipeline() {
  SyntheticLogOptions o;
  o.interactions = 100000;
  o.theta = 0.1;
  o.seed = 2016;
  const auto histories = build_histories(generate_efc_logs(o));
  const auto plan = make_fold_plan(histories, 10, 0.2, 0.1, 2016);
  const std::vector<ModelSpec> models = {model_from_row(7), model_from_row(8), model_from_row(9)};
  const auto report = evaluate_models(histories, models, plan);
  const auto& m7 = report.models[0].validation;
  const auto& m8 = report.models[1].validation;
  const auto& m9 = report.models[2].validation;
  const bool ranked = m7.mean && m8.mean && m9.mean &&
                      *m8.mean - *m8.stderr_ > *m9.mean + *m9.stderr_ &&
                      *m8.mean - *m8.stderr_ > *m7.mean + *m7.stderr_;

  std::vector<Sample> all;
  for (const auto& h : histories) {
    const auto part = samples_of(h, 1, h.interactions.size());
    all.insert(all.end(), part.begin(), part.end());
  }
  const double theta = fit_efc_global(all, StrengthMode::kLeitner, DelayMode::kWithDelay).theta;
  const bool recovered = std::abs(theta - o.theta) <= 0.05 * o.theta;

  const bool grads = gradient_checks();
  const std::vector<double> scores = {0.9, 0.4, 0.6, 0.2};
  const std::vector<bool> labels = {true, true, false, false};
  const bool aucs = auc(scores, labels) == 0.75 &&
                    auc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<bool>{true, true, false}) == 1.0 &&
                    auc(std::vector<double>{0.5, 0.5, 0.5, 0.5},
                        std::vector<bool>{true, false, true, false}) == 0.5;
  return {ranked && recovered && grads && aucs,
          fmt("AUC 7 %.4f+-%.4f, 8 %.4f+-%.4f, 9 %.4f+-%.4f; theta %.5f (truth %.2f); "
              "gradients %s; AUC cases %s",
              *m7.mean, *m7.stderr_, *m8.mean, *m8.stderr_, *m9.mean, *m9.stderr_, theta,
              o.theta, grads ? "ok" : "bad", aucs ? "ok" : "bad")};
}

std::string seeded_outputs() {
  std::ostringstream os;
  SimConfig c = phase_sweep().base;
  const double rates[] = {0.005, 0.015, 0.05};
  const auto sweep = sweep_arrival_rates(c, rates, 40, 77);
  os << sweep_csv(sweep) << occupancy_csv(sweep) << to_json(sweep).dump();
  c.lambda_ext = 0.01;
  c.record_trace = true;
  os << trace_csv(simulate(c, 78).trace);
  SyntheticLogOptions o;
  o.interactions = 5000;
  o.users = 30;
  o.items = 10;
  o.seed = 79;
  const auto hs = build_histories(generate_efc_logs(o));
  const std::vector<ModelSpec> models = {model_from_row(1), model_from_row(8)};
  os << to_csv(evaluate_models(hs, models, make_fold_plan(hs, 3, 0.2, 0.2, 80)));
  os << to_json(optimize_schedule(6, 1.0, 0.01)).dump();
  return os.str();
}

Outcome determinism() {
  const std::string a = seeded_outputs();
  const std::string b = seeded_outputs();
  return {a == b, fmt("%zu bytes compared", a.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"phase transition", phase_transition},
      {"threshold is conservative", threshold_conservative},
      {"mean-recall agreement at low rates", mean_recall_agreement},
      {"flow-balance correctness", flow_balance},
      {"ergodicity", ergodicity},
      {"optimal-schedule structure", schedule_structure},
      {"sensitivity", sensitivity},
      {"multi-difficulty shape", multi_difficulty},
      {"blow-up localization", blow_up},
      {"memory-model pipeline", memory_pipeline},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
