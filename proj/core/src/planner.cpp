#include "leitnerq/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "format.hpp"

#include "leitnerq/optim.hpp"

namespace leitnerq {

namespace {

using detail::format_double;

constexpr double kStarveFactor = 1.0 - 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Visit ratios under slack s_k = mu_k - lambda_k: lambda = lambda_ext * g.
struct SlackEval {
  std::vector<double> recall;
  std::vector<double> g;
  double total = 0.0;  // sum of g
};

SlackEval slack_eval(std::span<const double> s, double theta) {
  const std::size_t n = s.size();
  SlackEval e;
  e.recall.resize(n);
  e.g.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double c = theta / static_cast<double>(k + 1);
    e.recall[k] = s[k] / (s[k] + c);
  }
  e.g[n - 1] = 1.0 / e.recall[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) {
    e.g[k] = (1.0 + (1.0 - e.recall[k + 1]) * e.g[k + 1]) / e.recall[k];
  }
  e.total = std::accumulate(e.g.begin(), e.g.end(), 0.0);
  return e;
}

// d(sum g)/ds_k, by reverse accumulation through the g recursion.
std::vector<double> slack_total_gradient(std::span<const double> s, double theta,
                                         const SlackEval& e) {
  const std::size_t n = s.size();
  std::vector<double> gbar(n);
  gbar[0] = 1.0;
  for (std::size_t k = 1; k < n; ++k) {
    gbar[k] = 1.0 + gbar[k - 1] * (1.0 - e.recall[k]) / e.recall[k - 1];
  }
  std::vector<double> grad(n);
  for (std::size_t k = 0; k < n; ++k) {
    double pbar = -gbar[k] * e.g[k] / e.recall[k];
    if (k >= 1) pbar -= gbar[k - 1] * e.g[k] / e.recall[k - 1];
    const double c = theta / static_cast<double>(k + 1);
    grad[k] = pbar * c / ((s[k] + c) * (s[k] + c));
  }
  return grad;
}

std::vector<std::vector<double>> start_shapes(int n) {
  std::vector<std::vector<double>> shapes;
  for (double exponent : {0.0, 0.5, 1.0}) {
    std::vector<double> w(n);
    for (int k = 0; k < n; ++k) w[k] = std::pow(static_cast<double>(k + 1), -exponent);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    shapes.push_back(std::move(w));
  }
  return shapes;
}

constexpr double kStartFractions[] = {0.1, 0.3, 0.5};

// Schedule from slack and arrival rate.
PlanResult plan_from_slack(int n, double budget, double theta, double lambda_ext,
                           std::span<const double> s) {
  const SlackEval e = slack_eval(s, theta);
  PlanResult r;
  r.schedule.n = n;
  r.schedule.theta = theta;
  r.schedule.budget = budget;
  r.schedule.lambda_ext = lambda_ext;
  std::vector<double> lambda(n);
  r.schedule.mu.resize(n);
  for (int k = 0; k < n; ++k) {
    lambda[k] = lambda_ext * e.g[k];
    r.schedule.mu[k] = s[k] + lambda[k];
  }
  r.flow = evaluate_flow(r.schedule.mu, lambda, lambda_ext, theta);
  return r;
}

void check_plan_args(int n, double budget, double theta) {
  if (n < 1) throw std::invalid_argument("deck count must be at least 1");
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
}

nlohmann::json vec_json(std::span<const double> v) {
  return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

}  // namespace

double recall_prob_mean(double mu, double lambda, double theta, int k) {
  if (!(mu > lambda)) throw std::invalid_argument("starved queue: mu <= lambda");
  if (k < 1) throw std::invalid_argument("deck index must be >= 1");
  const double slack = mu - lambda;
  return slack / (slack + theta / k);
}

double balance_residual(std::span<const double> mu, std::span<const double> lambda,
                        double lambda_ext, double theta) {
  const std::size_t n = mu.size();
  std::vector<double> p(n);
  for (std::size_t k = 0; k < n; ++k) {
    p[k] = recall_prob_mean(mu[k], lambda[k], theta, static_cast<int>(k + 1));
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double inflow = 0.0;
    if (k == 0) {
      inflow += lambda_ext + (1.0 - p[0]) * lambda[0];
    } else {
      inflow += p[k - 1] * lambda[k - 1];
    }
    if (k + 1 < n) inflow += (1.0 - p[k + 1]) * lambda[k + 1];
    worst = std::max(worst, std::abs(lambda[k] - inflow));
  }
  return worst;
}

double cut_residual(std::span<const double> mu, std::span<const double> lambda,
                    double lambda_ext, double theta) {
  const std::size_t n = mu.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double pk = recall_prob_mean(mu[k], lambda[k], theta, static_cast<int>(k + 1));
    double lhs = pk * lambda[k];
    if (k + 1 < n) {
      const double pn =
          recall_prob_mean(mu[k + 1], lambda[k + 1], theta, static_cast<int>(k + 2));
      lhs -= (1.0 - pn) * lambda[k + 1];
    }
    worst = std::max(worst, std::abs(lhs - lambda_ext));
  }
  return worst;
}

FlowSolution evaluate_flow(std::span<const double> mu, std::span<const double> lambda,
                           double lambda_ext, double theta) {
  const std::size_t n = mu.size();
  FlowSolution sol;
  sol.lambda.assign(lambda.begin(), lambda.end());
  for (std::size_t k = 0; k < n; ++k) {
    if (!(lambda[k] < mu[k] * kStarveFactor)) {
      sol.starved_deck = static_cast<int>(k + 1);
      return sol;
    }
  }
  sol.recall.resize(n);
  sol.expected_delay.resize(n);
  sol.expected_queue.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    sol.recall[k] = recall_prob_mean(mu[k], lambda[k], theta, static_cast<int>(k + 1));
    sol.expected_delay[k] = 1.0 / (mu[k] - lambda[k]);
    sol.expected_queue[k] = lambda[k] / (mu[k] - lambda[k]);
  }
  sol.residual = balance_residual(mu, lambda, lambda_ext, theta);
  sol.cut_residual = cut_residual(mu, lambda, lambda_ext, theta);
  sol.feasible = sol.residual < 1e-9 && sol.cut_residual < 1e-9;
  return sol;
}

FlowSolution solve_flow_balance(std::span<const double> mu, double lambda_ext, double theta,
                                const FlowOptions& options) {
  const std::size_t n = mu.size();
  if (n == 0) throw std::invalid_argument("empty schedule");
  for (double m : mu) {
    if (!(m > 0.0)) throw std::invalid_argument("review rates must be positive");
  }
  if (!(lambda_ext >= 0.0)) throw std::invalid_argument("arrival rate must be >= 0");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");

  std::vector<double> lambda(n, 0.0);
  std::vector<double> next(n);
  std::vector<double> p(n);
  int it = 0;
  bool converged = false;
  for (; it < options.max_iterations; ++it) {
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = recall_prob_mean(mu[k], lambda[k], theta, static_cast<int>(k + 1));
    }
    next[n - 1] = lambda_ext / p[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) {
      next[k] = (lambda_ext + (1.0 - p[k + 1]) * next[k + 1]) / p[k];
    }
    double change = 0.0;
    std::optional<int> starved;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = options.damping * next[k] + (1.0 - options.damping) * lambda[k];
      change = std::max(change, std::abs(v - lambda[k]));
      lambda[k] = v;
      if (!starved && !(v < mu[k] * kStarveFactor)) starved = static_cast<int>(k + 1);
    }
    if (starved) {
      FlowSolution sol;
      sol.lambda = lambda;
      sol.iterations = it + 1;
      sol.starved_deck = starved;
      return sol;
    }
    if (change < options.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  FlowSolution sol = evaluate_flow(mu, lambda, lambda_ext, theta);
  sol.iterations = it;
  if (!converged) sol.feasible = false;
  return sol;
}

double max_feasible_arrival(std::span<const double> mu, double theta) {
  if (mu.empty()) throw std::invalid_argument("empty schedule");
  const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
  double lo = 0.0;
  double hi = *std::min_element(mu.begin(), mu.end());
  const double tol = 1e-8 * total;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (solve_flow_balance(mu, mid, theta).feasible) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::vector<double> budget_tight_rates(int n, double budget, double lambda_ext,
                                       double exponent) {
  if (n < 1) throw std::invalid_argument("deck count must be at least 1");
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) w[k] = std::pow(static_cast<double>(k + 1), -exponent);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x *= (budget - lambda_ext) / sum;
  return w;
}

double max_feasible_arrival_budget_tight(int n, double budget, double theta,
                                         double exponent) {
  check_plan_args(n, budget, theta);
  double lo = 0.0;
  double hi = budget;
  const double tol = 1e-8 * budget;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const auto mu = budget_tight_rates(n, budget, mid, exponent);
    if (solve_flow_balance(mu, mid, theta).feasible) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double schedule_log_rate(std::span<const double> log_slack, double budget, double theta,
                         std::span<double> grad) {
  // log(U - sum s) - log(1 + sum g(s)), s = exp(z).
  std::vector<double> s(log_slack.size());
  double spent = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    s[k] = std::exp(log_slack[k]);
    spent += s[k];
  }
  const double left = budget - spent;
  if (!(left > 0.0)) return kNegInf;
  const SlackEval e = slack_eval(s, theta);
  const auto dg = slack_total_gradient(s, theta, e);
  for (std::size_t k = 0; k < s.size(); ++k) {
    grad[k] = s[k] * (-1.0 / left - dg[k] / (1.0 + e.total));
  }
  return std::log(left) - std::log1p(e.total);
}

PlanResult optimize_schedule(int n, double budget, double theta) {
  check_plan_args(n, budget, theta);
  const optim::ValueAndGradient objective = [&](std::span<const double> z,
                                                std::span<double> grad) {
    return schedule_log_rate(z, budget, theta, grad);
  };

  optim::AscentOptions options;
  options.grad_tol = 1e-8;
  std::optional<optim::AscentResult> best;
  int starts = 0;
  for (const auto& shape : start_shapes(n)) {
    for (double fraction : kStartFractions) {
      std::vector<double> z0(n);
      for (int k = 0; k < n; ++k) z0[k] = std::log(fraction * budget * shape[k]);
      auto r = optim::lbfgs_maximize(objective, z0, options);
      ++starts;
      if (!best || r.value > best->value) best = std::move(r);
    }
  }
  std::vector<double> s(n);
  double spent = 0.0;
  for (int k = 0; k < n; ++k) {
    s[k] = std::exp(best->x[k]);
    spent += s[k];
  }
  const SlackEval e = slack_eval(s, theta);
  // Shave the rate by a relative 1e-12 so rounding keeps the budget satisfied.
  const double lambda_ext = (budget - spent) / (1.0 + e.total) * (1.0 - 1e-12);
  PlanResult r = plan_from_slack(n, budget, theta, lambda_ext, s);
  r.objective = best->value;
  r.starts = starts;
  r.converged = best->converged;
  return r;
}

PlanResult min_budget_for_rate(int n, double lambda_ext, double theta) {
  if (n < 1) throw std::invalid_argument("deck count must be at least 1");
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (!(lambda_ext >= 0.0)) throw std::invalid_argument("arrival rate must be >= 0");
  if (lambda_ext == 0.0) {
    PlanResult r;
    r.schedule = {n, 0.0, std::vector<double>(n, 0.0), theta, 0.0};
    r.flow.lambda.assign(n, 0.0);
    r.converged = true;
    return r;
  }
  // Maximize -(lambda * (1 + sum g(s)) + sum s), s = exp(z).
  const optim::ValueAndGradient objective = [&](std::span<const double> z,
                                                std::span<double> grad) {
    std::vector<double> s(z.size());
    double spent = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      s[k] = std::exp(z[k]);
      spent += s[k];
    }
    const SlackEval e = slack_eval(s, theta);
    const auto dg = slack_total_gradient(s, theta, e);
    for (std::size_t k = 0; k < z.size(); ++k) {
      grad[k] = -s[k] * (lambda_ext * dg[k] + 1.0);
    }
    return -(lambda_ext * (1.0 + e.total) + spent);
  };
  // Slack scale: sqrt(lambda * theta) balances the two cost terms per deck.
  const double scale = std::sqrt(lambda_ext * theta) * n;
  optim::AscentOptions options;
  // Relative to the size of the objective.
  options.grad_tol = 1e-8 * (lambda_ext + scale);
  std::optional<optim::AscentResult> best;
  int starts = 0;
  for (const auto& shape : start_shapes(n)) {
    for (double factor : {0.3, 1.0, 3.0}) {
      std::vector<double> z0(n);
      for (int k = 0; k < n; ++k) z0[k] = std::log(factor * scale * shape[k]);
      auto r = optim::lbfgs_maximize(objective, z0, options);
      ++starts;
      if (!best || r.value > best->value) best = std::move(r);
    }
  }
  std::vector<double> s(n);
  for (int k = 0; k < n; ++k) s[k] = std::exp(best->x[k]);
  PlanResult r = plan_from_slack(n, -best->value, theta, lambda_ext, s);
  r.schedule.budget = lambda_ext + std::accumulate(r.schedule.mu.begin(),
                                                   r.schedule.mu.end(), 0.0);
  r.objective = best->value;
  r.starts = starts;
  r.converged = best->converged;
  return r;
}

MultiPlan optimize_multi_difficulty(int n, double budget, std::span<const double> thetas,
                                    std::span<const double> mix) {
  if (thetas.empty()) throw std::invalid_argument("no difficulty bins");
  for (double t : thetas) check_plan_args(n, budget, t);
  MultiPlan plan;
  plan.thetas.assign(thetas.begin(), thetas.end());
  plan.budget = budget;
  if (mix.empty()) {
    plan.mix.assign(thetas.size(), 1.0 / static_cast<double>(thetas.size()));
  } else {
    if (mix.size() != thetas.size()) throw std::invalid_argument("mix size != bin count");
    const double sum = std::accumulate(mix.begin(), mix.end(), 0.0);
    for (double m : mix) {
      if (!(m > 0.0)) throw std::invalid_argument("mix weights must be positive");
    }
    for (double m : mix) plan.mix.push_back(m / sum);
  }

  if (thetas.size() == 1) {
    plan.bins.push_back(optimize_schedule(n, budget, thetas[0]));
    plan.total_rate = plan.bins[0].schedule.lambda_ext;
    return plan;
  }

  auto spend = [&](double total, std::vector<PlanResult>* out) {
    double used = 0.0;
    for (std::size_t b = 0; b < thetas.size(); ++b) {
      PlanResult r = min_budget_for_rate(n, plan.mix[b] * total, thetas[b]);
      used += r.schedule.budget;
      if (out) out->push_back(std::move(r));
    }
    return used;
  };
  // Budget needed grows with the total rate; bisect for the rate that uses
  // exactly the available budget.
  double lo = 0.0;
  double hi = budget;
  while (hi - lo > 1e-10 * budget) {
    const double mid = 0.5 * (lo + hi);
    if (spend(mid, nullptr) <= budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  spend(lo, &plan.bins);
  plan.total_rate = lo;
  return plan;
}

std::vector<SensitivityRow> sensitivity_theta(int n, double budget,
                                              std::span<const double> thetas) {
  std::vector<SensitivityRow> rows;
  for (double t : thetas) {
    if (!(t > 0.0)) throw std::invalid_argument("theta grid must be positive");
    auto r = optimize_schedule(n, budget, t);
    rows.push_back({t, r.schedule.lambda_ext, r.schedule.mu});
  }
  return rows;
}

std::vector<SensitivityRow> sensitivity_budget(int n, double theta,
                                               std::span<const double> budgets) {
  std::vector<SensitivityRow> rows;
  for (double u : budgets) {
    if (!(u > 0.0)) throw std::invalid_argument("budget grid must be positive");
    auto r = optimize_schedule(n, u, theta);
    rows.push_back({u, r.schedule.lambda_ext, r.schedule.mu});
  }
  return rows;
}

std::string sensitivity_csv(std::span<const SensitivityRow> rows) {
  std::ostringstream os;
  os << "param,lambda_star";
  const std::size_t n = rows.empty() ? 0 : rows.front().mu.size();
  for (std::size_t k = 0; k < n; ++k) os << ",mu_" << k + 1;
  os << '\n';
  for (const auto& r : rows) {
    os << format_double(r.param) << ',' << format_double(r.lambda_star);
    for (double m : r.mu) os << ',' << format_double(m);
    os << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const Schedule& schedule) {
  return {{"n", schedule.n},
          {"lambda_ext", schedule.lambda_ext},
          {"mu", schedule.mu},
          {"theta", schedule.theta},
          {"budget", schedule.budget}};
}

nlohmann::json to_json(const FlowSolution& flow) {
  nlohmann::json j = {{"lambda", vec_json(flow.lambda)},
                      {"recall", vec_json(flow.recall)},
                      {"feasible", flow.feasible},
                      {"residual", flow.residual},
                      {"cut_residual", flow.cut_residual},
                      {"iterations", flow.iterations},
                      {"expected_delay", vec_json(flow.expected_delay)},
                      {"expected_queue", vec_json(flow.expected_queue)}};
  j["starved_deck"] = flow.starved_deck ? nlohmann::json(*flow.starved_deck) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const PlanResult& plan) {
  return {{"schedule", to_json(plan.schedule)},
          {"flow", to_json(plan.flow)},
          {"starts", plan.starts},
          {"converged", plan.converged}};
}

nlohmann::json to_json(const MultiPlan& plan) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : plan.bins) bins.push_back(to_json(b));
  return {{"thetas", plan.thetas},
          {"mix", plan.mix},
          {"budget", plan.budget},
          {"total_rate", plan.total_rate},
          {"bins", bins}};
}

std::string format_plan_table(const Schedule& schedule, const FlowSolution& flow) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "lambda_ext = %.6g  budget = %.6g  theta = %.6g\n",
                schedule.lambda_ext, schedule.budget, schedule.theta);
  os << line;
  std::snprintf(line, sizeof line, "%5s %12s %12s %10s %12s %12s\n", "deck", "mu", "lambda",
                "P", "E[delay]", "E[queue]");
  os << line;
  for (int k = 0; k < schedule.n; ++k) {
    const auto at = [&](const std::vector<double>& v) {
      return static_cast<std::size_t>(k) < v.size() ? v[k] : std::nan("");
    };
    std::snprintf(line, sizeof line, "%5d %12.6g %12.6g %10.6f %12.6g %12.6g\n", k + 1,
                  schedule.mu[k], at(flow.lambda), at(flow.recall), at(flow.expected_delay),
                  at(flow.expected_queue));
    os << line;
  }
  return os.str();
}

}  // namespace leitnerq
