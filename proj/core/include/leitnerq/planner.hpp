#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace leitnerq {

/// Static review schedule: new items arrive at `lambda_ext`, deck k is
/// reviewed at rate mu[k-1], all within a total review budget.
struct Schedule {
  int n = 0;
  double lambda_ext = 0.0;
  std::vector<double> mu;
  double theta = 0.0;
  double budget = 0.0;
};

/// Steady state of the mean-recall approximation for a schedule.
struct FlowSolution {
  std::vector<double> lambda;  // per-deck arrival rates
  std::vector<double> recall;  // per-deck mean recall probability
  bool feasible = false;
  double residual = 0.0;      // inf-norm of the balance equations
  double cut_residual = 0.0;  // inf-norm of the cut identities
  int iterations = 0;
  std::optional<int> starved_deck;  // first deck with lambda_k >= mu_k
  std::vector<double> expected_delay;
  std::vector<double> expected_queue;
};

/// Recall probability at deck k when sojourn times are Exponential(mu - lambda).
/// Throws std::invalid_argument when mu <= lambda.
double recall_prob_mean(double mu, double lambda, double theta, int k);

/// Inf-norm residual of the deck balance equations: inflow to each deck
/// (new items, promotions from below, demotions from above and the deck-1
/// self loop) against lambda_k.
double balance_residual(std::span<const double> mu, std::span<const double> lambda,
                        double lambda_ext, double theta);

/// Inf-norm residual of P_k lambda_k - (1 - P_{k+1}) lambda_{k+1} = lambda_ext
/// and P_n lambda_n = lambda_ext.
double cut_residual(std::span<const double> mu, std::span<const double> lambda,
                    double lambda_ext, double theta);

struct FlowOptions {
  double damping = 0.5;
  double tolerance = 1e-12;
  int max_iterations = 10000;
};

/// Damped fixed-point iteration from lambda = 0, back-substituting the cut
/// identities from deck n down. Infeasibility is a verdict, not an error.
FlowSolution solve_flow_balance(std::span<const double> mu, double lambda_ext, double theta,
                                const FlowOptions& options = {});

/// Builds a FlowSolution for known arrival rates (no iteration).
FlowSolution evaluate_flow(std::span<const double> mu, std::span<const double> lambda,
                           double lambda_ext, double theta);

/// Largest lambda_ext for which `mu` is flow-feasible, by bisection on
/// [0, min mu_k] to absolute tolerance 1e-8 * sum(mu).
double max_feasible_arrival(std::span<const double> mu, double theta);

/// mu_k = (budget - lambda_ext) * k^-exponent / sum_j j^-exponent.
std::vector<double> budget_tight_rates(int n, double budget, double lambda_ext,
                                       double exponent = 0.5);

/// Threshold when the review rates use up whatever budget the arrivals leave:
/// bisection on lambda_ext with mu = budget_tight_rates(n, budget, lambda_ext).
double max_feasible_arrival_budget_tight(int n, double budget, double theta,
                                         double exponent = 0.5);

/// Log of the largest arrival rate a budget-tight schedule sustains when
/// deck k keeps slack mu_k - lambda_k = exp(log_slack[k]). Writes the
/// gradient with respect to log_slack; returns -inf when the slack alone
/// exceeds the budget.
double schedule_log_rate(std::span<const double> log_slack, double budget, double theta,
                         std::span<double> grad);

struct PlanResult {
  Schedule schedule;
  FlowSolution flow;
  double objective = 0.0;  // log of the arrival rate at the optimum
  int starts = 0;
  bool converged = false;
};

/// Maximizes lambda_ext subject to lambda_ext + sum(mu) <= budget and flow
/// feasibility. Throws std::invalid_argument for n < 1 or budget <= 0.
PlanResult optimize_schedule(int n, double budget, double theta);

/// Smallest total review budget (lambda + sum mu) that sustains arrival rate
/// `lambda_ext` at difficulty `theta`, and the schedule achieving it.
PlanResult min_budget_for_rate(int n, double lambda_ext, double theta);

struct MultiPlan {
  std::vector<double> thetas;
  std::vector<double> mix;  // share of new items in each bin
  double total_rate = 0.0;
  double budget = 0.0;
  std::vector<PlanResult> bins;
};

/// Parallel networks, one per difficulty, sharing one review budget. New
/// items arrive in proportions `mix` (default uniform); maximizes the total
/// arrival rate. A single bin is delegated to optimize_schedule.
MultiPlan optimize_multi_difficulty(int n, double budget, std::span<const double> thetas,
                                    std::span<const double> mix = {});

struct SensitivityRow {
  double param = 0.0;
  double lambda_star = 0.0;
  std::vector<double> mu;
};

std::vector<SensitivityRow> sensitivity_theta(int n, double budget,
                                              std::span<const double> thetas);
std::vector<SensitivityRow> sensitivity_budget(int n, double theta,
                                               std::span<const double> budgets);

/// `param,lambda_star,mu_1..mu_n`
std::string sensitivity_csv(std::span<const SensitivityRow> rows);

nlohmann::json to_json(const Schedule& schedule);
nlohmann::json to_json(const FlowSolution& flow);
nlohmann::json to_json(const PlanResult& plan);
nlohmann::json to_json(const MultiPlan& plan);

/// Per-deck table: mu, lambda, P, expected delay, expected queue.
std::string format_plan_table(const Schedule& schedule, const FlowSolution& flow);

}  // namespace leitnerq
