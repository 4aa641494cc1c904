#pragma once

#include <functional>
#include <span>
#include <vector>

namespace leitnerq::optim {

struct ScalarResult {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

/// Maximizes a unimodal function on [lo, hi] by golden-section search,
/// stopping once the bracket is narrower than `tol`.
ScalarResult golden_section_maximize(const std::function<double(double)>& f,
                                     double lo, double hi, double tol);

/// Objective for the multivariate maximizers: returns f(x) and writes
/// the gradient into `grad`. Returning -inf marks x as outside the domain.
using ValueAndGradient =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct AscentOptions {
  double grad_tol = 1e-6;  // stop when the gradient inf-norm drops below
  int max_iterations = 10000;
  int memory = 8;          // L-BFGS history length
};

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Maximizes a smooth function with L-BFGS directions and Armijo
/// backtracking. Falls back to the steepest-ascent direction whenever
/// the quasi-Newton direction is not an ascent direction.
AscentResult lbfgs_maximize(const ValueAndGradient& f, std::vector<double> x0,
                            const AscentOptions& options = {});

/// Largest |g_i|.
double inf_norm(std::span<const double> g);

}  // namespace leitnerq::optim
