#include "leitnerq/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace leitnerq::optim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

double inf_norm(std::span<const double> g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::abs(v));
  return m;
}

ScalarResult golden_section_maximize(const std::function<double(double)>& f,
                                     double lo, double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int evals = 2;
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
    if (evals > 10000) break;
  }
  const double x = (fc >= fd) ? c : d;
  return {x, std::max(fc, fd), evals};
}

AscentResult lbfgs_maximize(const ValueAndGradient& f, std::vector<double> x,
                            const AscentOptions& options) {
  const std::size_t n = x.size();
  std::vector<double> grad(n);
  std::vector<double> trial(n);
  std::vector<double> trial_grad(n);
  std::vector<double> dir(n);
  std::deque<std::vector<double>> s_hist;
  std::deque<std::vector<double>> y_hist;
  std::deque<double> rho_hist;

  AscentResult out;
  double value = f(x, grad);
  if (!std::isfinite(value)) {
    out.x = std::move(x);
    out.value = value;
    return out;
  }

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (inf_norm(grad) < options.grad_tol) {
      out.converged = true;
      break;
    }

    // Two-loop recursion on the negated objective.
    for (std::size_t i = 0; i < n; ++i) dir[i] = grad[i];
    std::vector<double> alpha(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha[h] = rho_hist[h] * dot(s_hist[h], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[h] * y_hist[h][i];
    }
    if (!s_hist.empty()) {
      const double gamma = dot(s_hist.back(), y_hist.back()) /
                           dot(y_hist.back(), y_hist.back());
      for (double& v : dir) v *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * dot(y_hist[h], dir);
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[h] - beta) * s_hist[h][i];
    }

    double slope = dot(grad, dir);
    if (!(slope > 0.0)) {
      dir = grad;
      slope = dot(grad, dir);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // First step of a fresh steepest-ascent direction is scaled to unit length.
    double step = s_hist.empty() ? 1.0 / std::max(1.0, std::sqrt(dot(dir, dir))) : 1.0;
    double trial_value = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + step * dir[i];
      trial_value = f(trial, trial_grad);
      if (std::isfinite(trial_value) && trial_value >= value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial[i] - x[i];
      // Curvature pair for the minimization of -f.
      y[i] = grad[i] - trial_grad[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-300) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const bool stalled = std::abs(trial_value - value) <=
                         1e-16 * std::max(1.0, std::abs(value));
    x.swap(trial);
    grad.swap(trial_grad);
    value = trial_value;
    if (stalled && inf_norm(grad) < std::sqrt(options.grad_tol)) {
      out.converged = inf_norm(grad) < options.grad_tol;
      ++it;
      break;
    }
  }

  out.grad_inf_norm = inf_norm(grad);
  out.converged = out.converged || out.grad_inf_norm < options.grad_tol;
  out.x = std::move(x);
  out.value = value;
  out.iterations = it;
  return out;
}

}  // namespace leitnerq::optim
