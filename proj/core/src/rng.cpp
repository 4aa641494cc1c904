#include "leitnerq/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace leitnerq {

double Rng::exponential(double rate) {
  return -std::log(uniform_open_zero()) / rate;
}

double Rng::normal() {
  // Box-Muller, discarding the second variate to keep the stream stateless.
  const double u1 = uniform_open_zero();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection on the top of the range to remove modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

}  // namespace leitnerq
