#include "leitnerq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "leitnerq/rng.hpp"

namespace leitnerq {

LogSet generate_efc_logs(const SyntheticLogOptions& options) {
  if (options.users < 1 || options.items < 1) {
    throw std::invalid_argument("need at least one user and one item");
  }
  if (!(options.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (!(options.min_delay > 0.0 && options.max_delay >= options.min_delay)) {
    throw std::invalid_argument("delays must satisfy 0 < min_delay <= max_delay");
  }
  const std::size_t pairs =
      static_cast<std::size_t>(options.users) * static_cast<std::size_t>(options.items);
  const double mean_len =
      std::max(2.0, static_cast<double>(options.interactions) / static_cast<double>(pairs));
  const auto max_len = static_cast<std::uint64_t>(std::max(2.0, 2.0 * mean_len - 2.0));

  Rng rng(options.seed);
  std::vector<std::pair<int, int>> order;
  order.reserve(pairs);
  for (int u = 0; u < options.users; ++u) {
    for (int i = 0; i < options.items; ++i) order.emplace_back(u, i);
  }
  rng.shuffle(std::span<std::pair<int, int>>(order));

  const double log_lo = std::log(options.min_delay);
  const double log_hi = std::log(options.max_delay);
  constexpr double kDay = 86400.0;

  LogSet set;
  set.dialect = Dialect::kMnemosyne;
  set.time_unit = TimeUnit::kDays;
  set.logs.reserve(options.interactions);
  for (const auto& [user, item] : order) {
    if (set.logs.size() >= options.interactions) break;
    const std::size_t remaining = options.interactions - set.logs.size();
    std::size_t len = 2 + rng.below(max_len - 1);
    len = std::min(len, remaining);
    double t = std::floor(rng.uniform() * 365.0 * kDay);
    int q = 1;
    for (std::size_t r = 0; r < len; ++r) {
      double p = options.first_recall;
      if (r > 0) {
        const double d = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());
        t += std::max(1.0, std::round(d * kDay));
        p = std::exp(-options.theta * d / q);
      }
      const bool recalled = rng.bernoulli(p);
      ReviewLog log;
      log.user_id = "u" + std::to_string(user);
      log.item_id = "i" + std::to_string(item);
      log.timestamp = t;
      log.outcome = recalled;
      log.grade = recalled ? 4 : 1;
      set.logs.push_back(std::move(log));
      q = recalled ? q + 1 : std::max(q - 1, 1);
    }
  }
  return set;
}

}  // namespace leitnerq
