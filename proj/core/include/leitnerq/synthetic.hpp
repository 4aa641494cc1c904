#pragma once

#include <cstdint>

#include "leitnerq/log_store.hpp"

namespace leitnerq {

/// Review logs drawn from the deck-strength forgetting curve
/// p = exp(-theta * d / q), with delays log-uniform on [min_delay, max_delay]
/// days and first exposures recalled with probability `first_recall`.
struct SyntheticLogOptions {
  int users = 200;
  int items = 50;
  std::size_t interactions = 100000;
  double theta = 0.1;  // per day
  double min_delay = 0.05;
  double max_delay = 20.0;
  double first_recall = 0.5;
  std::uint64_t seed = 0;
};

/// Mnemosyne-dialect logs (grade 4 recalled, 1 forgotten) in days. Pairs are
/// visited in shuffled order; each gets 2 to 2*mean-2 interactions until the
/// requested total is reached.
LogSet generate_efc_logs(const SyntheticLogOptions& options);

}  // namespace leitnerq
