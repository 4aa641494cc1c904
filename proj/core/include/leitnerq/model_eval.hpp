#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "leitnerq/log_store.hpp"
#include "leitnerq/memory_models.hpp"

namespace leitnerq {

/// Truncated-history cross-validation split over user-item pairs.
///
/// A held-out test set of pairs is excluded from every fold. On fold f the
/// pairs in `truncated[f]` contribute only interactions [0, t) to training
/// and are validated on interaction t, where t = `truncation[pair]`; every
/// other non-test pair contributes its full history.
struct FoldPlan {
  int fold_count = 10;
  double test_frac = 0.2;
  double trunc_frac = 0.1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> test_pairs;
  std::vector<std::size_t> fold_pairs;
  std::vector<std::vector<std::size_t>> truncated;
  std::vector<std::size_t> truncation;  // indexed by history
};

FoldPlan make_fold_plan(std::span<const InteractionHistory> histories, int fold_count = 10,
                        double test_frac = 0.2, double trunc_frac = 0.1,
                        std::uint64_t seed = 0);

struct ScoredOutcome {
  double score = 0.0;
  bool label = false;
};

/// Mann-Whitney AUC: (concordant + 0.5 * tied) / (positives * negatives).
/// Throws std::invalid_argument unless both classes are present.
double auc(std::span<const ScoredOutcome> points);
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Deck bins q = 1..5 and q >= 6.
inline constexpr std::size_t kDeckBins = 6;
std::size_t deck_bin(int q);
std::string deck_bin_label(std::size_t bin);

using Predictor = std::function<double(const FeatureVector&)>;

/// A model under evaluation: either a built-in spec, or a custom fitter
/// (used for oracles and baselines).
struct Candidate {
  std::string name;
  std::optional<ModelSpec> spec;
  std::function<Predictor(std::span<const Sample> train)> fit;

  static Candidate of(const ModelSpec& spec);
};

struct AucSummary {
  std::optional<double> mean;
  std::optional<double> stderr_;
  std::size_t folds = 0;  // folds with a defined AUC
};

/// Sample mean and sample-std / sqrt(count) over the defined values.
AucSummary summarize_aucs(std::span<const std::optional<double>> values);

struct ModelEvaluation {
  std::string name;
  std::optional<ModelSpec> spec;
  std::vector<std::optional<double>> fold_auc;
  std::vector<std::array<std::optional<double>, kDeckBins>> fold_bin_auc;
  std::vector<double> fold_l2;
  std::optional<double> test_auc;
  std::array<std::optional<double>, kDeckBins> test_bin_auc{};
  double test_l2 = 0.0;
  AucSummary validation;
  std::array<AucSummary, kDeckBins> bins{};
};

struct EvalReport {
  int fold_count = 0;
  std::uint64_t seed = 0;
  std::vector<ModelEvaluation> models;
};

struct EvalOptions {
  std::vector<double> l2_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
  unsigned threads = 1;
};

EvalReport evaluate_candidates(std::span<const InteractionHistory> histories,
                               std::span<const Candidate> candidates, const FoldPlan& plan,
                               const EvalOptions& options = {});

EvalReport evaluate_models(std::span<const InteractionHistory> histories,
                           std::span<const ModelSpec> models, const FoldPlan& plan,
                           const EvalOptions& options = {});

/// Long format `model,fold,bin,auc`; fold is an index or "test", bin is
/// "all" or a deck label, absent cells are written as NA.
std::string to_csv(const EvalReport& report);
nlohmann::json to_json(const EvalReport& report);

}  // namespace leitnerq
