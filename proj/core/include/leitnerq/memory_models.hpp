#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "leitnerq/log_store.hpp"

namespace leitnerq {

enum class ModelKind { kIrt0User, kIrt0Item, kIrt1, kLogReg, kEfc };
enum class DifficultyMode { kGlobal, kPerItem };
enum class StrengthMode { kConstant, kReviews, kLeitner };
enum class DelayMode { kWithDelay, kWithoutDelay };

/// Identifies one of the fourteen recall models. Rows 1-4 are the logistic
/// benchmarks; rows 5-14 are exponential forgetting curves
/// exp(-theta * d / s) in their global/per-item, strength and delay variants.
struct ModelSpec {
  ModelKind kind = ModelKind::kEfc;
  DifficultyMode difficulty = DifficultyMode::kGlobal;
  StrengthMode strength = StrengthMode::kConstant;
  DelayMode delay = DelayMode::kWithDelay;

  int row() const;
  std::string name() const;
  bool operator==(const ModelSpec&) const = default;
};

ModelSpec model_from_row(int row);

/// Accepts a row number ("8") or a model name ("efc-q").
ModelSpec parse_model(std::string_view id);

const std::array<ModelSpec, 14>& all_models();

inline constexpr double kThetaMin = 1e-6;
inline constexpr double kThetaMax = 1e3;

/// mean, median, min, max, range, length, first, last.
struct HistoryStats {
  double mean = 0, median = 0, min = 0, max = 0, range = 0, length = 0, first = 0, last = 0;

  static HistoryStats of(std::span<const double> values);
  std::array<double, 8> as_array() const;
};

inline constexpr std::size_t kLogRegFeatures = 16;

struct FeatureVector {
  std::string user_id;
  std::string item_id;
  std::optional<double> delay;
  int n = 1;
  int q = 1;
  // Review intervals up to and including the current delay.
  std::optional<HistoryStats> intervals;
  // Outcomes of strictly earlier reviews.
  std::optional<HistoryStats> outcomes;
};

struct Sample {
  FeatureVector features;
  bool outcome = false;
};

/// Features of interaction `index`, computed only from the history prefix
/// up to that interaction.
FeatureVector features_at(const InteractionHistory& history, std::size_t index);

/// Samples for interactions [begin, end) of `history`.
std::vector<Sample> samples_of(const InteractionHistory& history, std::size_t begin,
                               std::size_t end);

struct FitInfo {
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  int iterations = 0;
  bool boundary = false;
  std::vector<std::string> warnings;
};

struct MemoryModel {
  ModelSpec spec;
  TimeUnit time_unit = TimeUnit::kDays;

  // Forgetting curves. For per-item difficulty, `theta` is the fallback
  // used for items absent from training.
  double theta = 1.0;
  std::map<std::string, double> item_theta;

  // IRT.
  std::map<std::string, double> user_ability;
  std::map<std::string, double> item_difficulty;
  double ability_fallback = 0.0;
  double difficulty_fallback = 0.0;

  // Logistic regression on standardized features.
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  double l2 = 0.0;
  FitInfo info;
};

double logistic(double z);

/// The quantity multiplying theta in a forgetting curve: d/s, 1/s or d.
/// Throws std::invalid_argument when the model needs a delay and f has none.
double efc_exposure(const ModelSpec& spec, const FeatureVector& f);

/// Recall probability under `model`. Unseen users or items fall back to the
/// training mean of the corresponding parameter.
double predict_recall(const MemoryModel& model, const FeatureVector& f);

/// Sum of Bernoulli log-likelihoods, probabilities clamped to [1e-12, 1-1e-12].
double log_likelihood(const MemoryModel& model, std::span<const Sample> samples);

// --- Objectives (exposed so tests can check analytic gradients) ----------

/// Bernoulli log-likelihood of exp(-theta * x) over (x, y) pairs.
class EfcObjective {
 public:
  EfcObjective(std::span<const Sample> samples, const ModelSpec& spec);

  double value(double theta) const;
  double derivative(double theta) const;
  std::size_t size() const { return x_.size(); }
  bool has_recall() const { return positives_ > 0; }
  bool has_lapse() const { return negatives_ > 0; }

 private:
  std::vector<double> x_;
  std::vector<char> y_;
  std::size_t positives_ = 0;
  std::size_t negatives_ = 0;
};

/// L2-penalized Bernoulli log-likelihood of the IRT variants.
/// Parameter layout: user abilities (sorted by id) then item difficulties.
class IrtObjective {
 public:
  IrtObjective(std::span<const Sample> samples, ModelKind variant, double l2);

  std::size_t dimension() const { return users_.size() + items_.size(); }
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;

  const std::vector<std::string>& users() const { return users_; }
  const std::vector<std::string>& items() const { return items_; }

 private:
  ModelKind variant_;
  double l2_;
  std::vector<std::string> users_;
  std::vector<std::string> items_;
  std::vector<int> user_index_;  // per row, -1 when unused
  std::vector<int> item_index_;
  std::vector<char> y_;
};

/// L2-penalized logistic regression with an unpenalized intercept at x[0].
class LogRegObjective {
 public:
  /// `rows` are already standardized, row-major with kLogRegFeatures columns.
  LogRegObjective(std::vector<double> rows, std::vector<char> y, double l2);

  std::size_t dimension() const { return kLogRegFeatures + 1; }
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;

 private:
  std::vector<double> rows_;
  std::vector<char> y_;
  double l2_;
};

// --- Fitting ---------------------------------------------------------------

struct ThetaFit {
  double theta = 1.0;
  bool at_lower = false;
  bool at_upper = false;
  int evaluations = 0;
};

/// Maximum-likelihood global difficulty on [kThetaMin, kThetaMax] by
/// golden-section search in log(theta), relative tolerance 1e-8. Samples
/// without a delay are skipped when the delay mode needs one.
ThetaFit fit_efc_global(std::span<const Sample> train, StrengthMode strength,
                        DelayMode delay);

struct PerItemFit {
  std::map<std::string, ThetaFit> items;
  double fallback = 1.0;  // mean fitted theta_i
};

PerItemFit fit_efc_per_item(std::span<const Sample> train, StrengthMode strength,
                            DelayMode delay);

/// MAP fit of an IRT variant. irt1 requires l2 > 0. `warm_start` may hold a
/// previous fit over the same entities.
MemoryModel fit_irt(std::span<const Sample> train, ModelKind variant, double l2,
                    const MemoryModel* warm_start = nullptr);

/// MAP logistic regression on standardized history statistics. Rows without
/// statistics are dropped; constant features are pinned to zero.
MemoryModel fit_logreg(std::span<const Sample> train, double l2,
                       const MemoryModel* warm_start = nullptr);

/// Fits any model. l2 is ignored by forgetting curves.
MemoryModel fit_model(const ModelSpec& spec, std::span<const Sample> train, double l2,
                      TimeUnit unit = TimeUnit::kDays);

/// Whether a model's fit takes an L2 constant.
bool uses_l2(const ModelSpec& spec);

/// Whether a sample can train or be scored by `spec`.
bool usable(const ModelSpec& spec, const FeatureVector& f);

nlohmann::json to_json(const MemoryModel& model);

}  // namespace leitnerq
