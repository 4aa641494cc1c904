#include "leitnerq/memory_models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "leitnerq/optim.hpp"

namespace leitnerq {

namespace {

constexpr std::array<std::string_view, 14> kNames = {
    "irt0-user",     "irt0-item",      "irt1",         "logreg",
    "efc-n",         "efc-const",      "efc-n-nodelay", "efc-q",
    "efc-q-nodelay", "efc-item-n",     "efc-item-const", "efc-item-n-nodelay",
    "efc-item-q",    "efc-item-q-nodelay"};

constexpr std::array<std::string_view, kLogRegFeatures> kFeatureNames = {
    "interval_mean",  "interval_median", "interval_min",   "interval_max",
    "interval_range", "interval_length", "interval_first", "interval_last",
    "outcome_mean",   "outcome_median",  "outcome_min",    "outcome_max",
    "outcome_range",  "outcome_length",  "outcome_first",  "outcome_last"};

std::array<ModelSpec, 14> make_models() {
  using D = DifficultyMode;
  using S = StrengthMode;
  using L = DelayMode;
  std::array<ModelSpec, 14> m{};
  m[0] = {ModelKind::kIrt0User};
  m[1] = {ModelKind::kIrt0Item};
  m[2] = {ModelKind::kIrt1};
  m[3] = {ModelKind::kLogReg};
  const std::array<std::pair<S, L>, 5> efc = {{{S::kReviews, L::kWithDelay},
                                               {S::kConstant, L::kWithDelay},
                                               {S::kReviews, L::kWithoutDelay},
                                               {S::kLeitner, L::kWithDelay},
                                               {S::kLeitner, L::kWithoutDelay}}};
  for (std::size_t i = 0; i < efc.size(); ++i) {
    m[4 + i] = {ModelKind::kEfc, D::kGlobal, efc[i].first, efc[i].second};
    m[9 + i] = {ModelKind::kEfc, D::kPerItem, efc[i].first, efc[i].second};
  }
  return m;
}

double clamp_prob(double p) { return std::clamp(p, 1e-12, 1.0 - 1e-12); }

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double strength_of(StrengthMode mode, const FeatureVector& f) {
  switch (mode) {
    case StrengthMode::kConstant: return 1.0;
    case StrengthMode::kReviews: return static_cast<double>(f.n);
    case StrengthMode::kLeitner: return static_cast<double>(f.q);
  }
  return 1.0;
}

template <typename Map>
double lookup_or(const Map& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

std::array<double, kLogRegFeatures> raw_features(const FeatureVector& f) {
  std::array<double, kLogRegFeatures> out{};
  const auto a = f.intervals->as_array();
  const auto b = f.outcomes->as_array();
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + 8);
  return out;
}

}  // namespace

const std::array<ModelSpec, 14>& all_models() {
  static const std::array<ModelSpec, 14> models = make_models();
  return models;
}

int ModelSpec::row() const {
  const auto& m = all_models();
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] == *this) return static_cast<int>(i) + 1;
  }
  throw std::invalid_argument("model spec does not correspond to a known row");
}

std::string ModelSpec::name() const { return std::string(kNames[row() - 1]); }

ModelSpec model_from_row(int row) {
  if (row < 1 || row > 14) throw std::invalid_argument("model row must be in 1..14");
  return all_models()[row - 1];
}

ModelSpec parse_model(std::string_view id) {
  int row = 0;
  bool numeric = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
  if (numeric && id.size() <= 2) {
    row = std::stoi(std::string(id));
    if (row >= 1 && row <= 14) return model_from_row(row);
  }
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == id) return all_models()[i];
  }
  std::string valid;
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    valid += "\n  " + std::to_string(i + 1) + "  " + std::string(kNames[i]);
  }
  throw std::invalid_argument("unknown model '" + std::string(id) + "'; valid models:" + valid);
}

HistoryStats HistoryStats::of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("statistics of an empty sequence");
  HistoryStats s;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(m);
  s.median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  s.min = sorted.front();
  s.max = sorted.back();
  s.range = s.max - s.min;
  s.length = static_cast<double>(m);
  s.first = values.front();
  s.last = values.back();
  return s;
}

std::array<double, 8> HistoryStats::as_array() const {
  return {mean, median, min, max, range, length, first, last};
}

FeatureVector features_at(const InteractionHistory& history, std::size_t index) {
  if (index >= history.interactions.size()) throw std::out_of_range("interaction index");
  const Interaction& x = history.interactions[index];
  FeatureVector f;
  f.user_id = history.user_id;
  f.item_id = history.item_id;
  f.delay = x.delay;
  f.n = x.n;
  f.q = x.q;
  if (index > 0) {
    std::vector<double> intervals;
    std::vector<double> outcomes;
    for (std::size_t i = 0; i <= index; ++i) {
      if (history.interactions[i].delay) intervals.push_back(*history.interactions[i].delay);
      if (i < index) outcomes.push_back(history.interactions[i].outcome ? 1.0 : 0.0);
    }
    if (!intervals.empty()) f.intervals = HistoryStats::of(intervals);
    f.outcomes = HistoryStats::of(outcomes);
  }
  return f;
}

std::vector<Sample> samples_of(const InteractionHistory& history, std::size_t begin,
                               std::size_t end) {
  std::vector<Sample> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back({features_at(history, i), history.interactions[i].outcome});
  }
  return out;
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double efc_exposure(const ModelSpec& spec, const FeatureVector& f) {
  const double s = strength_of(spec.strength, f);
  if (spec.delay == DelayMode::kWithoutDelay) return 1.0 / s;
  if (!f.delay) throw std::invalid_argument("forgetting curve needs a delay");
  return *f.delay / s;
}

bool uses_l2(const ModelSpec& spec) { return spec.kind != ModelKind::kEfc; }

bool usable(const ModelSpec& spec, const FeatureVector& f) {
  switch (spec.kind) {
    case ModelKind::kEfc: return f.delay.has_value();
    case ModelKind::kLogReg: return f.intervals.has_value() && f.outcomes.has_value();
    default: return true;
  }
}

double predict_recall(const MemoryModel& model, const FeatureVector& f) {
  const ModelSpec& spec = model.spec;
  switch (spec.kind) {
    case ModelKind::kEfc: {
      const double theta = spec.difficulty == DifficultyMode::kPerItem
                               ? lookup_or(model.item_theta, f.item_id, model.theta)
                               : model.theta;
      return std::exp(-theta * efc_exposure(spec, f));
    }
    case ModelKind::kIrt0User:
      return logistic(lookup_or(model.user_ability, f.user_id, model.ability_fallback));
    case ModelKind::kIrt0Item:
      return logistic(-lookup_or(model.item_difficulty, f.item_id, model.difficulty_fallback));
    case ModelKind::kIrt1:
      return logistic(lookup_or(model.user_ability, f.user_id, model.ability_fallback) -
                      lookup_or(model.item_difficulty, f.item_id, model.difficulty_fallback));
    case ModelKind::kLogReg: {
      if (!f.intervals || !f.outcomes) return logistic(model.intercept);
      const auto raw = raw_features(f);
      double z = model.intercept;
      for (std::size_t k = 0; k < kLogRegFeatures; ++k) {
        if (model.feature_scale[k] > 0.0) {
          z += model.coefficients[k] * (raw[k] - model.feature_mean[k]) / model.feature_scale[k];
        }
      }
      return logistic(z);
    }
  }
  throw std::invalid_argument("unknown model kind");
}

double log_likelihood(const MemoryModel& model, std::span<const Sample> samples) {
  double ll = 0.0;
  for (const auto& s : samples) {
    const double p = clamp_prob(predict_recall(model, s.features));
    ll += s.outcome ? std::log(p) : std::log1p(-p);
  }
  return ll;
}

// --- EfcObjective -----------------------------------------------------------

EfcObjective::EfcObjective(std::span<const Sample> samples, const ModelSpec& spec) {
  x_.reserve(samples.size());
  y_.reserve(samples.size());
  for (const auto& s : samples) {
    if (spec.delay == DelayMode::kWithDelay && !s.features.delay) continue;
    const double x = efc_exposure(spec, s.features);
    // Zero exposure contributes a theta-independent constant.
    if (!(x > 0.0)) continue;
    x_.push_back(x);
    y_.push_back(s.outcome ? 1 : 0);
    (s.outcome ? positives_ : negatives_) += 1;
  }
}

double EfcObjective::value(double theta) const {
  double v = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    const double a = theta * x_[i];
    v += y_[i] ? -a : std::log(-std::expm1(-a));
  }
  return v;
}

double EfcObjective::derivative(double theta) const {
  double g = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    g += y_[i] ? -x_[i] : x_[i] / std::expm1(theta * x_[i]);
  }
  return g;
}

// --- IrtObjective -----------------------------------------------------------

IrtObjective::IrtObjective(std::span<const Sample> samples, ModelKind variant, double l2)
    : variant_(variant), l2_(l2) {
  const bool with_users = variant == ModelKind::kIrt0User || variant == ModelKind::kIrt1;
  const bool with_items = variant == ModelKind::kIrt0Item || variant == ModelKind::kIrt1;
  std::map<std::string, int> users;
  std::map<std::string, int> items;
  for (const auto& s : samples) {
    if (with_users) users.emplace(s.features.user_id, 0);
    if (with_items) items.emplace(s.features.item_id, 0);
  }
  int next = 0;
  for (auto& [id, idx] : users) {
    idx = next++;
    users_.push_back(id);
  }
  for (auto& [id, idx] : items) {
    idx = next++;
    items_.push_back(id);
  }
  user_index_.reserve(samples.size());
  item_index_.reserve(samples.size());
  for (const auto& s : samples) {
    user_index_.push_back(with_users ? users.at(s.features.user_id) : -1);
    item_index_.push_back(with_items ? items.at(s.features.item_id) : -1);
    y_.push_back(s.outcome ? 1 : 0);
  }
}

double IrtObjective::value_and_gradient(std::span<const double> x,
                                        std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  double v = 0.0;
  for (std::size_t r = 0; r < y_.size(); ++r) {
    double z = 0.0;
    if (user_index_[r] >= 0) z += x[user_index_[r]];
    if (item_index_[r] >= 0) z -= x[item_index_[r]];
    v += (y_[r] ? z : 0.0) - softplus(z);
    const double resid = (y_[r] ? 1.0 : 0.0) - logistic(z);
    if (user_index_[r] >= 0) grad[user_index_[r]] += resid;
    if (item_index_[r] >= 0) grad[item_index_[r]] -= resid;
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    v -= 0.5 * l2_ * x[k] * x[k];
    grad[k] -= l2_ * x[k];
  }
  return v;
}

// --- LogRegObjective --------------------------------------------------------

LogRegObjective::LogRegObjective(std::vector<double> rows, std::vector<char> y, double l2)
    : rows_(std::move(rows)), y_(std::move(y)), l2_(l2) {}

double LogRegObjective::value_and_gradient(std::span<const double> x,
                                           std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  double v = 0.0;
  for (std::size_t r = 0; r < y_.size(); ++r) {
    const double* row = rows_.data() + r * kLogRegFeatures;
    double z = x[0];
    for (std::size_t k = 0; k < kLogRegFeatures; ++k) z += x[k + 1] * row[k];
    v += (y_[r] ? z : 0.0) - softplus(z);
    const double resid = (y_[r] ? 1.0 : 0.0) - logistic(z);
    grad[0] += resid;
    for (std::size_t k = 0; k < kLogRegFeatures; ++k) grad[k + 1] += resid * row[k];
  }
  for (std::size_t k = 1; k < x.size(); ++k) {
    v -= 0.5 * l2_ * x[k] * x[k];
    grad[k] -= l2_ * x[k];
  }
  return v;
}

// --- Fitting ----------------------------------------------------------------

ThetaFit fit_efc_global(std::span<const Sample> train, StrengthMode strength,
                        DelayMode delay) {
  const ModelSpec spec{ModelKind::kEfc, DifficultyMode::kGlobal, strength, delay};
  if (spec.strength == StrengthMode::kConstant && delay == DelayMode::kWithoutDelay) {
    throw std::invalid_argument("constant strength without delay is not a model");
  }
  if (train.empty()) throw std::invalid_argument("empty training set");
  const EfcObjective objective(train, spec);
  ThetaFit fit;
  if (!objective.has_lapse()) {
    fit.theta = kThetaMin;
    fit.at_lower = true;
    return fit;
  }
  if (!objective.has_recall()) {
    fit.theta = kThetaMax;
    fit.at_upper = true;
    return fit;
  }
  const auto result = optim::golden_section_maximize(
      [&](double log_theta) { return objective.value(std::exp(log_theta)); },
      std::log(kThetaMin), std::log(kThetaMax), 1e-8);
  fit.theta = std::clamp(std::exp(result.x), kThetaMin, kThetaMax);
  fit.evaluations = result.evaluations;
  fit.at_lower = fit.theta <= kThetaMin * (1.0 + 1e-6);
  fit.at_upper = fit.theta >= kThetaMax * (1.0 - 1e-6);
  return fit;
}

PerItemFit fit_efc_per_item(std::span<const Sample> train, StrengthMode strength,
                            DelayMode delay) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  std::map<std::string, std::vector<Sample>> by_item;
  for (const auto& s : train) by_item[s.features.item_id].push_back(s);
  PerItemFit out;
  double total = 0.0;
  for (const auto& [item, samples] : by_item) {
    const ThetaFit fit = fit_efc_global(samples, strength, delay);
    out.items.emplace(item, fit);
    total += fit.theta;
  }
  out.fallback = total / static_cast<double>(by_item.size());
  return out;
}

MemoryModel fit_irt(std::span<const Sample> train, ModelKind variant, double l2,
                    const MemoryModel* warm_start) {
  if (variant != ModelKind::kIrt0User && variant != ModelKind::kIrt0Item &&
      variant != ModelKind::kIrt1) {
    throw std::invalid_argument("fit_irt needs an IRT variant");
  }
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
  if (variant == ModelKind::kIrt1 && l2 == 0.0) {
    throw std::invalid_argument("irt1 is unidentifiable without penalty (l2 > 0)");
  }
  const IrtObjective objective(train, variant, l2);
  std::vector<double> x0(objective.dimension(), 0.0);
  if (warm_start) {
    const std::size_t nu = objective.users().size();
    for (std::size_t j = 0; j < nu; ++j) {
      x0[j] = lookup_or(warm_start->user_ability, objective.users()[j], 0.0);
    }
    for (std::size_t i = 0; i < objective.items().size(); ++i) {
      x0[nu + i] = lookup_or(warm_start->item_difficulty, objective.items()[i], 0.0);
    }
  }
  const optim::AscentOptions options{1e-6, 10000, 8};
  const auto result = optim::lbfgs_maximize(
      [&](std::span<const double> x, std::span<double> g) {
        return objective.value_and_gradient(x, g);
      },
      std::move(x0), options);

  MemoryModel model;
  model.spec = model_from_row(variant == ModelKind::kIrt0User ? 1
                              : variant == ModelKind::kIrt0Item ? 2
                                                                 : 3);
  model.l2 = l2;
  const std::size_t nu = objective.users().size();
  double ability_sum = 0.0;
  double difficulty_sum = 0.0;
  for (std::size_t j = 0; j < nu; ++j) {
    model.user_ability.emplace(objective.users()[j], result.x[j]);
    ability_sum += result.x[j];
  }
  for (std::size_t i = 0; i < objective.items().size(); ++i) {
    model.item_difficulty.emplace(objective.items()[i], result.x[nu + i]);
    difficulty_sum += result.x[nu + i];
  }
  if (nu > 0) model.ability_fallback = ability_sum / static_cast<double>(nu);
  if (!objective.items().empty()) {
    model.difficulty_fallback = difficulty_sum / static_cast<double>(objective.items().size());
  }
  model.info.tolerance = options.grad_tol;
  model.info.iterations = result.iterations;
  if (!result.converged) {
    model.info.warnings.push_back("did not reach gradient tolerance (inf-norm " +
                                  std::to_string(result.grad_inf_norm) + ")");
  }
  return model;
}

MemoryModel fit_logreg(std::span<const Sample> train, double l2,
                       const MemoryModel* warm_start) {
  if (l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
  std::vector<std::array<double, kLogRegFeatures>> raw;
  std::vector<char> y;
  for (const auto& s : train) {
    if (!s.features.intervals || !s.features.outcomes) continue;
    raw.push_back(raw_features(s.features));
    y.push_back(s.outcome ? 1 : 0);
  }
  if (raw.empty()) throw std::invalid_argument("no training rows with history statistics");

  MemoryModel model;
  model.spec = model_from_row(4);
  model.l2 = l2;
  model.feature_mean.assign(kLogRegFeatures, 0.0);
  model.feature_scale.assign(kLogRegFeatures, 0.0);
  const double m = static_cast<double>(raw.size());
  for (std::size_t k = 0; k < kLogRegFeatures; ++k) {
    double mean = 0.0;
    for (const auto& r : raw) mean += r[k];
    mean /= m;
    double var = 0.0;
    for (const auto& r : raw) var += (r[k] - mean) * (r[k] - mean);
    const double sd = std::sqrt(var / m);
    model.feature_mean[k] = mean;
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      model.feature_scale[k] = sd;
    } else {
      model.info.warnings.push_back("feature " + std::string(kFeatureNames[k]) +
                                    " is constant; coefficient pinned to 0");
    }
  }
  std::vector<double> rows(raw.size() * kLogRegFeatures, 0.0);
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t k = 0; k < kLogRegFeatures; ++k) {
      if (model.feature_scale[k] > 0.0) {
        rows[r * kLogRegFeatures + k] = (raw[r][k] - model.feature_mean[k]) / model.feature_scale[k];
      }
    }
  }
  const LogRegObjective objective(std::move(rows), std::move(y), l2);
  std::vector<double> x0(objective.dimension(), 0.0);
  if (warm_start && warm_start->coefficients.size() == kLogRegFeatures) {
    x0[0] = warm_start->intercept;
    std::copy(warm_start->coefficients.begin(), warm_start->coefficients.end(), x0.begin() + 1);
  }
  const optim::AscentOptions options{1e-6, 10000, 8};
  const auto result = optim::lbfgs_maximize(
      [&](std::span<const double> x, std::span<double> g) {
        return objective.value_and_gradient(x, g);
      },
      std::move(x0), options);

  model.intercept = result.x[0];
  model.coefficients.assign(result.x.begin() + 1, result.x.end());
  for (std::size_t k = 0; k < kLogRegFeatures; ++k) {
    if (model.feature_scale[k] == 0.0) model.coefficients[k] = 0.0;
  }
  model.info.tolerance = options.grad_tol;
  model.info.iterations = result.iterations;
  if (!result.converged) {
    model.info.warnings.push_back("did not reach gradient tolerance (inf-norm " +
                                  std::to_string(result.grad_inf_norm) + ")");
  }
  return model;
}

MemoryModel fit_model(const ModelSpec& spec, std::span<const Sample> train, double l2,
                      TimeUnit unit) {
  MemoryModel model;
  switch (spec.kind) {
    case ModelKind::kIrt0User:
    case ModelKind::kIrt0Item:
    case ModelKind::kIrt1:
      model = fit_irt(train, spec.kind, l2);
      break;
    case ModelKind::kLogReg:
      model = fit_logreg(train, l2);
      break;
    case ModelKind::kEfc: {
      model.spec = spec;
      model.info.tolerance = 1e-8;
      if (spec.difficulty == DifficultyMode::kGlobal) {
        const ThetaFit fit = fit_efc_global(train, spec.strength, spec.delay);
        model.theta = fit.theta;
        model.info.iterations = fit.evaluations;
        model.info.boundary = fit.at_lower || fit.at_upper;
      } else {
        const PerItemFit fit = fit_efc_per_item(train, spec.strength, spec.delay);
        model.theta = fit.fallback;
        std::size_t boundary = 0;
        for (const auto& [item, t] : fit.items) {
          model.item_theta.emplace(item, t.theta);
          model.info.iterations += t.evaluations;
          boundary += (t.at_lower || t.at_upper) ? 1 : 0;
        }
        model.info.boundary = boundary > 0;
        if (boundary > 0) {
          model.info.warnings.push_back(std::to_string(boundary) +
                                        " item difficulties at a bound");
        }
      }
      break;
    }
  }
  model.time_unit = unit;
  return model;
}

nlohmann::json to_json(const MemoryModel& model) {
  using nlohmann::json;
  const ModelSpec& spec = model.spec;
  json j;
  j["kind"] = spec.name();
  j["row"] = spec.row();
  j["time_unit"] = to_string(model.time_unit);
  json params = json::object();
  json fallbacks = json::object();
  switch (spec.kind) {
    case ModelKind::kEfc:
      j["modes"] = {
          {"difficulty", spec.difficulty == DifficultyMode::kGlobal ? "global" : "per_item"},
          {"strength", spec.strength == StrengthMode::kConstant  ? "constant"
                       : spec.strength == StrengthMode::kReviews ? "n_reviews"
                                                                 : "leitner_q"},
          {"delay", spec.delay == DelayMode::kWithDelay ? "with_delay" : "without_delay"}};
      if (spec.difficulty == DifficultyMode::kGlobal) {
        params["theta"] = model.theta;
      } else {
        params["item_theta"] = model.item_theta;
        fallbacks["theta"] = model.theta;
      }
      break;
    case ModelKind::kIrt0User:
    case ModelKind::kIrt0Item:
    case ModelKind::kIrt1:
      j["modes"] = json::object();
      if (!model.user_ability.empty()) params["user_ability"] = model.user_ability;
      if (!model.item_difficulty.empty()) params["item_difficulty"] = model.item_difficulty;
      fallbacks["ability"] = model.ability_fallback;
      fallbacks["difficulty"] = model.difficulty_fallback;
      params["l2"] = model.l2;
      break;
    case ModelKind::kLogReg: {
      j["modes"] = json::object();
      params["intercept"] = model.intercept;
      json coef = json::object();
      for (std::size_t k = 0; k < kLogRegFeatures; ++k) {
        coef[std::string(kFeatureNames[k])] = {{"coefficient", model.coefficients[k]},
                                               {"mean", model.feature_mean[k]},
                                               {"scale", model.feature_scale[k]}};
      }
      params["features"] = coef;
      params["l2"] = model.l2;
      break;
    }
  }
  j["parameters"] = params;
  j["fallbacks"] = fallbacks;
  j["fit_metadata"] = {{"seed", model.info.seed},
                       {"tolerance", model.info.tolerance},
                       {"iterations", model.info.iterations},
                       {"boundary", model.info.boundary},
                       {"warnings", model.info.warnings}};
  return j;
}

}  // namespace leitnerq
