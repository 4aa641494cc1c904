#include "leitnerq/model_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "format.hpp"

#include "leitnerq/rng.hpp"

namespace leitnerq {

namespace {

using detail::format_double;

struct FoldData {
  std::vector<Sample> train;
  std::vector<Sample> validation;
};

// Fits a candidate, selecting l2 by validation log-likelihood when the model
// takes one. Returns the predictor and the chosen l2, and accumulates the
// per-l2 validation log-likelihood into `ll_by_l2`.
std::pair<Predictor, double> fit_candidate(const Candidate& c, std::span<const Sample> train,
                                           std::span<const Sample> validation,
                                           const EvalOptions& options,
                                           std::vector<double>* ll_by_l2,
                                           std::optional<double> fixed_l2) {
  if (!c.spec) return {c.fit(train), 0.0};
  const ModelSpec spec = *c.spec;
  std::vector<Sample> usable_train;
  usable_train.reserve(train.size());
  for (const auto& s : train) {
    if (usable(spec, s.features)) usable_train.push_back(s);
  }
  auto wrap = [](MemoryModel m) -> Predictor {
    return [m = std::move(m)](const FeatureVector& f) { return predict_recall(m, f); };
  };
  if (!uses_l2(spec)) return {wrap(fit_model(spec, usable_train, 0.0)), 0.0};
  if (fixed_l2) return {wrap(fit_model(spec, usable_train, *fixed_l2)), *fixed_l2};

  std::optional<MemoryModel> best;
  std::optional<MemoryModel> previous;
  double best_ll = -std::numeric_limits<double>::infinity();
  double best_l2 = options.l2_grid.front();
  // Warm-start from the most penalized fit downwards.
  std::vector<std::size_t> order(options.l2_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
  for (std::size_t g : order) {
    const double l2 = options.l2_grid[g];
    MemoryModel m = spec.kind == ModelKind::kLogReg
                        ? fit_logreg(usable_train, l2, previous ? &*previous : nullptr)
                        : fit_irt(usable_train, spec.kind, l2, previous ? &*previous : nullptr);
    const double ll = log_likelihood(m, validation);
    if (ll_by_l2) (*ll_by_l2)[g] += ll;
    if (ll > best_ll || !best) {
      best_ll = ll;
      best_l2 = l2;
      best = m;
    }
    previous = std::move(m);
  }
  return {wrap(std::move(*best)), best_l2};
}

void score(const Predictor& predict, std::span<const Sample> points,
           std::optional<double>& overall, std::array<std::optional<double>, kDeckBins>& bins) {
  std::vector<ScoredOutcome> all;
  std::array<std::vector<ScoredOutcome>, kDeckBins> by_bin;
  for (const auto& s : points) {
    const ScoredOutcome so{predict(s.features), s.outcome};
    all.push_back(so);
    by_bin[deck_bin(s.features.q)].push_back(so);
  }
  auto safe_auc = [](std::span<const ScoredOutcome> pts) -> std::optional<double> {
    const bool has_pos = std::any_of(pts.begin(), pts.end(), [](auto& p) { return p.label; });
    const bool has_neg = std::any_of(pts.begin(), pts.end(), [](auto& p) { return !p.label; });
    if (!has_pos || !has_neg) return std::nullopt;
    return auc(pts);
  };
  overall = safe_auc(all);
  for (std::size_t b = 0; b < kDeckBins; ++b) bins[b] = safe_auc(by_bin[b]);
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json summary_json(const AucSummary& s) {
  return {{"mean", opt_json(s.mean)}, {"stderr", opt_json(s.stderr_)}, {"folds", s.folds}};
}

}  // namespace

FoldPlan make_fold_plan(std::span<const InteractionHistory> histories, int fold_count,
                        double test_frac, double trunc_frac, std::uint64_t seed) {
  if (fold_count < 1) throw std::invalid_argument("fold_count must be positive");
  if (!(test_frac >= 0.0 && test_frac < 1.0)) throw std::invalid_argument("test_frac in [0,1)");
  if (!(trunc_frac > 0.0 && trunc_frac <= 1.0)) throw std::invalid_argument("trunc_frac in (0,1]");
  for (const auto& h : histories) {
    if (h.interactions.size() < 2) {
      throw std::invalid_argument("every history needs at least 2 interactions");
    }
  }
  FoldPlan plan;
  plan.fold_count = fold_count;
  plan.test_frac = test_frac;
  plan.trunc_frac = trunc_frac;
  plan.seed = seed;

  Rng rng(derive_seed(seed, 0x666f6c64));
  std::vector<std::size_t> order(histories.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));

  const auto n_test = static_cast<std::size_t>(
      std::llround(test_frac * static_cast<double>(histories.size())));
  plan.test_pairs.assign(order.begin(), order.begin() + n_test);
  plan.fold_pairs.assign(order.begin() + n_test, order.end());
  const std::size_t m = plan.fold_pairs.size();
  if (m < static_cast<std::size_t>(fold_count)) {
    throw std::invalid_argument("fewer pairs (" + std::to_string(m) + ") than folds (" +
                                std::to_string(fold_count) + ")");
  }

  plan.truncation.assign(histories.size(), 0);
  for (std::size_t i = 0; i < histories.size(); ++i) {
    const std::size_t len = histories[i].interactions.size();
    plan.truncation[i] = 1 + rng.below(len - 1);
  }

  // Fold f truncates the block starting at floor(f*m/F); with
  // trunc_frac * F == 1 the blocks partition the non-test pairs.
  plan.truncated.resize(fold_count);
  const double md = static_cast<double>(m);
  for (int f = 0; f < fold_count; ++f) {
    const auto start = static_cast<std::size_t>(std::floor(f * md / fold_count));
    const auto end = static_cast<std::size_t>(
        std::floor(f * md / fold_count + trunc_frac * md + 1e-9));
    for (std::size_t k = start; k < std::max(end, start + 1); ++k) {
      plan.truncated[f].push_back(plan.fold_pairs[k % m]);
    }
  }
  return plan;
}

double auc(std::span<const ScoredOutcome> points) {
  std::vector<ScoredOutcome> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score < b.score; });
  double pos = 0.0;
  double neg = 0.0;
  double rank_sum = 0.0;  // sum of mid-ranks of positives
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double group_pos = 0.0;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) {
      group_pos += sorted[j].label ? 1.0 : 0.0;
      ++j;
    }
    const double mid_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    rank_sum += group_pos * mid_rank;
    pos += group_pos;
    neg += static_cast<double>(j - i) - group_pos;
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) {
    throw std::invalid_argument("AUC is undefined without both classes");
  }
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("size mismatch");
  std::vector<ScoredOutcome> pts(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pts[i] = {scores[i], labels[i]};
  return auc(pts);
}

std::size_t deck_bin(int q) {
  return static_cast<std::size_t>(std::clamp(q, 1, static_cast<int>(kDeckBins)) - 1);
}

std::string deck_bin_label(std::size_t bin) {
  return bin + 1 < kDeckBins ? "q" + std::to_string(bin + 1)
                             : "q" + std::to_string(kDeckBins) + "+";
}

Candidate Candidate::of(const ModelSpec& spec) { return {spec.name(), spec, {}}; }

AucSummary summarize_aucs(std::span<const std::optional<double>> values) {
  AucSummary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.folds;
    }
  }
  if (s.folds == 0) return s;
  const double mean = sum / static_cast<double>(s.folds);
  s.mean = mean;
  if (s.folds > 1) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - mean) * (*v - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(s.folds - 1));
    s.stderr_ = sd / std::sqrt(static_cast<double>(s.folds));
  }
  return s;
}

EvalReport evaluate_candidates(std::span<const InteractionHistory> histories,
                               std::span<const Candidate> candidates, const FoldPlan& plan,
                               const EvalOptions& options) {
  if (plan.truncation.size() != histories.size()) {
    throw std::invalid_argument("fold plan was built over different histories");
  }
  if (options.l2_grid.empty()) throw std::invalid_argument("empty l2 grid");

  std::vector<std::vector<Sample>> samples(histories.size());
  for (std::size_t h = 0; h < histories.size(); ++h) {
    samples[h] = samples_of(histories[h], 0, histories[h].interactions.size());
  }

  const auto folds = static_cast<std::size_t>(plan.fold_count);
  EvalReport report;
  report.fold_count = plan.fold_count;
  report.seed = plan.seed;
  report.models.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& m = report.models[c];
    m.name = candidates[c].name;
    m.spec = candidates[c].spec;
    m.fold_auc.resize(folds);
    m.fold_bin_auc.resize(folds);
    m.fold_l2.assign(folds, 0.0);
  }
  // Summed validation log-likelihood per (candidate, l2), for the final fit.
  std::vector<std::vector<std::vector<double>>> ll(
      folds, std::vector<std::vector<double>>(candidates.size(),
                                              std::vector<double>(options.l2_grid.size(), 0.0)));

  auto run_fold = [&](std::size_t f) {
    std::vector<char> truncated(histories.size(), 0);
    for (std::size_t h : plan.truncated[f]) truncated[h] = 1;
    FoldData data;
    for (std::size_t h : plan.fold_pairs) {
      const std::size_t end = truncated[h] ? plan.truncation[h] : samples[h].size();
      data.train.insert(data.train.end(), samples[h].begin(), samples[h].begin() + end);
      if (truncated[h]) data.validation.push_back(samples[h][plan.truncation[h]]);
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      auto [predict, l2] =
          fit_candidate(candidates[c], data.train, data.validation, options, &ll[f][c], {});
      auto& m = report.models[c];
      m.fold_l2[f] = l2;
      score(predict, data.validation, m.fold_auc[f], m.fold_bin_auc[f]);
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, folds));
  if (threads == 1) {
    for (std::size_t f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t f = t; f < folds; f += threads) run_fold(f);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Final fit on all non-test data plus test prefixes; score test points.
  FoldData final_data;
  for (std::size_t h : plan.fold_pairs) {
    final_data.train.insert(final_data.train.end(), samples[h].begin(), samples[h].end());
  }
  for (std::size_t h : plan.test_pairs) {
    final_data.train.insert(final_data.train.end(), samples[h].begin(),
                            samples[h].begin() + plan.truncation[h]);
    final_data.validation.push_back(samples[h][plan.truncation[h]]);
  }
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    auto& m = report.models[c];
    std::optional<double> chosen;
    if (candidates[c].spec && uses_l2(*candidates[c].spec)) {
      std::size_t best = 0;
      double best_ll = -std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < options.l2_grid.size(); ++g) {
        double total = 0.0;
        for (std::size_t f = 0; f < folds; ++f) total += ll[f][c][g];
        if (total > best_ll) {
          best_ll = total;
          best = g;
        }
      }
      chosen = options.l2_grid[best];
    }
    if (!final_data.validation.empty()) {
      auto [predict, l2] = fit_candidate(candidates[c], final_data.train, final_data.validation,
                                         options, nullptr, chosen);
      m.test_l2 = l2;
      score(predict, final_data.validation, m.test_auc, m.test_bin_auc);
    }
    m.validation = summarize_aucs(m.fold_auc);
    for (std::size_t b = 0; b < kDeckBins; ++b) {
      std::vector<std::optional<double>> col(folds);
      for (std::size_t f = 0; f < folds; ++f) col[f] = m.fold_bin_auc[f][b];
      m.bins[b] = summarize_aucs(col);
    }
  }
  return report;
}

EvalReport evaluate_models(std::span<const InteractionHistory> histories,
                           std::span<const ModelSpec> models, const FoldPlan& plan,
                           const EvalOptions& options) {
  std::vector<Candidate> candidates;
  candidates.reserve(models.size());
  for (const auto& spec : models) candidates.push_back(Candidate::of(spec));
  return evaluate_candidates(histories, candidates, plan, options);
}

std::string to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "model,fold,bin,auc\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("NA");
  };
  for (const auto& m : report.models) {
    for (std::size_t f = 0; f < m.fold_auc.size(); ++f) {
      os << m.name << ',' << f << ",all," << cell(m.fold_auc[f]) << '\n';
      for (std::size_t b = 0; b < kDeckBins; ++b) {
        os << m.name << ',' << f << ',' << deck_bin_label(b) << ','
           << cell(m.fold_bin_auc[f][b]) << '\n';
      }
    }
    os << m.name << ",test,all," << cell(m.test_auc) << '\n';
    for (std::size_t b = 0; b < kDeckBins; ++b) {
      os << m.name << ",test," << deck_bin_label(b) << ',' << cell(m.test_bin_auc[b]) << '\n';
    }
  }
  return os.str();
}

nlohmann::json to_json(const EvalReport& report) {
  using nlohmann::json;
  json models = json::array();
  for (const auto& m : report.models) {
    json folds = json::array();
    for (std::size_t f = 0; f < m.fold_auc.size(); ++f) {
      json bins = json::object();
      for (std::size_t b = 0; b < kDeckBins; ++b) {
        bins[deck_bin_label(b)] = opt_json(m.fold_bin_auc[f][b]);
      }
      folds.push_back({{"auc", opt_json(m.fold_auc[f])}, {"bins", bins}, {"l2", m.fold_l2[f]}});
    }
    json bin_summary = json::object();
    json test_bins = json::object();
    for (std::size_t b = 0; b < kDeckBins; ++b) {
      bin_summary[deck_bin_label(b)] = summary_json(m.bins[b]);
      test_bins[deck_bin_label(b)] = opt_json(m.test_bin_auc[b]);
    }
    json entry = {{"model", m.name},
                  {"folds", folds},
                  {"validation", summary_json(m.validation)},
                  {"validation_bins", bin_summary},
                  {"test", {{"auc", opt_json(m.test_auc)}, {"bins", test_bins}, {"l2", m.test_l2}}}};
    if (m.spec) entry["row"] = m.spec->row();
    models.push_back(std::move(entry));
  }
  return {{"fold_count", report.fold_count}, {"seed", report.seed}, {"models", models}};
}

}  // namespace leitnerq
