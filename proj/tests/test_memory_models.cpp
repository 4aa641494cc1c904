#include <cmath>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "leitnerq/memory_models.hpp"
#include "leitnerq/rng.hpp"

using namespace leitnerq;

namespace {

FeatureVector fv(std::optional<double> d, int q, int n = 1, std::string user = "u",
                 std::string item = "i") {
  FeatureVector f;
  f.user_id = std::move(user);
  f.item_id = std::move(item);
  f.delay = d;
  f.q = q;
  f.n = n;
  return f;
}

MemoryModel efc_model(double theta, StrengthMode s, DelayMode d = DelayMode::kWithDelay) {
  MemoryModel m;
  m.spec = {ModelKind::kEfc, DifficultyMode::kGlobal, s, d};
  m.theta = theta;
  return m;
}

// Samples from exp(-theta * d / q) with log-uniform delays.
std::vector<Sample> efc_samples(double theta, std::size_t count, std::uint64_t seed,
                                std::string item = "i") {
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double d = std::exp(std::log(1.0) + std::log(1000.0) * rng.uniform());
    const int q = 1 + static_cast<int>(rng.below(6));
    Sample s{fv(d, q, q, "u" + std::to_string(i % 20), item), false};
    s.outcome = rng.bernoulli(std::exp(-theta * d / q));
    out.push_back(std::move(s));
  }
  return out;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

}  // namespace

TEST(ModelSpec, FourteenDistinctRows) {
  std::set<std::string> names;
  for (int r = 1; r <= 14; ++r) {
    const auto spec = model_from_row(r);
    EXPECT_EQ(spec.row(), r);
    names.insert(spec.name());
    EXPECT_EQ(parse_model(std::to_string(r)), spec);
    EXPECT_EQ(parse_model(spec.name()), spec);
  }
  EXPECT_EQ(names.size(), 14u);
}

TEST(ModelSpec, UnknownNameListsAll) {
  try {
    parse_model("sm2");
    FAIL();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    for (int r = 1; r <= 14; ++r) {
      EXPECT_NE(msg.find(model_from_row(r).name()), std::string::npos);
    }
  }
  EXPECT_THROW(parse_model("15"), std::invalid_argument);
  EXPECT_THROW(parse_model("0"), std::invalid_argument);
}

TEST(ModelSpec, EfcRowMapping) {
  EXPECT_EQ(model_from_row(8).strength, StrengthMode::kLeitner);
  EXPECT_EQ(model_from_row(8).delay, DelayMode::kWithDelay);
  EXPECT_EQ(model_from_row(9).delay, DelayMode::kWithoutDelay);
  EXPECT_EQ(model_from_row(6).strength, StrengthMode::kConstant);
  EXPECT_EQ(model_from_row(13).difficulty, DifficultyMode::kPerItem);
  EXPECT_EQ(model_from_row(3).kind, ModelKind::kIrt1);
}

TEST(PredictRecall, ZeroDelayIsCertain) {
  EXPECT_DOUBLE_EQ(predict_recall(efc_model(0.0077, StrengthMode::kLeitner), fv(0.0, 3)), 1.0);
}

TEST(PredictRecall, UnitCase) {
  EXPECT_NEAR(predict_recall(efc_model(1.0, StrengthMode::kLeitner), fv(1.0, 1)),
              0.36787944117144233, 1e-15);
}

TEST(PredictRecall, NinetyDaysDeckTwo) {
  EXPECT_NEAR(predict_recall(efc_model(0.0077, StrengthMode::kLeitner), fv(90.0, 2)),
              std::exp(-0.3465), 1e-12);
  EXPECT_NEAR(predict_recall(efc_model(0.0077, StrengthMode::kLeitner), fv(90.0, 2)), 0.70716,
              1e-5);
}

TEST(PredictRecall, StrengthAndDelayVariants) {
  const auto f = fv(4.0, 2, 5);
  EXPECT_NEAR(predict_recall(efc_model(0.1, StrengthMode::kConstant), f), std::exp(-0.4), 1e-15);
  EXPECT_NEAR(predict_recall(efc_model(0.1, StrengthMode::kReviews), f), std::exp(-0.08), 1e-15);
  EXPECT_NEAR(predict_recall(efc_model(0.1, StrengthMode::kReviews, DelayMode::kWithoutDelay), f),
              std::exp(-0.02), 1e-15);
  EXPECT_NEAR(predict_recall(efc_model(0.1, StrengthMode::kLeitner, DelayMode::kWithoutDelay), f),
              std::exp(-0.05), 1e-15);
}

TEST(PredictRecall, Monotonicity) {
  const auto m = efc_model(0.05, StrengthMode::kLeitner);
  double prev = 2.0;
  for (double d : {0.1, 1.0, 5.0, 20.0, 100.0}) {
    const double p = predict_recall(m, fv(d, 2));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, prev);
    prev = p;
  }
  EXPECT_GT(predict_recall(efc_model(0.01, StrengthMode::kLeitner), fv(3.0, 2)),
            predict_recall(efc_model(0.02, StrengthMode::kLeitner), fv(3.0, 2)));
  EXPECT_LE(predict_recall(m, fv(3.0, 2)), predict_recall(m, fv(3.0, 3)));
  EXPECT_NEAR(predict_recall(efc_model(kThetaMin, StrengthMode::kLeitner), fv(10.0, 1)), 1.0,
              1e-4);
}

TEST(PredictRecall, IrtVariantsAndFallback) {
  MemoryModel m;
  m.spec = model_from_row(3);
  m.user_ability = {{"a", 1.0}};
  m.item_difficulty = {{"x", 0.5}};
  m.ability_fallback = 0.2;
  m.difficulty_fallback = -0.3;
  EXPECT_NEAR(predict_recall(m, fv(1.0, 1, 1, "a", "x")), logistic(0.5), 1e-15);
  EXPECT_NEAR(predict_recall(m, fv(1.0, 1, 1, "new", "other")), logistic(0.5), 1e-15);
  m.spec = model_from_row(2);
  EXPECT_NEAR(predict_recall(m, fv(1.0, 1, 1, "a", "x")), logistic(-0.5), 1e-15);
  m.spec = model_from_row(1);
  EXPECT_NEAR(predict_recall(m, fv(1.0, 1, 1, "zz", "x")), logistic(0.2), 1e-15);
}

TEST(Features, PrefixOnly) {
  InteractionHistory h{"u", "i", {}};
  h.interactions = {{0, true, std::nullopt, 1, 1}, {1, false, 2.0, 2, 2}, {2, true, 4.0, 3, 1}};
  const auto f0 = features_at(h, 0);
  EXPECT_FALSE(f0.intervals.has_value());
  EXPECT_FALSE(f0.outcomes.has_value());
  const auto f2 = features_at(h, 2);
  ASSERT_TRUE(f2.intervals && f2.outcomes);
  EXPECT_DOUBLE_EQ(f2.intervals->mean, 3.0);
  EXPECT_DOUBLE_EQ(f2.intervals->last, 4.0);
  EXPECT_DOUBLE_EQ(f2.outcomes->mean, 0.5);  // outcomes of reviews 0 and 1 only
  EXPECT_DOUBLE_EQ(f2.outcomes->length, 2.0);
  EXPECT_DOUBLE_EQ(f2.outcomes->first, 1.0);
  EXPECT_DOUBLE_EQ(f2.outcomes->last, 0.0);
}

TEST(HistoryStats, Values) {
  const double v[] = {3.0, 1.0, 4.0, 1.0};
  const auto s = HistoryStats::of(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.25);
  EXPECT_DOUBLE_EQ(s.median, 2.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_DOUBLE_EQ(s.range, 3.0);
  EXPECT_DOUBLE_EQ(s.length, 4.0);
  EXPECT_DOUBLE_EQ(s.first, 3.0);
  EXPECT_DOUBLE_EQ(s.last, 1.0);
}

TEST(FitEfcGlobal, RecoversTheta) {
  const auto train = efc_samples(0.01, 100000, 11);
  const auto fit = fit_efc_global(train, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_NEAR(fit.theta, 0.01, 0.0005);
  EXPECT_FALSE(fit.at_lower || fit.at_upper);
}

TEST(FitEfcGlobal, MatchesDerivativeRoot) {
  const auto train = efc_samples(0.02, 5000, 12);
  const ModelSpec spec = model_from_row(8);
  const auto fit = fit_efc_global(train, spec.strength, spec.delay);
  // Independent oracle: bisection on the sign of the score function.
  const EfcObjective obj(train, spec);
  double lo = 1e-6, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (obj.derivative(mid) > 0 ? lo : hi) = mid;
  }
  EXPECT_LT(rel_err(fit.theta, lo), 1e-6);
}

TEST(FitEfcGlobal, BoundarySolutions) {
  std::vector<Sample> pass = {{fv(1.0, 1), true}};
  std::vector<Sample> fail = {{fv(1.0, 1), false}};
  const auto lo = fit_efc_global(pass, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_DOUBLE_EQ(lo.theta, kThetaMin);
  EXPECT_TRUE(lo.at_lower);
  const auto hi = fit_efc_global(fail, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_DOUBLE_EQ(hi.theta, kThetaMax);
  EXPECT_TRUE(hi.at_upper);
}

TEST(FitEfcGlobal, LikelihoodIsLocalMax) {
  const auto train = efc_samples(0.05, 3000, 13);
  const ModelSpec spec = model_from_row(5);
  const MemoryModel m = fit_model(spec, train, 0.0);
  const double best = log_likelihood(m, train);
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    MemoryModel p = m;
    p.theta *= std::exp(0.2 * (rng.uniform() - 0.5));
    EXPECT_LE(log_likelihood(p, train), best + 1e-9);
  }
}

TEST(FitEfcPerItem, SymmetryAndRecovery) {
  auto a = efc_samples(0.005, 10000, 21, "A");
  auto b = efc_samples(0.05, 10000, 22, "B");
  std::vector<Sample> train = a;
  train.insert(train.end(), b.begin(), b.end());
  const auto fit = fit_efc_per_item(train, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_NEAR(fit.items.at("A").theta, 0.005, 0.0005);
  EXPECT_NEAR(fit.items.at("B").theta, 0.05, 0.005);
  EXPECT_DOUBLE_EQ(fit.fallback, 0.5 * (fit.items.at("A").theta + fit.items.at("B").theta));

  auto c = a;
  for (auto& s : c) s.features.item_id = "C";
  std::vector<Sample> twins = a;
  twins.insert(twins.end(), c.begin(), c.end());
  const auto tw = fit_efc_per_item(twins, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_DOUBLE_EQ(tw.items.at("A").theta, tw.items.at("C").theta);
}

TEST(FitEfcPerItem, AllRecallItemAtLowerBound) {
  std::vector<Sample> train = {{fv(1.0, 1, 1, "u", "easy"), true},
                               {fv(2.0, 1, 1, "u", "easy"), true},
                               {fv(1.0, 1, 1, "u", "hard"), false},
                               {fv(1.0, 1, 1, "u", "hard"), true}};
  const auto fit = fit_efc_per_item(train, StrengthMode::kLeitner, DelayMode::kWithDelay);
  EXPECT_DOUBLE_EQ(fit.items.at("easy").theta, kThetaMin);
  MemoryModel m = fit_model(model_from_row(13), train, 0.0);
  EXPECT_DOUBLE_EQ(predict_recall(m, fv(1.0, 1, 1, "u", "unseen")),
                   std::exp(-m.theta * 1.0));
}

TEST(FitIrt, OneUserHalfRecall) {
  std::vector<Sample> train;
  for (int i = 0; i < 10; ++i) train.push_back({fv(1.0, 1, 1, "a", "x" + std::to_string(i)), i % 2 == 0});
  const auto m = fit_irt(train, ModelKind::kIrt0User, 0.0);
  EXPECT_NEAR(m.user_ability.at("a"), 0.0, 1e-6);
}

TEST(FitIrt, OneUserThreeQuarters) {
  std::vector<Sample> train;
  for (int i = 0; i < 12; ++i) train.push_back({fv(1.0, 1, 1, "a", "x"), i % 4 != 0});
  const auto m = fit_irt(train, ModelKind::kIrt0User, 0.0);
  EXPECT_NEAR(m.user_ability.at("a"), std::log(3.0), 1e-6);
}

TEST(FitIrt, Irt1NeedsPenalty) {
  std::vector<Sample> train = {{fv(1.0, 1), true}};
  try {
    fit_irt(train, ModelKind::kIrt1, 0.0);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("unidentifiable without penalty"), std::string::npos);
  }
}

TEST(FitIrt, Irt1RecoversDifferences) {
  Rng rng(31);
  std::vector<double> ability(40), difficulty(25);
  for (auto& a : ability) a = rng.normal();
  for (auto& b : difficulty) b = rng.normal();
  std::vector<Sample> train;
  for (int r = 0; r < 10000; ++r) {
    const auto j = rng.below(ability.size());
    const auto i = rng.below(difficulty.size());
    Sample s{fv(1.0, 1, 1, "u" + std::to_string(j), "i" + std::to_string(i)), false};
    s.outcome = rng.bernoulli(logistic(ability[j] - difficulty[i]));
    train.push_back(std::move(s));
  }
  const auto m = fit_irt(train, ModelKind::kIrt1, 0.01);
  std::vector<double> truth, est;
  for (std::size_t j = 0; j < ability.size(); ++j) {
    for (std::size_t i = 0; i < difficulty.size(); ++i) {
      truth.push_back(ability[j] - difficulty[i]);
      est.push_back(m.user_ability.at("u" + std::to_string(j)) -
                    m.item_difficulty.at("i" + std::to_string(i)));
    }
  }
  const double n = static_cast<double>(truth.size());
  double mt = 0, me = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    mt += truth[k] / n;
    me += est[k] / n;
  }
  double stt = 0, see = 0, ste = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    stt += (truth[k] - mt) * (truth[k] - mt);
    see += (est[k] - me) * (est[k] - me);
    ste += (truth[k] - mt) * (est[k] - me);
  }
  EXPECT_GT(ste / std::sqrt(stt * see), 0.95);
}

TEST(FitIrt, PenalizedObjectiveIsLocalMax) {
  Rng rng(32);
  std::vector<Sample> train;
  for (int r = 0; r < 600; ++r) {
    Sample s{fv(1.0, 1, 1, "u" + std::to_string(rng.below(8)), "i" + std::to_string(rng.below(6))),
             rng.bernoulli(0.6)};
    train.push_back(std::move(s));
  }
  const double l2 = 0.5;
  const auto m = fit_irt(train, ModelKind::kIrt1, l2);
  const IrtObjective obj(train, ModelKind::kIrt1, l2);
  std::vector<double> x;
  for (const auto& u : obj.users()) x.push_back(m.user_ability.at(u));
  for (const auto& i : obj.items()) x.push_back(m.item_difficulty.at(i));
  std::vector<double> g(x.size());
  const double best = obj.value_and_gradient(x, g);
  for (int t = 0; t < 100; ++t) {
    auto y = x;
    for (auto& v : y) v += 0.05 * rng.normal();
    EXPECT_LE(obj.value_and_gradient(y, g), best + 1e-9);
  }
}

TEST(FitLogReg, SeparableStaysFinite) {
  std::vector<Sample> train;
  for (int i = 0; i < 40; ++i) {
    FeatureVector f = fv(1.0, 1);
    const double d = i < 20 ? 1.0 : 10.0;
    const double ints[] = {d, d};
    const double outs[] = {1.0};
    f.intervals = HistoryStats::of(ints);
    f.outcomes = HistoryStats::of(outs);
    train.push_back({f, i < 20});
  }
  const auto m = fit_logreg(train, 1.0);
  for (double c : m.coefficients) EXPECT_TRUE(std::isfinite(c));
  EXPECT_TRUE(std::isfinite(m.intercept));
  EXPECT_FALSE(m.info.warnings.empty());  // constant outcome features
}

TEST(FitLogReg, ConstantFeaturesGiveEmpiricalRate) {
  std::vector<Sample> train;
  for (int i = 0; i < 40; ++i) {
    FeatureVector f = fv(2.0, 1);
    const double ints[] = {2.0};
    const double outs[] = {1.0, 0.0};
    f.intervals = HistoryStats::of(ints);
    f.outcomes = HistoryStats::of(outs);
    train.push_back({f, i % 4 == 0});
  }
  const auto m = fit_logreg(train, 1.0);
  EXPECT_NEAR(predict_recall(m, train[0].features), 0.25, 1e-6);
  for (double c : m.coefficients) EXPECT_EQ(c, 0.0);
  EXPECT_EQ(m.info.warnings.size(), kLogRegFeatures);
}

TEST(FitLogReg, RecoversSignPattern) {
  // Recall rises with the mean past outcome and falls with the last interval.
  Rng rng(41);
  std::vector<Sample> train;
  for (int r = 0; r < 10000; ++r) {
    const int len = 2 + static_cast<int>(rng.below(6));
    std::vector<double> ints, outs;
    for (int k = 0; k < len; ++k) ints.push_back(0.5 + 10.0 * rng.uniform());
    for (int k = 0; k + 1 < len; ++k) outs.push_back(rng.bernoulli(0.6) ? 1.0 : 0.0);
    FeatureVector f = fv(ints.back(), 1);
    f.intervals = HistoryStats::of(ints);
    f.outcomes = HistoryStats::of(outs);
    const double z = 2.0 * (f.outcomes->mean - 0.6) / 0.3 - 1.5 * (ints.back() - 5.5) / 2.9;
    train.push_back({f, rng.bernoulli(logistic(z))});
  }
  const auto m = fit_logreg(train, 0.01);
  EXPECT_GT(m.coefficients[8], 0.5);   // outcome_mean
  EXPECT_LT(m.coefficients[7], -0.5);  // interval_last
}

TEST(GradientCheck, EfcDerivative) {
  const auto train = efc_samples(0.03, 2000, 51);
  Rng rng(52);
  for (int spec_row : {5, 6, 7, 8, 9}) {
    const EfcObjective obj(train, model_from_row(spec_row));
    for (int t = 0; t < 20; ++t) {
      const double theta = std::exp(std::log(1e-3) + std::log(100.0) * rng.uniform());
      const double h = 1e-5 * theta;
      const double fd = (obj.value(theta + h) - obj.value(theta - h)) / (2 * h);
      EXPECT_LT(rel_err(obj.derivative(theta), fd), 1e-5) << "row " << spec_row;
    }
  }
}

TEST(GradientCheck, IrtAllVariants) {
  Rng rng(61);
  std::vector<Sample> train;
  for (int r = 0; r < 300; ++r) {
    train.push_back({fv(1.0, 1, 1, "u" + std::to_string(rng.below(5)),
                        "i" + std::to_string(rng.below(4))),
                     rng.bernoulli(0.5)});
  }
  for (auto variant : {ModelKind::kIrt0User, ModelKind::kIrt0Item, ModelKind::kIrt1}) {
    const IrtObjective obj(train, variant, 0.3);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(obj.dimension());
      for (auto& v : x) v = rng.normal();
      std::vector<double> g(x.size()), scratch(x.size());
      obj.value_and_gradient(x, g);
      for (std::size_t k = 0; k < x.size(); ++k) {
        auto xp = x, xm = x;
        const double h = 1e-5;
        xp[k] += h;
        xm[k] -= h;
        const double fd =
            (obj.value_and_gradient(xp, scratch) - obj.value_and_gradient(xm, scratch)) / (2 * h);
        EXPECT_LT(std::abs(g[k] - fd), 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(GradientCheck, LogReg) {
  Rng rng(71);
  const std::size_t rows = 200;
  std::vector<double> x_rows(rows * kLogRegFeatures);
  std::vector<char> y(rows);
  for (auto& v : x_rows) v = rng.normal();
  for (auto& v : y) v = rng.bernoulli(0.4) ? 1 : 0;
  const LogRegObjective obj(x_rows, y, 0.7);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(obj.dimension());
    for (auto& v : x) v = 0.3 * rng.normal();
    std::vector<double> g(x.size()), scratch(x.size());
    obj.value_and_gradient(x, g);
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto xp = x, xm = x;
      const double h = 1e-5;
      xp[k] += h;
      xm[k] -= h;
      const double fd =
          (obj.value_and_gradient(xp, scratch) - obj.value_and_gradient(xm, scratch)) / (2 * h);
      EXPECT_LT(std::abs(g[k] - fd), 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(ModelJson, HasRequiredFields) {
  const auto train = efc_samples(0.02, 500, 81);
  const auto j = to_json(fit_model(model_from_row(8), train, 0.0, TimeUnit::kSeconds));
  EXPECT_EQ(j.at("kind"), "efc-q");
  EXPECT_EQ(j.at("time_unit"), "seconds");
  EXPECT_TRUE(j.at("parameters").contains("theta"));
  EXPECT_TRUE(j.at("fit_metadata").contains("iterations"));
  EXPECT_TRUE(j.contains("fallbacks"));
  EXPECT_TRUE(j.contains("modes"));
}
