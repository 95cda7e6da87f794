#include <cmath>

#include <gtest/gtest.h>

#include "dde/fit_io.hpp"
#include "dde/training.hpp"
#include "support/synthetic.hpp"

namespace {

using namespace dde;
using dde::testing::SyntheticSpec;
using dde::testing::sird_params;
using dde::testing::synthetic_series;

ObservedSeries constant_sird(int days = 60) {
  SyntheticSpec spec;
  spec.params = sird_params(0.3, 0.05, 0.01, 1e6);
  spec.days = days;
  return synthetic_series(spec);
}

TrainingConfig quick(Method m, int iterations) {
  TrainingConfig cfg;
  cfg.method = m;
  cfg.iterations = iterations;
  cfg.hidden = {8, 8};
  return cfg;
}

TEST(Method, Parse) {
  EXPECT_EQ(parse_method("dde"), Method::DDE);
  EXPECT_EQ(parse_method("const-grad"), Method::ConstGrad);
  EXPECT_EQ(parse_method("nelder-mead"), Method::NelderMead);
  EXPECT_THROW(parse_method("bfgs"), ConfigError);
}

TEST(TrainingConfig, Defaults) {
  TrainingConfig cfg;
  EXPECT_EQ(cfg.iterations, 5000);
  EXPECT_EQ(cfg.learning_rate, 1e-3);
  EXPECT_EQ(cfg.decay_factor, 0.95);
  EXPECT_EQ(cfg.decay_every, 400);
  EXPECT_EQ(cfg.test_days, 20u);
  auto p = cfg.initial.for_variant(Variant::SEMCRD, 100);
  EXPECT_EQ(p.get(Rate::Gamma), 0.15);
  EXPECT_EQ(p.get(Rate::Alpha), 0.15);
  EXPECT_EQ(p.get(Rate::Delta1), 0.07);
  EXPECT_EQ(p.get(Rate::Delta2), 0.03);
  EXPECT_EQ(p.get(Rate::Epsilon), 0.03);
  EXPECT_EQ(cfg.initial.for_variant(Variant::SIRD, 100).get(Rate::Delta), 0.07);
}

TEST(TrainingConfig, Validation) {
  TrainingConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.integrator.scheme = Scheme::RK4;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.method = Method::NelderMead;
  EXPECT_NO_THROW(cfg.validate());
}

TEST(TrainDde, LossDecreasesAndCurveHasOneEntryPerIteration) {
  auto r = train_dde(constant_sird(), quick(Method::DDE, 300));
  ASSERT_EQ(r.loss_curve.size(), 300u);
  EXPECT_LT(r.final_loss, r.loss_curve.front());
  EXPECT_EQ(r.final_loss, r.loss_curve[r.best_iteration]);
  EXPECT_FALSE(r.diverged);
  ASSERT_TRUE(r.model.network.has_value());
  EXPECT_EQ(r.train_days, 40u);
  EXPECT_EQ(r.test_days, 20u);
  EXPECT_EQ(r.trajectory.states.size(), 60u);
  ASSERT_TRUE(r.metrics.has_value());
  EXPECT_EQ(r.metrics->first_day, 40);
  EXPECT_EQ(r.metrics->last_day, 59);
}

TEST(TrainDde, SameSeedSameResult) {
  auto a = train_dde(constant_sird(), quick(Method::DDE, 50));
  auto b = train_dde(constant_sird(), quick(Method::DDE, 50));
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.model.params, b.model.params);
  EXPECT_EQ(a.model.network, b.model.network);
  a.wall_time_s = b.wall_time_s = 0;
  EXPECT_EQ(fit_to_json(a).dump(), fit_to_json(b).dump());
}

TEST(TrainDde, FinalLossMatchesReportedParameters) {
  auto r = train_dde(constant_sird(), quick(Method::DDE, 100));
  auto traj = simulate(r.model, r.initial_state, static_cast<int>(r.train_days) - 1, r.config.integrator);
  auto observed = constant_sird().slice(0, r.train_days);
  EXPECT_EQ(trajectory_loss(traj, observed).total, r.final_loss);
}

TEST(ConstGrad, ZeroIterationsReturnsInitialParameters) {
  auto r = fit_constant_gradient(constant_sird(), quick(Method::ConstGrad, 0));
  EXPECT_TRUE(r.loss_curve.empty());
  EXPECT_EQ(r.model.params, TrainingConfig{}.initial.for_variant(Variant::SIRD, 1e6));
  EXPECT_FALSE(r.model.network.has_value());
  EXPECT_GT(r.final_loss, 0.0);
}

TEST(ConstGrad, FinalLossNotAboveInitial) {
  auto r = fit_constant_gradient(constant_sird(), quick(Method::ConstGrad, 200));
  EXPECT_LE(r.final_loss, r.loss_curve.front());
  for (Rate rate : active_rates(Variant::SIRD)) {
    EXPECT_GE(r.model.params.get(rate), 0.0);
    EXPECT_LE(r.model.params.get(rate), 1.0);
  }
}

TEST(NelderMeadFit, ImprovesOnInitialRates) {
  auto data = constant_sird();
  auto start = fit_constant_gradient(data, quick(Method::ConstGrad, 0));
  auto r = nelder_mead_fit(data, quick(Method::NelderMead, 400));
  EXPECT_LT(r.final_loss, start.final_loss);
  EXPECT_LE(r.loss_curve.size(), 400u);
  EXPECT_NEAR(r.model.params.get(Rate::Beta), 0.3, 0.05);
}

TEST(Fit, AllVariantsRun) {
  auto data = constant_sird();
  for (Variant v : kAllVariants) {
    for (Method m : {Method::DDE, Method::ConstGrad, Method::NelderMead}) {
      auto cfg = quick(m, 20);
      cfg.variant = v;
      auto r = fit(data, cfg);
      EXPECT_EQ(r.variant, v);
      EXPECT_EQ(r.method, m);
      EXPECT_TRUE(std::isfinite(r.final_loss)) << to_string(v) << " " << to_string(m);
      EXPECT_EQ(r.metrics->deaths.has_value(), has_deaths(v));
    }
  }
}

TEST(Fit, TooShortTrainingWindow) {
  EXPECT_THROW(fit(constant_sird(21), quick(Method::DDE, 5)), DataError);
  EXPECT_THROW(fit(constant_sird(20), quick(Method::DDE, 5)), DataError);
}

TEST(Fit, NonFiniteLossStopsTrainingWithContext) {
  // Bypasses the validating constructor to plant a NaN observation.
  auto data = constant_sird();
  data.deaths[3] = NAN;
  auto r = fit(data, quick(Method::ConstGrad, 50));
  EXPECT_TRUE(r.diverged);
  EXPECT_TRUE(r.loss_curve.empty());
  EXPECT_NE(r.divergence.find("iteration 0"), std::string::npos) << r.divergence;
  EXPECT_EQ(r.model.params, TrainingConfig{}.initial.for_variant(Variant::SIRD, 1e6));
}

TEST(EffectiveBeta, ConstantWithoutNetwork) {
  auto r = fit_constant_gradient(constant_sird(), quick(Method::ConstGrad, 5));
  for (double b : effective_beta(r.model, r.trajectory)) EXPECT_EQ(b, r.model.params.get(Rate::Beta));
}

TEST(EffectiveBeta, BoundedByBetaStar) {
  auto r = train_dde(constant_sird(), quick(Method::DDE, 50));
  const double beta_star = r.model.params.get(Rate::Beta);
  auto beta = effective_beta(r.model, r.trajectory);
  ASSERT_EQ(beta.size(), r.trajectory.states.size());
  for (double b : beta) {
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, beta_star);
  }
}

TEST(FitIo, RoundTripReproducesTrajectoryAndMetrics) {
  auto data = constant_sird();
  for (Method m : {Method::DDE, Method::NelderMead}) {
    auto cfg = quick(m, 60);
    cfg.variant = Variant::SEIRD;
    auto r = fit(data, cfg);
    auto back = fit_from_json(nlohmann::json::parse(fit_to_json(r).dump()));
    EXPECT_EQ(back.model.params, r.model.params);
    EXPECT_EQ(back.model.network, r.model.network);
    EXPECT_EQ(back.loss_curve, r.loss_curve);
    EXPECT_EQ(back.initial_state, r.initial_state);
    EXPECT_EQ(back.config.hidden, r.config.hidden);
    EXPECT_EQ(back.config.integrator, r.config.integrator);
    auto traj = simulate(back.model, back.initial_state, static_cast<int>(data.size()) - 1,
                         back.config.integrator);
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      EXPECT_EQ(traj.states[t].values, r.trajectory.states[t].values);
    }
    auto report = evaluate_window(back.variant, traj, data.slice(40, 20), 40);
    EXPECT_EQ(report_to_json(report).dump(), report_to_json(*r.metrics).dump());
  }
}

TEST(FitIo, MalformedDocuments) {
  EXPECT_THROW(fit_from_json(nlohmann::json::object()), DataError);
  auto r = fit_constant_gradient(constant_sird(), quick(Method::ConstGrad, 2));
  auto j = fit_to_json(r);
  j["params"].erase("epsilon");
  EXPECT_THROW(fit_from_json(j), DataError);
  auto net = fit_to_json(train_dde(constant_sird(), quick(Method::DDE, 2)));
  net["network"]["activations"][0] = "tanh";
  EXPECT_THROW(fit_from_json(net), StructuralError);
}

TEST(FitIo, UndefinedPearsonSerializedAsNull) {
  EvaluationReport report;
  report.infected = score_series(std::vector<double>{1, 1}, std::vector<double>{1, 2});
  aggregate(report);
  auto j = report_to_json(report);
  EXPECT_TRUE(j["series"]["I"]["pearson"].is_null());
  EXPECT_FALSE(j["series"]["I"]["pearson_defined"].get<bool>());
  EXPECT_TRUE(j["aggregate"]["mean_pearson"].is_null());
}

}  // namespace
