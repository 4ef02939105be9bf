#include <gtest/gtest.h>

#include <numbers>

#include "thresh/diagnostics.hpp"

using namespace thresh;

namespace {

EvolutionTrace synthetic(const std::vector<double>& t, const std::vector<double>& kinetic, double ref = 1.0) {
  EvolutionTrace tr;
  tr.reference_kinetic = ref;
  tr.reflection_horizon = 1e9;
  for (std::size_t i = 0; i < t.size(); ++i) {
    TraceSample s;
    s.t = t[i];
    s.kinetic = kinetic[i];
    s.h1_dist = 1.0;
    s.potential_ratio = 0.6;
    tr.samples.push_back(s);
  }
  return tr;
}

double wrap(double a) { return std::remainder(a, 2 * std::numbers::pi); }

}  // namespace

TEST(RateFit, ExactOnNoiselessExponential) {
  RealVec t, d;
  for (int i = 0; i <= 40; ++i) t.push_back(0.1 * i), d.push_back(3.0 * std::exp(-1.7 * 0.1 * i));
  const RateFit f = rate_fit(t, d, 1e-12);
  EXPECT_NEAR(f.rate, 1.7, 1e-6);
  EXPECT_LT(f.residual, 1e-10);
  EXPECT_TRUE(f.decaying);
}

TEST(RateFit, TrimsSamplesNearTheFloor) {
  RealVec t, d;
  for (int i = 0; i <= 300; ++i) t.push_back(0.1 * i), d.push_back(std::exp(-0.1 * i) + 1e-9);
  const RateFit f = rate_fit(t, d, 1e-8);
  EXPECT_GE(f.rate, 0.95);
  EXPECT_LE(f.rate, 1.0);
  EXPECT_LT(f.t_end, 30.0);
}

TEST(RateFit, ConstantIsNonDecaying) {
  RealVec t, d;
  for (int i = 0; i < 20; ++i) t.push_back(i), d.push_back(0.3);
  const RateFit f = rate_fit(t, d, 1e-12);
  EXPECT_NEAR(f.rate, 0.0, 1e-12);
  EXPECT_FALSE(f.decaying);
}

TEST(RateFit, TooFewSamplesIsAnError) {
  EXPECT_THROW(rate_fit({0, 1, 2}, {1, 0.5, 0.25}, 1e-12), NumericError);
}

TEST(Modulation, RecoversPhaseAndScale) {
  auto g = build_grid(6, 60.0, 6000);
  for (auto [theta, mu] : {std::pair{0.4, 1.3}, std::pair{-2.0, 0.7}, std::pair{0.0, 1.0}}) {
    const ModulationFit f = fit_modulation(modulated_w(g, {theta, mu}));
    EXPECT_NEAR(f.mu, mu, 1e-6);
    EXPECT_NEAR(wrap(f.theta - theta), 0.0, 1e-8);
    EXPECT_LT(f.distance, 1e-6);
    EXPECT_TRUE(f.bracket_ok || mu == 1.0);
  }
}

TEST(Modulation, DistanceInvariantUnderSymmetries) {
  auto g = build_grid(6, 60.0, 6000);
  RadialField u = sample_w(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.02 * cplx(1.0, -0.3) * std::exp(-std::pow(g->r(i) - 3.0, 2));
  const double d0 = fit_modulation(u).distance;
  for (SymmetryParams s : {SymmetryParams{0.8, 1.1}, SymmetryParams{-0.5, 0.9}}) {
    const double d1 = fit_modulation(apply_symmetry(u, s)).distance;
    EXPECT_NEAR(d1 / d0, 1.0, 1e-4);
  }
}

TEST(Dichotomy, SidesAndViolations) {
  const std::vector<double> t{0, 1, 2, 3};
  EXPECT_EQ(kinetic_dichotomy(synthetic(t, {0.9, 0.95, 0.99, 0.999})).side, KineticSide::Below);
  EXPECT_EQ(kinetic_dichotomy(synthetic(t, {1.1, 1.05, 1.01, 1.001})).side, KineticSide::Above);
  EXPECT_EQ(kinetic_dichotomy(synthetic(t, {1.0, 1.0 + 1e-8, 1.0 - 1e-8, 1.0})).side, KineticSide::At);
  const DichotomyResult mixed = kinetic_dichotomy(synthetic(t, {0.9, 0.95, 1.2, 0.98}));
  EXPECT_EQ(mixed.side, KineticSide::Mixed);
  ASSERT_EQ(mixed.violations.size(), 1u);
  EXPECT_EQ(mixed.violations[0], 2.0);
}

TEST(Classify, ConvergingTrace) {
  std::vector<double> t, k;
  for (int i = 0; i <= 200; ++i) t.push_back(0.5 * i), k.push_back(100.0 - std::exp(-0.14 * 0.5 * i));
  EvolutionTrace tr = synthetic(t, k, 100.0);
  for (std::size_t i = 0; i < tr.samples.size(); ++i) tr.samples[i].h1_dist = 2.0 * std::exp(-0.14 * t[i]) + 1e-9;
  const ClassificationReport r = classify(tr);
  EXPECT_EQ(r.regime, Regime::ConvergesToW);
  EXPECT_EQ(r.kinetic_side, KineticSide::Below);
  ASSERT_TRUE(r.rate.has_value());
  EXPECT_NEAR(r.rate->rate, 0.14, 1e-3);
}

TEST(Classify, BlowupAndScatteringAndUndetermined) {
  const std::vector<double> t{0, 1, 2, 3, 4, 5};
  EvolutionTrace blow = synthetic(t, {2, 2, 3, 4, 5, 9});
  blow.termination = Termination::BlowupDetected;
  blow.t_star_low = 5.0, blow.t_star_high = 5.01;
  EXPECT_EQ(classify(blow).regime, Regime::Blowup);

  EvolutionTrace scat = synthetic(t, {0.9, 0.9, 0.9, 0.9, 0.9, 0.9});
  scat.samples[4].potential_ratio = 0.01;
  scat.reflection_horizon = 10.0;
  const ClassificationReport rs = classify(scat);
  EXPECT_EQ(rs.regime, Regime::ScatteringProxy);
  EXPECT_EQ(*rs.proxy_time, 4.0);

  scat.reflection_horizon = 2.0;
  EXPECT_EQ(classify(scat).regime, Regime::Undetermined);
}

TEST(Classify, GaugeInvariant) {
  auto m = std::make_shared<const NlsModel>(build_grid(6, 30.0, 600), Balance::WellBalanced);
  RadialField u = m->ground_state_field();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= 1.0 - 0.02 * std::exp(-m->grid().r(i));
  EvolverConfig cfg;
  cfg.dt = 0.05;
  cfg.t_end = 4.0;
  const cplx g = std::polar(1.0, 1.1);
  const ClassificationReport a = classify(evolve(m, u, cfg)), b = classify(evolve(m, g * u, cfg));
  EXPECT_EQ(a.regime, b.regime);
  EXPECT_EQ(a.kinetic_side, b.kinetic_side);
  EXPECT_NEAR(a.mu, b.mu, 1e-8);
  EXPECT_NEAR(a.min_distance, b.min_distance, 1e-9 * std::max(1.0, a.min_distance));
  EXPECT_NEAR(wrap(b.theta - a.theta - 1.1), 0.0, 1e-8);
}
