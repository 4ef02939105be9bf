#include <gtest/gtest.h>

#include <cmath>

#include "thresh/series.hpp"

using namespace thresh;

namespace {

struct Setup {
  std::shared_ptr<const LinearizedBlocks> blocks;
  EigenPair pair;
};

const Setup& setup() {
  static const Setup s = [] {
    Setup out;
    auto model = std::make_shared<const NlsModel>(build_grid(6, 60.0, 3000), Balance::Plain);
    out.blocks = std::make_shared<const LinearizedBlocks>(model);
    out.pair = ground_mode(*out.blocks);
    return out;
  }();
  return s;
}

NearSolution near(int k, double a) {
  SeriesOptions o;
  o.k = k;
  o.a = a;
  return build_near_solution(setup().blocks, setup().pair, o);
}

}  // namespace

TEST(Series, GeneralizedBinomialMatchesGammaFormula) {
  for (double alpha : {2.0, 1.5, 0.5, -0.7})
    for (int j = 0; j <= 6; ++j) {
      const double ref = std::tgamma(alpha + 1) / (std::tgamma(j + 1.0) * std::tgamma(alpha - j + 1));
      if (std::isfinite(ref)) {
        EXPECT_NEAR(generalized_binomial(alpha, j), ref, 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  EXPECT_EQ(generalized_binomial(2.0, 3), 0.0);
}

TEST(Series, ExpansionTableSumsToPowerLaw) {
  const ExpansionTable table(2.0, 30);
  for (cplx z : {cplx(0.1, 0.05), cplx(-0.2, 0.1), cplx(0.0, -0.25)})
    EXPECT_NEAR(std::abs(table.evaluate(z) - eval_pz(2.0, z)), 0.0, 1e-12);
  const ExpansionTable t73(7.0 / 3.0, 30);
  const cplx z(0.15, -0.1);
  EXPECT_NEAR(std::abs(t73.evaluate(z) - eval_pz(7.0 / 3.0, z)), 0.0, 1e-12);
}

TEST(Series, TableRejectsBadArguments) {
  EXPECT_THROW(ExpansionTable(2.0, 1), InvalidArgument);
  EXPECT_THROW(ExpansionTable(0.5, 4), InvalidArgument);
}

TEST(Series, SeriesRemainderMatchesDirectEvaluation) {
  const NlsModel& m = setup().blocks->model();
  const ExpansionTable table(m.pc(), 40);
  RadialField v = setup().pair.y_plus(setup().blocks->grid_ptr());
  // scale so |v| <= 0.1 W
  double ratio = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) ratio = std::max(ratio, std::abs(v[i]) / m.ground_state()[i]);
  v *= cplx{0.1 / ratio};
  const RadialField a = eval_iR(m, v), b = eval_iR_series(m, table, v);
  EXPECT_LT(l2_norm(a - b) / l2_norm(a), 1e-12);
}

// F_2 is the quadratic part of iR: symmetric difference quotient oracle.
TEST(Series, SecondOrderForcingIsQuadraticPartOfRemainder) {
  const NlsModel& m = setup().blocks->model();
  const ExpansionTable table(m.pc(), 4);
  const RadialField phi1 = setup().pair.y_plus(setup().blocks->grid_ptr());
  const RadialField f2 = order_forcing(2, {phi1}, table, m);
  const double s = 1e-3;
  RadialField q = eval_iR(m, cplx{s} * phi1) + eval_iR(m, cplx{-s} * phi1);
  q *= cplx{0.5 / (s * s)};
  EXPECT_LT(l2_norm(q - f2) / l2_norm(f2), 1e-5);
}

TEST(Series, ProfilesSolveTheirResolventEquations) {
  const NearSolution n = near(4, 1.0);
  for (int j = 2; j <= 4; ++j) {
    const RadialField& phi = n.profiles[std::size_t(j - 1)];
    const RadialField& f = n.forcings[std::size_t(j - 2)];
    const RadialField r = n.blocks->apply_operator(phi) - cplx{j * n.e0} * phi - cplx{0.0, 1.0} * f;
    EXPECT_LT(l2_norm(r) / l2_norm(f), 1e-8) << "j=" << j;
  }
}

TEST(Series, ProfilesAreHomogeneousInAmplitude) {
  const NearSolution one = near(4, 1.0);
  for (double a : {-1.0, 0.3, -2.3}) {
    const NearSolution na = near(4, a);
    for (int j = 1; j <= 4; ++j) {
      const RadialField want = cplx{std::pow(a, j)} * one.profiles[std::size_t(j - 1)];
      EXPECT_LT(l2_norm(na.profiles[std::size_t(j - 1)] - want) / l2_norm(want), 1e-10) << "a=" << a << " j=" << j;
    }
  }
}

TEST(Series, AmplitudeActsAsTimeTranslation) {
  const NearSolution plus = near(3, 1.0), minus = near(3, -1.0);
  for (double a : {1.9, -0.7}) {
    const NearSolution na = near(3, a);
    const NearSolution& unit = a > 0 ? plus : minus;
    const double shift = std::log(std::abs(a)) / na.e0;
    for (double t : {5.0, 12.0}) {
      const RadialField x = assemble(na, t), y = assemble(unit, t - shift);
      EXPECT_LT((x - y).max_abs(), 1e-12);
    }
  }
}

TEST(Series, ResidualDecaysAtNextOrderRate) {
  for (int k : {1, 2}) {
    const NearSolution n = near(k, 1.0);
    RateWindow w;
    w.t_begin = validity_start(n);
    const ResidualReport r = residual_rate(n, w);
    EXPECT_NEAR(r.rate / ((k + 1) * n.e0), 1.0, 0.10) << "k=" << k;
  }
}

TEST(Series, ValidityStartHitsTheBound) {
  const NearSolution n = near(3, -1.0);
  const double t = validity_start(n, 0.5);
  EXPECT_LE(smallness_ratio(n, t), 0.5);
  EXPECT_GT(smallness_ratio(n, t - 0.01 / n.e0), 0.5);
}

TEST(Series, RejectsInvalidOptions) {
  SeriesOptions o;
  o.k = 0;
  EXPECT_THROW(build_near_solution(setup().blocks, setup().pair, o), InvalidArgument);
}
