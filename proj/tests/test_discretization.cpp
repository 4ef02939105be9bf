#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/constants/constants.hpp>

#include "thresh/model.hpp"

using namespace thresh;

namespace {

RadialField gaussian(const GridPtr& g, double s = 1.0) {
  return RadialField::sample(g, [s](double r) { return cplx(std::exp(-r * r / (s * s)), 0.0); });
}

}  // namespace

TEST(Grid, RejectsBadParameters) {
  EXPECT_THROW(build_grid(2, 60.0, 100), InvalidArgument);
  EXPECT_THROW(build_grid(6, -1.0, 100), InvalidArgument);
  EXPECT_THROW(build_grid(6, 60.0, 1), InvalidArgument);
}

TEST(Grid, CellWeightsSumToBallVolume) {
  auto g = build_grid(6, 10.0, 400);
  double s = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) s += g->w(i);
  EXPECT_NEAR(s / g->ball_volume(), 1.0, 1e-13);
}

// |S^5| int_0^inf exp(-r^2) r^5 dr = pi^3 * 1
TEST(Grid, QuadratureOfGaussianMatchesClosedForm) {
  auto g = build_grid(6, 12.0, 600);
  RealVec f(g->size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::exp(-g->r(i) * g->r(i));
  const double pi3 = std::pow(boost::math::constants::pi<double>(), 3);
  EXPECT_NEAR(integrate(f, *g) / pi3, 1.0, 1e-12);
}

TEST(Grid, QuadratureAgreesWithAdaptiveIntegration) {
  auto g = build_grid(4, 20.0, 2000);
  auto fn = [](double r) { return 1.0 / std::pow(1.0 + r * r, 4); };
  RealVec f(g->size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = fn(g->r(i));
  const double area = g->dim().sphere_area();
  const double ref = area * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                [&](double r) { return fn(r) * r * r * r; }, 0.0, 20.0, 10, 1e-14);
  EXPECT_NEAR(integrate(f, *g) / ref, 1.0, 1e-8);
}

TEST(Laplacian, ExactOnQuadraticsInTheInterior) {
  for (int d : {3, 5, 6}) {
    auto g = build_grid(d, 10.0, 200, BoundaryCondition::Dirichlet);
    DiscreteLaplacian lap(g);
    RealVec u(g->size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = g->r(i) * g->r(i);
    const RealVec lu = lap.apply(u);
    for (std::size_t i = 0; i + 1 < u.size(); ++i) EXPECT_NEAR(lu[i], 2.0 * d, 1e-9) << "d=" << d << " i=" << i;
  }
}

TEST(Laplacian, SymmetricInCellWeightedProduct) {
  for (auto bc : {BoundaryCondition::Dirichlet, BoundaryCondition::GroundStateTail}) {
    auto g = build_grid(6, 8.0, 160, bc);
    DiscreteLaplacian lap(g);
    RadialField u = gaussian(g, 2.0);
    RadialField v = RadialField::sample(g, [](double r) { return cplx(std::cos(r), std::sin(0.3 * r)); });
    const cplx a = inner(lap.apply(u), v), b = inner(u, lap.apply(v));
    EXPECT_NEAR(std::abs(a - b) / std::abs(a), 0.0, 1e-12);
  }
}

TEST(Laplacian, DirichletFormIsMinusLaplacianPairing) {
  auto g = build_grid(6, 8.0, 160);
  DiscreteLaplacian lap(g);
  RadialField u = RadialField::sample(g, [](double r) { return cplx(std::exp(-r * r / 4), r * std::exp(-r)); });
  EXPECT_NEAR(dirichlet_energy(u), -inner(lap.apply(u), u).real(), 1e-10 * dirichlet_energy(u));
}

TEST(Laplacian, SecondOrderOnGaussian) {
  // exact: Delta e^{-r^2} = (4 r^2 - 2 d) e^{-r^2}
  auto err = [](int n) {
    auto g = build_grid(6, 8.0, n, BoundaryCondition::Dirichlet);
    DiscreteLaplacian lap(g);
    RealVec u(g->size());
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(-g->r(i) * g->r(i));
    const RealVec lu = lap.apply(u);
    double e = 0.0;
    for (std::size_t i = 0; i < u.size() / 2; ++i) {
      const double r = g->r(i);
      e = std::max(e, std::abs(lu[i] - (4 * r * r - 12.0) * u[i]));
    }
    return e;
  };
  const double order = std::log2(err(200) / err(400));
  EXPECT_NEAR(order, 2.0, 0.1);
}

TEST(Norms, KineticEnergyOfGaussianMatchesClosedForm) {
  // ||grad e^{-r^2}||^2 = |S^5| int 4 r^7 e^{-2 r^2} dr = pi^3 * 4 * 3/16
  const double pi3 = std::pow(boost::math::constants::pi<double>(), 3);
  auto err = [&](int n) {
    return std::abs(h1_energy(gaussian(build_grid(6, 12.0, n, BoundaryCondition::Dirichlet))) / (pi3 * 0.75) - 1.0);
  };
  const double e1 = err(1200), e2 = err(2400);
  EXPECT_LT(e1, 1e-7);
  // fourth-order gradient stencil
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
}

TEST(Norms, LpPowerOfGaussian) {
  // int e^{-3 r^2} over R^6 = pi^3 / 27
  auto g = build_grid(6, 12.0, 1200, BoundaryCondition::Dirichlet);
  const double pi3 = std::pow(boost::math::constants::pi<double>(), 3);
  EXPECT_NEAR(lp_power(gaussian(g), 3.0) / (pi3 / 27.0), 1.0, 1e-10);
}

TEST(Norms, HmmNormOfZeroAndScaling) {
  auto g = build_grid(6, 12.0, 1200);
  RadialField z(g);
  EXPECT_EQ(hmm_norm(z, 2), 0.0);
  RadialField u = gaussian(g);
  EXPECT_NEAR(hmm_norm(cplx{3.0} * u, 2), 3.0 * hmm_norm(u, 2), 1e-12 * hmm_norm(u, 2));
}

TEST(Fields, GridMismatchIsRejected) {
  auto a = build_grid(6, 10.0, 100), b = build_grid(6, 10.0, 120);
  RadialField u(a), v(b);
  EXPECT_THROW(u + v, InvalidArgument);
}

TEST(Model, WellBalancedGroundStateIsExactEquilibrium) {
  auto g = build_grid(6, 60.0, 1200);
  NlsModel m(g, Balance::WellBalanced);
  const RadialField res = m.static_residual();
  EXPECT_LT(res.max_abs(), 1e-12);
  for (std::size_t i = 0; i < g->size() / 2; ++i) EXPECT_NEAR(m.kappa()[i], 1.0, 1e-2);
}

TEST(Model, PlainStaticResidualSecondOrder) {
  auto ratio = [](int n) {
    NlsModel m(build_grid(6, 60.0, n), Balance::Plain);
    return l2_norm(m.static_residual()) / l2_norm(m.nonlinearity(m.ground_state_field()));
  };
  const double r1 = ratio(3000), r2 = ratio(6000);
  EXPECT_LT(r2, 1e-5);
  EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.3);
}
