// Closed-form ground state on a grid, the conserved functionals and the
// (theta, mu) symmetry action.
#pragma once

#include <algorithm>
#include <cmath>

#include "thresh/grid.hpp"

namespace thresh {

inline RadialField sample_w(const GridPtr& grid) {
  const Dimension dim = grid->dim();
  return RadialField::sample(grid, [&](double r) { return cplx(eval_w(dim, r), 0.0); });
}

inline RadialField sample_lambda_w(const GridPtr& grid) {
  const Dimension dim = grid->dim();
  return RadialField::sample(grid, [&](double r) { return cplx(eval_lambda_w(dim, r), 0.0); });
}

/// ||grad u||_2.
inline double kinetic_norm(const RadialField& u) { return std::sqrt(h1_energy(u)); }

/// E(u) = 1/2 ||grad u||^2 - (d-2)/(2d) ||u||_{2*}^{2*}.
inline double energy(const RadialField& u) {
  const Dimension& dim = u.grid().dim();
  const double d = dim.value();
  const double e = 0.5 * h1_energy(u) - (d - 2.0) / (2.0 * d) * lp_power(u, dim.sobolev_exponent());
  if (!std::isfinite(e)) throw NumericError("ground_state", "non-finite energy");
  return e;
}

/// ||u||_{2*} / ||grad u||_2.
inline double sobolev_quotient(const RadialField& u) {
  const double kin = kinetic_norm(u);
  if (!(kin > 0.0)) throw InvalidArgument("sobolev_quotient: zero field");
  const double q = u.grid().dim().sobolev_exponent();
  return std::pow(lp_power(u, q), 1.0 / q) / kin;
}

enum class TailMode { PowerLaw, Zero };

namespace detail {

// Fritsch-Carlson monotone cubic slopes for samples y at uniform spacing h.
inline RealVec pchip_slopes(const RealVec& y, double h) {
  const std::size_t m = y.size();
  RealVec delta(m - 1), slope(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) delta[i] = (y[i + 1] - y[i]) / h;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (delta[i - 1] * delta[i] > 0.0) slope[i] = 2.0 * delta[i - 1] * delta[i] / (delta[i - 1] + delta[i]);
  }
  // Radial fields are even in r, so the slope at the origin vanishes.
  slope[0] = 0.0;
  slope[m - 1] = delta[m - 2];
  return slope;
}

inline double hermite(double y0, double y1, double m0, double m1, double h, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

}  // namespace detail

/// e^{i theta} mu^{-(d-2)/2} u(r/mu), resampled by monotone cubic interpolation.
/// Points beyond r_max are continued by u(r_max) (r_max/r)^{d-2} or by zero.
inline RadialField apply_symmetry(const RadialField& u, const SymmetryParams& s, TailMode tail = TailMode::PowerLaw) {
  if (!(s.mu > 0.0) || !std::isfinite(s.mu)) throw InvalidArgument("apply_symmetry: mu must be positive");
  const RadialGrid& g = u.grid();
  const double h = g.h();
  if (g.r_max() / s.mu < 2.0 * h || s.mu * g.r_max() < 2.0 * h)
    throw NumericError("ground_state", "apply_symmetry: scale pushes the field outside the truncated domain");
  const double d = g.d();
  const cplx factor = std::polar(std::pow(s.mu, -(d - 2.0) / 2.0), s.theta);
  if (s.mu == 1.0) {
    RadialField out(u);
    out *= factor;
    return out;
  }
  const RealVec re = u.real(), im = u.imag();
  const RealVec sre = detail::pchip_slopes(re, h), sim = detail::pchip_slopes(im, h);
  const std::size_t last = u.size() - 1;
  RadialField out(u.grid_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = g.r(i) / s.mu;
    cplx value;
    if (x >= g.r_max()) {
      value = tail == TailMode::Zero ? cplx{} : u[last] * std::pow(g.r_max() / x, d - 2.0);
    } else {
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(x / h), last - 1);
      const double t = (x - g.r(k)) / h;
      value = {detail::hermite(re[k], re[k + 1], sre[k], sre[k + 1], h, t),
               detail::hermite(im[k], im[k + 1], sim[k], sim[k + 1], h, t)};
    }
    out[i] = factor * value;
  }
  return out;
}

/// e^{i theta} mu^{-(d-2)/2} W(r/mu) evaluated in closed form.
inline RadialField modulated_w(const GridPtr& grid, const SymmetryParams& s) {
  const Dimension dim = grid->dim();
  const cplx factor = std::polar(std::pow(s.mu, -(dim.value() - 2.0) / 2.0), s.theta);
  return RadialField::sample(grid, [&](double r) { return factor * eval_w(dim, r / s.mu); });
}

}  // namespace thresh
