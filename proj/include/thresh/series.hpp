// Exponential near-solutions W + sum_j e^{-j e0 t} Phi_j around the ground state.
//
// With u = W + v the equation becomes i v_t + Delta v + Gamma(v) + iR(v) = -G,
// G the static residual of the model, and
//   iR(v) = kappa (|W+v|^{p-1}(W+v) - W^p) - Gamma(v)
//         = kappa W^p sum_{j1+j2>=2} a_{j1,j2} z^{j1} conj(z)^{j2},  z = v/W.
// Matching powers of e^{-e0 t} gives i(L - j e0) Phi_j + F_j = 0, where F_j is
// the e^{-j e0 t} coefficient of iR(v); hence (L - j e0) Phi_j = i F_j.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "thresh/spectrum.hpp"

namespace thresh {

/// Generalized binomial coefficient alpha (alpha-1) ... (alpha-j+1) / j!.
inline double generalized_binomial(double alpha, int j) {
  if (j < 0) return 0.0;
  double b = 1.0;
  for (int i = 0; i < j; ++i) b *= (alpha - i) / (i + 1);
  return b;
}

class ExpansionTable {
 public:
  ExpansionTable(double pc, int j_max) : pc_(pc), j_max_(j_max) {
    if (j_max < 2) throw InvalidArgument("expansion order must be at least 2");
    if (!(pc > 1.0)) throw InvalidArgument("exponent must exceed 1");
    plus_.resize(j_max + 1);
    minus_.resize(j_max + 1);
    for (int j = 0; j <= j_max; ++j) {
      plus_[j] = generalized_binomial((pc + 1.0) / 2.0, j);
      minus_[j] = generalized_binomial((pc - 1.0) / 2.0, j);
    }
  }

  double pc() const noexcept { return pc_; }
  int j_max() const noexcept { return j_max_; }

  /// Coefficient of z^{j1} conj(z)^{j2}; zero outside 0 <= j1 + j2 <= j_max.
  double operator()(int j1, int j2) const {
    if (j1 < 0 || j2 < 0 || j1 + j2 > j_max_) return 0.0;
    return plus_[j1] * minus_[j2];
  }

  /// Truncated sum of the table at z, including the constant and linear terms.
  cplx evaluate(cplx z) const {
    const cplx zb = std::conj(z);
    cplx acc{};
    cplx zp = 1.0;
    for (int j1 = 0; j1 <= j_max_; ++j1, zp *= z) {
      cplx zq = 1.0;
      for (int j2 = 0; j1 + j2 <= j_max_; ++j2, zq *= zb) acc += (*this)(j1, j2) * zp * zq;
    }
    return acc;
  }

 private:
  double pc_;
  int j_max_;
  RealVec plus_, minus_;
};

inline ExpansionTable pz_coefficients(double pc, int j_max) { return ExpansionTable(pc, j_max); }

/// |1 + z|^{p-1} (1 + z).
inline cplx eval_pz(double pc, cplx z) { return std::pow(std::abs(1.0 + z), pc - 1.0) * (1.0 + z); }

namespace detail {

inline RealVec unit_kappa(const RadialGrid& g) { return RealVec(g.size(), 1.0); }

}  // namespace detail

/// Gamma(v) = kappa W^{p-1} ((p+1)/2 v + (p-1)/2 conj v).
inline RadialField eval_Gamma(const NlsModel& model, const RadialField& v) {
  require_same_grid(model.grid(), v.grid(), "eval_Gamma");
  const double p = model.pc();
  const RealVec& w = model.ground_state();
  RadialField out(v.grid_ptr());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double pot = model.kappa()[i] * std::pow(w[i], p - 1.0);
    out[i] = pot * (0.5 * (p + 1.0) * v[i] + 0.5 * (p - 1.0) * std::conj(v[i]));
  }
  return out;
}

/// iR(v), evaluated directly from the nonlinearity.
inline RadialField eval_iR(const NlsModel& model, const RadialField& v) {
  require_same_grid(model.grid(), v.grid(), "eval_iR");
  const double p = model.pc();
  const RealVec& w = model.ground_state();
  const RadialField gam = eval_Gamma(model, v);
  RadialField out(v.grid_ptr());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const cplx u = w[i] + v[i];
    out[i] = model.kappa()[i] * (std::pow(std::abs(u), p - 1.0) * u - std::pow(w[i], p)) - gam[i];
  }
  if (!out.finite()) throw NumericError("series_builder", "non-finite nonlinear remainder");
  return out;
}

/// R(v) = -i * iR(v).
inline RadialField eval_R(const NlsModel& model, const RadialField& v) {
  RadialField out = eval_iR(model, v);
  out *= cplx{0.0, -1.0};
  return out;
}

/// iR(v) summed from the expansion table; valid where |v| < W.
inline RadialField eval_iR_series(const NlsModel& model, const ExpansionTable& table, const RadialField& v) {
  require_same_grid(model.grid(), v.grid(), "eval_iR_series");
  const double p = model.pc();
  const RealVec& w = model.ground_state();
  RadialField out(v.grid_ptr());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const cplx z = v[i] / w[i];
    const cplx lin = 1.0 + 0.5 * (p + 1.0) * z + 0.5 * (p - 1.0) * std::conj(z);
    out[i] = model.kappa()[i] * std::pow(w[i], p) * (table.evaluate(z) - lin);
  }
  return out;
}

/// e^{-j e0 t} coefficient of iR(sum_m e^{-m e0 t} Phi_m); profiles[m-1] = Phi_m
/// for m = 1 .. j-1.
inline RadialField order_forcing(int j, const std::vector<RadialField>& profiles, const ExpansionTable& table,
                                 const NlsModel& model) {
  if (j < 2) throw InvalidArgument("order_forcing: order must be at least 2");
  if (int(profiles.size()) < j - 1) throw InvalidArgument("order_forcing: missing lower-order profile");
  if (j > table.j_max()) throw InvalidArgument("order_forcing: order exceeds expansion table");
  const GridPtr& grid = model.grid_ptr();
  const std::size_t m = grid->size();
  for (int i = 0; i < j - 1; ++i) require_same_grid(model.grid(), profiles[i].grid(), "order_forcing");

  // pw[e][o] = coefficient of x^o in V^e, V = sum_m x^m Phi_m, for o <= j.
  // Since V starts at order 1, V^e only has orders >= e.
  using Series = std::vector<CplxVec>;
  auto powers = [&](bool conjugate) {
    std::vector<Series> pw(j + 1, Series(j + 1));
    pw[0][0] = CplxVec(m, 1.0);
    for (int e = 1; e <= j; ++e) {
      for (int o = e; o <= j; ++o) {
        CplxVec acc(m, 0.0);
        // orders above j-1 never enter F_j because j1 + j2 >= 2
        for (int a = 1; a <= std::min(o - (e - 1), j - 1); ++a) {
          const CplxVec& prev = pw[e - 1][o - a];
          if (prev.empty()) continue;
          const CplxVec& phi = profiles[a - 1].values();
          for (std::size_t i = 0; i < m; ++i) acc[i] += prev[i] * (conjugate ? std::conj(phi[i]) : phi[i]);
        }
        pw[e][o] = std::move(acc);
      }
    }
    return pw;
  };
  const auto pv = powers(false);
  const auto pc = powers(true);

  const RealVec& w = model.ground_state();
  const double p = model.pc();
  CplxVec f(m, 0.0);
  for (int s = 2; s <= j; ++s) {
    RealVec wpow(m);
    for (std::size_t i = 0; i < m; ++i) wpow[i] = model.kappa()[i] * std::pow(w[i], p - s);
    for (int j1 = 0; j1 <= s; ++j1) {
      const int j2 = s - j1;
      const double coef = table(j1, j2);
      if (coef == 0.0) continue;
      for (int o = j1; o <= j - j2; ++o) {
        const CplxVec& a = pv[j1][o];
        const CplxVec& b = pc[j2][j - o];
        if (a.empty() || b.empty()) continue;
        for (std::size_t i = 0; i < m; ++i) f[i] += coef * wpow[i] * a[i] * b[i];
      }
    }
  }
  return RadialField(grid, std::move(f));
}

struct ProfileSolve {
  RadialField profile;
  double condition = 0.0;
  double residual = 0.0;  // ||(L - j e0) Phi - i F|| / ||F||
};

/// Solves (L - j e0) Phi_j = i F_j.
inline ProfileSolve solve_profile(int j, const RadialField& forcing, const EigenPair& pair,
                                  const LinearizedBlocks& blocks, double max_condition = 1e12) {
  if (j < 2) throw InvalidArgument("solve_profile: order must be at least 2");
  require_same_grid(blocks.grid(), forcing.grid(), "solve_profile");
  const std::size_t m = forcing.size();
  const double shift = j * pair.e0;
  BandLU<double> lu(blocks.shifted_operator(shift));
  const double cond = lu.condition_estimate();
  if (!(cond < max_condition))
    throw NumericError("series_builder", "resolvent near-singular at order " + std::to_string(j) +
                                             " (condition estimate " + std::to_string(cond) + ")");
  RealVec x(2 * m);
  for (std::size_t i = 0; i < m; ++i) {
    x[2 * i] = -forcing[i].imag();
    x[2 * i + 1] = forcing[i].real();
  }
  lu.solve_in_place(std::span<double>(x));
  CplxVec phi(m);
  for (std::size_t i = 0; i < m; ++i) phi[i] = {x[2 * i], x[2 * i + 1]};
  ProfileSolve out{RadialField(forcing.grid_ptr(), std::move(phi)), cond, 0.0};

  RadialField r = blocks.apply_operator(out.profile);
  r -= cplx{shift} * out.profile;
  r -= cplx{0.0, 1.0} * forcing;
  const double fn = l2_norm(forcing);
  out.residual = fn > 0.0 ? l2_norm(r) / fn : l2_norm(r);
  return out;
}

struct NearSolution {
  std::shared_ptr<const LinearizedBlocks> blocks;
  double a = 0.0;
  double e0 = 0.0;
  std::vector<RadialField> profiles;  // Phi_1 .. Phi_k
  std::vector<RadialField> forcings;  // F_2 .. F_k
  std::vector<double> conditions;     // of the order-j resolvents, j = 2..k

  int k() const noexcept { return int(profiles.size()); }
  const NlsModel& model() const { return blocks->model(); }
  const GridPtr& grid_ptr() const { return blocks->grid_ptr(); }

  /// v_k(t) = sum_j e^{-j e0 t} Phi_j.
  RadialField perturbation(double t) const {
    if (!std::isfinite(t)) throw InvalidArgument("near-solution time must be finite");
    RadialField v(grid_ptr());
    const double x = std::exp(-e0 * t);
    double xj = 1.0;
    for (const RadialField& phi : profiles) {
      xj *= x;
      if (xj == 0.0) break;
      v += cplx{xj} * phi;
    }
    return v;
  }
};

inline RadialField assemble(const NearSolution& near, double t) {
  return near.model().ground_state_field() + near.perturbation(t);
}

inline RadialField time_derivative(const NearSolution& near, double t) {
  if (!std::isfinite(t)) throw InvalidArgument("near-solution time must be finite");
  RadialField dv(near.grid_ptr());
  const double x = std::exp(-near.e0 * t);
  double xj = 1.0;
  for (int j = 1; j <= near.k(); ++j) {
    xj *= x;
    if (xj == 0.0) break;
    dv += cplx{-j * near.e0 * xj} * near.profiles[j - 1];
  }
  return dv;
}

/// Sum_{j=2..k} e^{-j e0 t} F_j, the series part of iR(v_k) resolved by the profiles.
inline RadialField forcing_series(const NearSolution& near, double t) {
  RadialField f(near.grid_ptr());
  const double x = std::exp(-near.e0 * t);
  for (int j = 2; j <= near.k(); ++j) f += cplx{std::pow(x, j)} * near.forcings[j - 2];
  return f;
}

struct SeriesOptions {
  int k = 3;
  double a = 1.0;
  int j_max = 0;  // 0: use k
  double max_condition = 1e12;
};

inline NearSolution build_near_solution(std::shared_ptr<const LinearizedBlocks> blocks, const EigenPair& pair,
                                        const SeriesOptions& opt) {
  if (opt.k < 1) throw InvalidArgument("near-solution order k must be at least 1");
  if (!std::isfinite(opt.a)) throw InvalidArgument("near-solution amplitude must be finite");
  NearSolution near;
  near.blocks = blocks;
  near.a = opt.a;
  near.e0 = pair.e0;
  near.profiles.push_back(cplx{opt.a} * pair.y_plus(blocks->grid_ptr()));
  if (opt.k == 1) return near;
  const ExpansionTable table(blocks->pc(), std::max(opt.j_max, opt.k));
  for (int j = 2; j <= opt.k; ++j) {
    RadialField f = order_forcing(j, near.profiles, table, blocks->model());
    ProfileSolve s = solve_profile(j, f, pair, *blocks, opt.max_condition);
    near.forcings.push_back(std::move(f));
    near.profiles.push_back(std::move(s.profile));
    near.conditions.push_back(s.condition);
  }
  return near;
}

/// eps_k(t) = i d_t W_k + Delta_h W_k + kappa |W_k|^{p-1} W_k.
inline RadialField residual_epsilon(const NearSolution& near, double t) {
  if (near.k() < 1) throw InvalidArgument("residual requires k >= 1");
  const RadialField u = assemble(near, t);
  RadialField eps = apply_laplacian(near.model().laplacian(), u);
  eps += near.model().nonlinearity(u);
  eps += cplx{0.0, 1.0} * time_derivative(near, t);
  if (!eps.finite()) throw NumericError("series_builder", "non-finite near-solution residual");
  return eps;
}

/// Largest max_i |v_k(t)|_i / W_i over the grid.
inline double smallness_ratio(const NearSolution& near, double t) {
  const RadialField v = near.perturbation(t);
  const RealVec& w = near.model().ground_state();
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i]) / w[i]);
  return m;
}

/// Smallest t (to within resolution / e0) with max |v_k| / W <= bound; scans
/// downward from a time where the bound holds comfortably.
inline double validity_start(const NearSolution& near, double bound = 0.5, double resolution = 1e-3) {
  if (near.a == 0.0) return 0.0;
  const double e0 = near.e0;
  double hi = 0.0;
  while (smallness_ratio(near, hi) > 1e-3 * bound) hi += 1.0 / e0;
  double lo = hi;
  const double step = 0.25 / e0;
  while (smallness_ratio(near, lo - step) <= bound) {
    lo -= step;
    if (lo < hi - 200.0 / e0) throw NumericError("series_builder", "validity window has no lower end");
  }
  // bisection on [lo - step, lo]
  double fail = lo - step, pass = lo;
  while (pass - fail > resolution / e0) {
    const double mid = 0.5 * (pass + fail);
    (smallness_ratio(near, mid) <= bound ? pass : fail) = mid;
  }
  return pass;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
};

inline LinearFit least_squares(const RealVec& x, const RealVec& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidArgument("least squares needs at least two points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) sx += x[i], sy += y[i];
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) ss += std::pow(y[i] - f.intercept - f.slope * x[i], 2);
  f.rms = std::sqrt(ss / n);
  return f;
}

struct ResidualReport {
  RealVec times;
  RealVec l2;        // ||eps_k(t)|| in the cell-weighted L2 norm
  RealVec weighted;  // sup <r>^M |eps_k(t)|
  double floor = 0.0;
  double rate = 0.0;
  double weighted_rate = 0.0;
  double fit_rms = 0.0;
  double t_begin = 0.0, t_end = 0.0;
  double max_smallness = 0.0;
};

struct RateWindow {
  double t_begin = 0.0;
  double span = 40.0;  // in units of 1/e0
  double step = 0.25;  // in units of 1/e0
  double floor_factor = 10.0;
  int weight_power = 2;
};

/// Decay rate of ||eps_k(t)|| over the part of the window where it stays above
/// floor_factor times the a = 0 residual.
inline ResidualReport residual_rate(const NearSolution& near, const RateWindow& win) {
  ResidualReport rep;
  const RadialField g = near.model().static_residual();
  // Round-off in Delta_h of an O(1) field sets the floor when the model is well balanced.
  const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() *
                          l2_norm(RadialField(near.grid_ptr(), RealVec(near.model().ground_state()))) /
                          std::pow(near.model().grid().h(), 2);
  rep.floor = std::max(l2_norm(g), roundoff);
  const double dt = win.step / near.e0;
  const int samples = int(std::floor(win.span / win.step)) + 1;
  RealVec lt, ll, lw;
  for (int s = 0; s < samples; ++s) {
    const double t = win.t_begin + s * dt;
    const RadialField eps = residual_epsilon(near, t);
    const double n2 = l2_norm(eps);
    const double ns = weighted_sup_norm(eps, win.weight_power, 0);
    rep.times.push_back(t);
    rep.l2.push_back(n2);
    rep.weighted.push_back(ns);
    if (n2 < win.floor_factor * rep.floor) break;
    rep.max_smallness = std::max(rep.max_smallness, smallness_ratio(near, t));
    lt.push_back(t);
    ll.push_back(std::log(n2));
    lw.push_back(std::log(ns));
  }
  if (lt.size() < 3) throw NumericError("series_builder", "residual window empty after floor filtering");
  const LinearFit f = least_squares(lt, ll);
  rep.rate = -f.slope;
  rep.fit_rms = f.rms;
  rep.weighted_rate = -least_squares(lt, lw).slope;
  rep.t_begin = lt.front();
  rep.t_end = lt.back();
  return rep;
}

}  // namespace thresh
