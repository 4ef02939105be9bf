// Linearization around W in real block form and its exponential eigenmodes.
//
// Writing v = v1 + i v2, the operator L v = -i(Delta v + Gamma(v)) becomes
//   L v = L_minus v2 - i L_plus v1,
//   L_plus = Delta + p_c V,  L_minus = Delta + V,  V = kappa W^{p_c - 1},
// so L Y = e0 Y with Y = y1 + i y2 reads L_minus y2 = e0 y1, -L_plus y1 = e0 y2,
// and y1 is an eigenvector of L_minus L_plus with eigenvalue -e0^2.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>

#include "thresh/banded.hpp"
#include "thresh/model.hpp"

namespace thresh {

class LinearizedBlocks {
 public:
  explicit LinearizedBlocks(std::shared_ptr<const NlsModel> model) : model_(std::move(model)) {
    const RealVec& w = model_->ground_state();
    const RealVec& kappa = model_->kappa();
    const double p = model_->pc();
    potential_.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) potential_[i] = kappa[i] * std::pow(w[i], p - 1.0);
  }

  const NlsModel& model() const { return *model_; }
  const std::shared_ptr<const NlsModel>& model_ptr() const noexcept { return model_; }
  const RadialGrid& grid() const { return model_->grid(); }
  const GridPtr& grid_ptr() const { return model_->grid_ptr(); }
  double pc() const { return model_->pc(); }
  /// V = kappa W^{p_c - 1}.
  const RealVec& potential() const noexcept { return potential_; }

  RealVec apply_plus(const RealVec& u) const { return apply_with(u, pc()); }
  RealVec apply_minus(const RealVec& u) const { return apply_with(u, 1.0); }

  /// L applied to a complex field.
  RadialField apply_operator(const RadialField& v) const {
    const RealVec a = apply_minus(v.imag());
    const RealVec b = apply_plus(v.real());
    RadialField out(v.grid_ptr());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = {a[i], -b[i]};
    return out;
  }

  /// Symmetrized tridiagonal form of L_plus (coupling = p_c) or L_minus (coupling = 1).
  std::pair<RealVec, RealVec> symmetrized(double coupling) const {
    auto [diag, off] = model_->laplacian().symmetrized();
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] += coupling * potential_[i];
    return {diag, off};
  }

  /// Banded form of (L - shift) on interleaved unknowns (v1_0, v2_0, v1_1, ...).
  BandMatrix<double> shifted_operator(double shift) const {
    const DiscreteLaplacian& lap = model_->laplacian();
    const std::size_t m = potential_.size();
    BandMatrix<double> a(2 * m, 3, 3);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t re = 2 * i, im = 2 * i + 1;
      // real row: L_minus v2 - shift v1
      a(re, re) = -shift;
      a(re, im) = lap.diag()[i] + potential_[i];
      if (i > 0) a(re, im - 2) = lap.lower()[i];
      if (i + 1 < m) a(re, im + 2) = lap.upper()[i];
      // imaginary row: -L_plus v1 - shift v2
      a(im, im) = -shift;
      a(im, re) = -(lap.diag()[i] + pc() * potential_[i]);
      if (i > 0) a(im, re - 2) = -lap.lower()[i];
      if (i + 1 < m) a(im, re + 2) = -lap.upper()[i];
    }
    return a;
  }

 private:
  RealVec apply_with(const RealVec& u, double coupling) const {
    RealVec out = model_->laplacian().apply(u);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coupling * potential_[i] * u[i];
    return out;
  }

  std::shared_ptr<const NlsModel> model_;
  RealVec potential_;
};

inline LinearizedBlocks build_blocks(std::shared_ptr<const NlsModel> model) { return LinearizedBlocks(std::move(model)); }

inline LinearizedBlocks build_blocks(const GridPtr& grid, Balance balance = Balance::Plain) {
  return LinearizedBlocks(std::make_shared<const NlsModel>(grid, balance));
}

/// Relative residuals of the two kernel relations L_minus W = 0 and
/// L_plus (Lambda W) = 0, measured on rows with r <= r_cut so the boundary
/// closure does not mask the interior truncation order.
struct KernelResiduals {
  double minus_w = 0.0;
  double plus_lambda_w = 0.0;
};

inline KernelResiduals kernel_residuals(const LinearizedBlocks& blocks, double r_cut) {
  const RadialGrid& g = blocks.grid();
  const RealVec& w = blocks.model().ground_state();
  RealVec lw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) lw[i] = eval_lambda_w(g.dim(), g.r(i));
  const RealVec a = blocks.apply_minus(w), b = blocks.apply_plus(lw);
  const RealVec lap_w = blocks.model().laplacian().apply(w), lap_lw = blocks.model().laplacian().apply(lw);
  double na = 0, nb = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < g.size() && g.r(i) <= r_cut; ++i) {
    na += g.w(i) * a[i] * a[i];
    nb += g.w(i) * b[i] * b[i];
    sa += g.w(i) * lap_w[i] * lap_w[i];
    sb += g.w(i) * lap_lw[i] * lap_lw[i];
  }
  return {std::sqrt(na / sa), std::sqrt(nb / sb)};
}

struct EigenPair {
  double e0 = 0.0;
  RealVec y1;  // Re Y_+
  RealVec y2;  // Im Y_+
  double h1_norm = 1.0;
  int iterations = 0;
  double coarse_shift = 0.0;

  RadialField y_plus(const GridPtr& grid) const {
    CplxVec v(y1.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = {y1[i], y2[i]};
    return RadialField(grid, std::move(v));
  }
  RadialField y_minus(const GridPtr& grid) const { return y_plus(grid).conj(); }
};

struct EigenOptions {
  int coarse_n = 480;
  double tolerance = 1e-6;
  int max_iterations = 200;
  int refinement_steps = 3;
};

namespace detail {

// Dense L_minus L_plus (symmetrized) on a coarse copy of the grid; returns the
// most negative real eigenvalue.
inline std::optional<double> coarse_negative_eigenvalue(const LinearizedBlocks& blocks, int coarse_n) {
  const RadialGrid& g = blocks.grid();
  const int n = std::min(coarse_n, g.n());
  auto coarse_grid = build_grid(g.d(), g.r_max(), n, g.boundary());
  LinearizedBlocks coarse = build_blocks(std::make_shared<const NlsModel>(coarse_grid, blocks.model().balance()));
  const auto [dp, op] = coarse.symmetrized(coarse.pc());
  const auto [dm, om] = coarse.symmetrized(1.0);
  const Eigen::Index m = Eigen::Index(dp.size());
  Eigen::MatrixXd ap = Eigen::MatrixXd::Zero(m, m), am = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    ap(i, i) = dp[i];
    am(i, i) = dm[i];
    if (i + 1 < m) {
      ap(i, i + 1) = ap(i + 1, i) = op[i];
      am(i, i + 1) = am(i + 1, i) = om[i];
    }
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(am * ap, false);
  if (solver.info() != Eigen::Success) return std::nullopt;
  std::optional<double> best;
  for (const auto& ev : solver.eigenvalues()) {
    if (std::abs(ev.imag()) > 1e-8 * std::max(1.0, std::abs(ev.real()))) continue;
    if (ev.real() < 0.0 && (!best || ev.real() < *best)) best = ev.real();
  }
  return best;
}

inline double weighted_norm(const RealVec& a, const RealVec& b, const RadialGrid& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += g.w(i) * (a[i] * a[i] + b[i] * b[i]);
  return std::sqrt(acc);
}

}  // namespace detail

/// Relative block residual max(||L_- y2 - e0 y1||, ||-L_+ y1 - e0 y2||) / ||Y||.
inline double eigen_residual(const LinearizedBlocks& blocks, const EigenPair& pair) {
  const RadialGrid& g = blocks.grid();
  if (pair.y1.size() != g.size() || pair.y2.size() != g.size()) throw InvalidArgument("eigen_residual: grid mismatch");
  RealVec r1 = blocks.apply_minus(pair.y2), r2 = blocks.apply_plus(pair.y1);
  RealVec zero(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    r1[i] -= pair.e0 * pair.y1[i];
    r2[i] = -r2[i] - pair.e0 * pair.y2[i];
  }
  const double scale = detail::weighted_norm(pair.y1, pair.y2, g);
  return std::max(detail::weighted_norm(r1, zero, g), detail::weighted_norm(r2, zero, g)) / scale;
}

/// Unstable eigenpair (e0, Y_+) normalized to ||Y_+||_{H^1 dot} = 1 with y1(0) > 0.
inline EigenPair ground_mode(const LinearizedBlocks& blocks, const EigenOptions& opt = {}) {
  const RadialGrid& g = blocks.grid();
  const std::size_t m = g.size();
  const auto coarse = detail::coarse_negative_eigenvalue(blocks, opt.coarse_n);
  if (!coarse) throw NumericError("linearized_spectrum", "no negative eigenvalue of L_minus L_plus on the coarse grid");

  // Pentadiagonal M = A_minus A_plus - sigma.
  const auto [dp, op] = blocks.symmetrized(blocks.pc());
  const auto [dm, om] = blocks.symmetrized(1.0);
  auto tri = [m](const RealVec& d, const RealVec& o, std::size_t i, std::size_t j) -> double {
    if (i == j) return d[i];
    if (j == i + 1) return o[i];
    if (i == j + 1) return o[j];
    return 0.0;
  };
  const double sigma = *coarse;
  BandMatrix<double> mat(m, 2, 2);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t lo = i >= 2 ? i - 2 : 0, hi = std::min(m - 1, i + 2);
    for (std::size_t j = lo; j <= hi; ++j) {
      double acc = 0.0;
      const std::size_t klo = std::max(lo, j >= 1 ? j - 1 : 0), khi = std::min(hi, j + 1);
      for (std::size_t k = klo; k <= khi; ++k) acc += tri(dm, om, i, k) * tri(dp, op, k, j);
      mat(i, j) = acc - (i == j ? sigma : 0.0);
    }
  }
  const BandMatrix<double> original = mat;
  BandLU<double> lu(std::move(mat));

  RealVec x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = std::sqrt(g.w(i)) * blocks.model().ground_state()[i];
  auto normalize = [](RealVec& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    s = std::sqrt(s);
    for (double& a : v) a /= s;
  };
  normalize(x);
  double lambda = sigma;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    lu.solve_in_place(std::span<double>(x));
    normalize(x);
    const RealVec mx = original.multiply(std::span<const double>(x));
    double rq = 0.0, res = 0.0;
    for (std::size_t i = 0; i < m; ++i) rq += x[i] * mx[i];
    for (std::size_t i = 0; i < m; ++i) res += std::pow(mx[i] - rq * x[i], 2);
    const double next = rq + sigma;
    // Applying M to x carries round-off of order ||M|| eps, so convergence is
    // judged on the eigenvalue; the block refinement below polishes the vector.
    const bool done = std::abs(next - lambda) <= opt.tolerance * std::abs(next) && std::sqrt(res) <= 1e-3 * std::abs(next);
    lambda = next;
    if (done) break;
  }
  if (it == opt.max_iterations) throw NumericError("linearized_spectrum", "inverse iteration did not converge");
  if (!(lambda < 0.0)) throw NumericError("linearized_spectrum", "no negative eigenvalue found (grid too coarse or r_max too small)");

  EigenPair pair;
  pair.e0 = std::sqrt(-lambda);
  pair.iterations = it + 1;
  pair.coarse_shift = sigma;
  pair.y1.resize(m);
  for (std::size_t i = 0; i < m; ++i) pair.y1[i] = x[i] / std::sqrt(g.w(i));
  pair.y2 = blocks.apply_plus(pair.y1);
  for (double& v : pair.y2) v = -v / pair.e0;

  // Inverse iteration on the block operator makes both components consistent
  // to round-off.
  BandLU<double> block_lu(blocks.shifted_operator(pair.e0 * (1.0 - 1e-10)));
  for (int k = 0; k < opt.refinement_steps; ++k) {
    RealVec v(2 * m);
    for (std::size_t i = 0; i < m; ++i) v[2 * i] = pair.y1[i], v[2 * i + 1] = pair.y2[i];
    block_lu.solve_in_place(std::span<double>(v));
    double s = 0.0;
    for (double a : v) s = std::max(s, std::abs(a));
    for (std::size_t i = 0; i < m; ++i) pair.y1[i] = v[2 * i] / s, pair.y2[i] = v[2 * i + 1] / s;
  }
  // Rayleigh quotient in the weighted inner product.
  {
    const RadialField y = pair.y_plus(blocks.grid_ptr());
    const RadialField ly = blocks.apply_operator(y);
    pair.e0 = (inner(ly, y) / inner(y, y)).real();
  }

  const RadialField y = pair.y_plus(blocks.grid_ptr());
  const double h1 = kinetic_norm(y);
  const double sign = pair.y1[0] >= 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < m; ++i) pair.y1[i] *= sign / h1, pair.y2[i] *= sign / h1;
  pair.h1_norm = 1.0;
  return pair;
}

}  // namespace thresh
