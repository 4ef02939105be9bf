// Radial grid, fields, the finite-volume radial Laplacian and the norms used
// throughout the library.
//
// Nodes are r_i = i*h for i = 0..n with h = r_max/n. Two weight sets live on
// the grid:
//  - cell weights: node i owns the shell [r_i - h/2, r_i + h/2] clipped to
//    [0, r_max]; the weight is its exact volume. They are the mass matrix of
//    the Laplacian, which is the flux-difference operator on these cells: it is
//    symmetric in the cell-weighted inner product, exact on quadratics, and at
//    the origin reduces to 2d (u_1 - u_0)/h^2, the ghost-node form of d u''(0).
//  - quadrature weights: composite trapezoid against omega r^{d-1} dr. For
//    smooth radial integrands r^{d-1} g(r^2) the odd derivatives at the origin
//    vanish up to order d-2, so the rule is accurate far beyond O(h^2).
//    integrate() and the energy functionals use these, with radial
//    derivatives from fourth-order central differences.
#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>

#include "thresh/core.hpp"

namespace thresh {

/// Outer boundary closure at r_max.
enum class BoundaryCondition {
  /// Fields continue beyond r_max proportionally to W. The exterior kinetic and
  /// potential energies of that continuation become a Robin flux term and a
  /// boundary-node weight on the nonlinearity.
  GroundStateTail,
  /// Zero ghost value one spacing beyond r_max.
  Dirichlet,
};

inline std::string to_string(BoundaryCondition bc) {
  return bc == BoundaryCondition::Dirichlet ? "dirichlet" : "ground-state-tail";
}

inline BoundaryCondition boundary_from_string(const std::string& s) {
  if (s == "dirichlet") return BoundaryCondition::Dirichlet;
  if (s == "ground-state-tail") return BoundaryCondition::GroundStateTail;
  throw InvalidArgument("unknown boundary condition '" + s + "'");
}

namespace detail {

// (a^d - b^d)/d for a = r + h/2, b = r - h/2 without cancellation.
inline double shell_volume(int d, double r, double half) {
  double acc = 0.0;
  double binom = 1.0;
  for (int k = 1; k <= d; ++k) {
    binom = binom * double(d - k + 1) / double(k);
    if (k % 2 == 1) acc += 2.0 * binom * std::pow(r, d - k) * std::pow(half, k);
  }
  return acc / d;
}

// \int_R^\infty W(r)^{2d/(d-2)} r^{d-1} dr, via s = r^2/(d(d-2)), y = 1/(1+s), z = sqrt(y).
inline double ground_state_potential_tail(const Dimension& dim, double r_max) {
  const double d = dim.value();
  const double scale = d * (d - 2.0);
  const double z_max = std::sqrt(1.0 / (1.0 + r_max * r_max / scale));
  auto integrand = [d](double z) { return 2.0 * std::pow(z, d - 1.0) * std::pow(1.0 - z * z, d / 2.0 - 1.0); };
  const double inner = boost::math::quadrature::gauss<double, 30>::integrate(integrand, 0.0, z_max);
  return 0.5 * std::pow(scale, d / 2.0) * inner;
}

}  // namespace detail

class RadialGrid {
 public:
  RadialGrid(Dimension dim, double r_max, int n, BoundaryCondition bc = BoundaryCondition::GroundStateTail)
      : dim_(dim), r_max_(r_max), n_(n), bc_(bc) {
    if (!(r_max > 0.0) || !std::isfinite(r_max)) throw InvalidArgument("build_grid: r_max must be positive");
    if (n < 16) throw InvalidArgument("build_grid: n must be >= 16");
    h_ = r_max / n;
    const int d = dim.value();
    const double omega = dim.sphere_area();
    const double half = 0.5 * h_;
    nodes_.resize(n + 1);
    weights_.resize(n + 1);
    quad_.resize(n + 1);
    faces_.resize(n);
    for (int i = 0; i <= n; ++i) nodes_[i] = i * h_;
    nodes_[n] = r_max;
    weights_[0] = omega * std::pow(half, d) / d;
    for (int i = 1; i < n; ++i) weights_[i] = omega * detail::shell_volume(d, nodes_[i], half);
    weights_[n] = omega * (std::pow(r_max, d) - std::pow(r_max - half, d)) / d;
    for (int i = 0; i < n; ++i) faces_[i] = omega * std::pow(nodes_[i] + half, d - 1) / h_;
    for (int i = 0; i <= n; ++i) quad_[i] = omega * std::pow(nodes_[i], d - 1) * h_ * (i == n ? 0.5 : 1.0);

    if (bc == BoundaryCondition::GroundStateTail) {
      const double wr = eval_w(dim, r_max);
      const double pot_tail = detail::ground_state_potential_tail(dim, r_max);
      const double kin_tail = -std::pow(r_max, d - 1) * eval_w_prime(dim, r_max) * wr + pot_tail;
      boundary_flux_ = omega * kin_tail / (wr * wr);
      potential_tail_ = omega * pot_tail / std::pow(wr, dim.sobolev_exponent());
    } else {
      boundary_flux_ = omega * std::pow(r_max, d - 1) / h_;
      potential_tail_ = 0.0;
    }
  }

  const Dimension& dim() const noexcept { return dim_; }
  int d() const noexcept { return dim_.value(); }
  double r_max() const noexcept { return r_max_; }
  /// Number of intervals; the grid has n+1 nodes.
  int n() const noexcept { return n_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double h() const noexcept { return h_; }
  BoundaryCondition boundary() const noexcept { return bc_; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  /// Cell weights (mass matrix of the Laplacian).
  std::span<const double> weights() const noexcept { return weights_; }
  /// Trapezoid weights against omega r^{d-1} dr.
  std::span<const double> quadrature_weights() const noexcept { return quad_; }
  double r(std::size_t i) const { return nodes_[i]; }
  double w(std::size_t i) const { return weights_[i]; }
  double q(std::size_t i) const { return quad_[i]; }
  /// omega * r_{i+1/2}^{d-1} / h for the face between nodes i and i+1.
  double face(std::size_t i) const { return faces_[i]; }
  /// Coefficient of |u_n|^2 in the Dirichlet form contributed by the exterior.
  double boundary_flux() const noexcept { return boundary_flux_; }
  /// Exterior contribution to \int |u|^{2*}, per unit |u_n|^{2*}.
  double potential_tail() const noexcept { return potential_tail_; }

  /// Volume of the ball of radius r_max.
  double ball_volume() const { return dim_.sphere_area() * std::pow(r_max_, d()) / d(); }

  bool same_as(const RadialGrid& o) const noexcept {
    return dim_ == o.dim_ && r_max_ == o.r_max_ && n_ == o.n_ && bc_ == o.bc_;
  }

 private:
  Dimension dim_;
  double r_max_;
  int n_;
  BoundaryCondition bc_;
  double h_ = 0.0;
  RealVec nodes_;
  RealVec weights_;
  RealVec quad_;
  RealVec faces_;
  double boundary_flux_ = 0.0;
  double potential_tail_ = 0.0;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

inline GridPtr build_grid(int d, double r_max, int n, BoundaryCondition bc = BoundaryCondition::GroundStateTail) {
  return std::make_shared<const RadialGrid>(Dimension(d), r_max, n, bc);
}

inline void require_same_grid(const RadialGrid& a, const RadialGrid& b, const char* where) {
  if (&a != &b && !a.same_as(b)) throw InvalidArgument(std::string(where) + ": grid mismatch");
}

/// Complex samples of a radial function on a grid.
class RadialField {
 public:
  RadialField() = default;
  explicit RadialField(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), cplx{}) {}
  RadialField(GridPtr grid, CplxVec values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size()) throw InvalidArgument("RadialField: length does not match grid");
  }
  RadialField(GridPtr grid, const RealVec& values) : grid_(std::move(grid)), values_(values.begin(), values.end()) {
    if (values_.size() != grid_->size()) throw InvalidArgument("RadialField: length does not match grid");
  }

  template <class F>
  static RadialField sample(GridPtr grid, F&& f) {
    RadialField out(grid);
    for (std::size_t i = 0; i < grid->size(); ++i) out.values_[i] = f(grid->r(i));
    return out;
  }

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }
  CplxVec& values() noexcept { return values_; }
  const CplxVec& values() const noexcept { return values_; }
  bool finite() const { return all_finite(values_); }

  RealVec real() const {
    RealVec out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = values_[i].real();
    return out;
  }
  RealVec imag() const {
    RealVec out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = values_[i].imag();
    return out;
  }
  RadialField conj() const {
    RadialField out(*this);
    for (auto& z : out.values_) z = std::conj(z);
    return out;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& z : values_) m = std::max(m, std::abs(z));
    return m;
  }

  RadialField& operator+=(const RadialField& o) {
    check(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  RadialField& operator-=(const RadialField& o) {
    check(o);
    for (std::size_t i = 0; i < size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  RadialField& operator*=(cplx s) {
    for (auto& z : values_) z *= s;
    return *this;
  }
  friend RadialField operator+(RadialField a, const RadialField& b) { return a += b; }
  friend RadialField operator-(RadialField a, const RadialField& b) { return a -= b; }
  friend RadialField operator*(cplx s, RadialField a) { return a *= s; }
  friend RadialField operator*(RadialField a, cplx s) { return a *= s; }

 private:
  void check(const RadialField& o) const { require_same_grid(*grid_, *o.grid_, "RadialField"); }

  GridPtr grid_;
  CplxVec values_;
};

/// Tridiagonal radial Laplacian. Row i reads
///   (Delta u)_i = (c_{i-1/2} u_{i-1} - (c_{i-1/2} + c_{i+1/2}) u_i + c_{i+1/2} u_{i+1}) / w_i
/// with the boundary flux replacing the missing outer face on the last row.
class DiscreteLaplacian {
 public:
  explicit DiscreteLaplacian(GridPtr grid) : grid_(std::move(grid)) {
    const std::size_t m = grid_->size();
    lower_.assign(m, 0.0);
    diag_.assign(m, 0.0);
    upper_.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double wi = grid_->w(i);
      const double left = i > 0 ? grid_->face(i - 1) : 0.0;
      const double right = i + 1 < m ? grid_->face(i) : grid_->boundary_flux();
      lower_[i] = left / wi;
      upper_[i] = i + 1 < m ? right / wi : 0.0;
      diag_[i] = -(left + right) / wi;
    }
  }

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  std::span<const double> lower() const noexcept { return lower_; }
  std::span<const double> diag() const noexcept { return diag_; }
  std::span<const double> upper() const noexcept { return upper_; }

  template <class T>
  std::vector<T> apply(std::span<const T> u) const {
    const std::size_t m = diag_.size();
    if (u.size() != m) throw InvalidArgument("apply_laplacian: grid mismatch");
    std::vector<T> out(m);
    for (std::size_t i = 0; i < m; ++i) {
      T acc = diag_[i] * u[i];
      if (i > 0) acc += lower_[i] * u[i - 1];
      if (i + 1 < m) acc += upper_[i] * u[i + 1];
      out[i] = acc;
    }
    return out;
  }
  RealVec apply(const RealVec& u) const { return apply<double>(std::span<const double>(u)); }
  CplxVec apply(const CplxVec& u) const { return apply<cplx>(std::span<const cplx>(u)); }
  RadialField apply(const RadialField& u) const {
    require_same_grid(*grid_, u.grid(), "apply_laplacian");
    return RadialField(u.grid_ptr(), apply(u.values()));
  }

  /// Symmetrized operator D^{1/2} Delta D^{-1/2}: diagonal and off-diagonal (i, i+1).
  std::pair<RealVec, RealVec> symmetrized() const {
    const std::size_t m = diag_.size();
    RealVec off(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) off[i] = grid_->face(i) / std::sqrt(grid_->w(i) * grid_->w(i + 1));
    return {diag_, off};
  }

 private:
  GridPtr grid_;
  RealVec lower_;
  RealVec diag_;
  RealVec upper_;
};

inline RadialField apply_laplacian(const DiscreteLaplacian& lap, const RadialField& u) { return lap.apply(u); }

/// Trapezoid approximation of \int_{|x| < r_max} u dx.
inline double integrate(std::span<const double> u, const RadialGrid& grid) {
  if (u.size() != grid.size()) throw InvalidArgument("integrate: grid mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i])) throw NumericError("discretization", "integrate: non-finite integrand");
    acc += grid.q(i) * u[i];
  }
  return acc;
}

/// Weighted inner product sum w_i u_i conj(v_i).
inline cplx inner(const RadialField& u, const RadialField& v) {
  require_same_grid(u.grid(), v.grid(), "inner");
  cplx acc{};
  for (std::size_t i = 0; i < u.size(); ++i) acc += u.grid().w(i) * u[i] * std::conj(v[i]);
  return acc;
}

/// Discrete Dirichlet form a(u, v) = sum_faces c (du)(conj dv) + boundary term,
/// equal to -<Delta u, v>_w.
inline cplx dirichlet_form(const RadialField& u, const RadialField& v) {
  require_same_grid(u.grid(), v.grid(), "dirichlet_form");
  const RadialGrid& g = u.grid();
  cplx acc{};
  for (std::size_t i = 0; i + 1 < u.size(); ++i) acc += g.face(i) * (u[i + 1] - u[i]) * std::conj(v[i + 1] - v[i]);
  const std::size_t n = u.size() - 1;
  acc += g.boundary_flux() * u[n] * std::conj(v[n]);
  return acc;
}

inline double dirichlet_energy(const RadialField& u) {
  const RadialGrid& g = u.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < u.size(); ++i) acc += g.face(i) * std::norm(u[i + 1] - u[i]);
  acc += g.boundary_flux() * std::norm(u[u.size() - 1]);
  if (!std::isfinite(acc)) throw NumericError("discretization", "non-finite kinetic energy");
  return acc;
}

namespace detail {

// Fourth-order central first derivative. Values left of the origin come from
// even reflection, values right of r_max from the W-shaped continuation.
inline CplxVec gradient4(const CplxVec& u, const RadialGrid& g) {
  const std::size_t m = u.size();
  const double h = g.h();
  const double wr = eval_w(g.dim(), g.r_max());
  const bool tail = g.boundary() == BoundaryCondition::GroundStateTail;
  auto at = [&](long i) -> cplx {
    if (i < 0) return u[std::size_t(-i)];
    if (i < long(m)) return u[std::size_t(i)];
    if (!tail) return cplx{};
    return u[m - 1] * (eval_w(g.dim(), g.r_max() + double(i - long(m) + 1) * h) / wr);
  };
  CplxVec du(m);
  for (long i = 0; i < long(m); ++i)
    du[std::size_t(i)] = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
  return du;
}

}  // namespace detail

/// H^1-dot inner product from fourth-order gradients and trapezoid weights,
/// including the exterior kinetic energy of the continuation beyond r_max.
inline cplx h1_inner(const RadialField& u, const RadialField& v) {
  require_same_grid(u.grid(), v.grid(), "h1_inner");
  const RadialGrid& g = u.grid();
  const CplxVec du = detail::gradient4(u.values(), g);
  const CplxVec dv = &u == &v ? du : detail::gradient4(v.values(), g);
  cplx acc{};
  for (std::size_t i = 0; i < du.size(); ++i) acc += g.q(i) * du[i] * std::conj(dv[i]);
  const std::size_t n = u.size() - 1;
  if (g.boundary() == BoundaryCondition::GroundStateTail) acc += g.boundary_flux() * u[n] * std::conj(v[n]);
  return acc;
}

/// ||u||_{H^1 dot}^2 from h1_inner.
inline double h1_energy(const RadialField& u) {
  const double e = h1_inner(u, u).real();
  if (!std::isfinite(e)) throw NumericError("discretization", "non-finite kinetic energy");
  return e;
}

/// \int |u|^q by trapezoid quadrature, plus the exterior continuation when q
/// is the Sobolev exponent and the grid carries a ground-state tail.
inline double lp_power(const RadialField& u, double q) {
  const RadialGrid& g = u.grid();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += g.q(i) * std::pow(std::abs(u[i]), q);
  if (g.potential_tail() > 0.0 && std::abs(q - g.dim().sobolev_exponent()) < 1e-14)
    acc += g.potential_tail() * std::pow(std::abs(u[u.size() - 1]), q);
  if (!std::isfinite(acc)) throw NumericError("discretization", "non-finite L^p integral");
  return acc;
}

/// Norm in the cell-weighted inner product.
inline double l2_norm(const RadialField& u) { return std::sqrt(inner(u, u).real()); }

/// ||u - v||_{H^1 dot}.
inline double h1_distance(const RadialField& u, const RadialField& v) { return std::sqrt(h1_energy(u - v)); }

namespace detail {

// Centered first difference; `parity` is the symmetry of u under r -> -r.
inline CplxVec radial_derivative(const CplxVec& u, double h, int parity) {
  const std::size_t m = u.size();
  CplxVec out(m);
  out[0] = parity > 0 ? cplx{} : (u[1] + u[1]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < m; ++i) out[i] = (u[i + 1] - u[i - 1]) / (2.0 * h);
  out[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h);
  return out;
}

inline CplxVec radial_derivative_n(const CplxVec& u, double h, int order) {
  CplxVec cur = u;
  int parity = 1;
  for (int k = 0; k < order; ++k) {
    cur = radial_derivative(cur, h, parity);
    parity = -parity;
  }
  return cur;
}

}  // namespace detail

inline constexpr int kDefaultHmmMaxOrder = 4;

/// Weighted Sobolev norm sum_{j<=m} ||<r>^{m-j} d_r^j u||_2 over the truncated domain.
inline double hmm_norm(const RadialField& u, int m, int m_max = kDefaultHmmMaxOrder) {
  if (m < 0 || m > m_max) throw InvalidArgument("hmm_norm: order " + std::to_string(m) + " exceeds m_max");
  const RadialGrid& g = u.grid();
  double total = 0.0;
  CplxVec deriv = u.values();
  int parity = 1;
  for (int j = 0; j <= m; ++j) {
    if (j > 0) {
      deriv = detail::radial_derivative(deriv, g.h(), parity);
      parity = -parity;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double weight = std::pow(1.0 + g.r(i) * g.r(i), 0.5 * (m - j));
      acc += g.q(i) * std::norm(weight * deriv[i]);
    }
    total += std::sqrt(acc);
  }
  return total;
}

/// max_i <r_i>^j |d_r^{m_der} u(r_i)|.
inline double weighted_sup_norm(const RadialField& u, double j, int m_der) {
  if (m_der < 0 || m_der > 2) throw InvalidArgument("weighted_sup_norm: derivative order must be 0..2");
  const RadialGrid& g = u.grid();
  const CplxVec deriv = detail::radial_derivative_n(u.values(), g.h(), m_der);
  double best = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    best = std::max(best, std::pow(1.0 + g.r(i) * g.r(i), 0.5 * j) * std::abs(deriv[i]));
  return best;
}

}  // namespace thresh
