// The semi-discrete NLS
//   i u_t + Delta_h u + kappa |u|^{p_c - 1} u = 0
// on a radial grid. kappa is a per-node weight on the nonlinearity: in the
// plain model it is 1 except at the outer node, where it carries the exterior
// continuation of the potential energy. The well-balanced model calibrates
// kappa = -Delta_h W / W^{p_c} so that the sampled ground state is an exact
// discrete equilibrium; kappa = 1 + O(h^2) away from the boundary.
#pragma once

#include <cmath>
#include <string>

#include "thresh/ground_state.hpp"

namespace thresh {

enum class Balance { Plain, WellBalanced };

inline std::string to_string(Balance b) { return b == Balance::Plain ? "plain" : "well-balanced"; }

inline Balance balance_from_string(const std::string& s) {
  if (s == "plain") return Balance::Plain;
  if (s == "well-balanced") return Balance::WellBalanced;
  throw InvalidArgument("unknown balance '" + s + "'");
}

class NlsModel {
 public:
  NlsModel(GridPtr grid, Balance balance)
      : grid_(grid), lap_(grid), balance_(balance), pc_(grid->dim().pc()) {
    const std::size_t m = grid->size();
    w_.resize(m);
    for (std::size_t i = 0; i < m; ++i) w_[i] = eval_w(grid->dim(), grid->r(i));
    kappa_.assign(m, 1.0);
    kappa_[m - 1] += grid->potential_tail() / grid->w(m - 1);
    if (balance == Balance::WellBalanced) {
      const RealVec lw = lap_.apply(w_);
      for (std::size_t i = 0; i < m; ++i) kappa_[i] = -lw[i] / std::pow(w_[i], pc_);
      for (double k : kappa_)
        if (!(k > 0.0) || !std::isfinite(k))
          throw NumericError("discretization", "well-balanced weights are not positive; grid too coarse");
    }
  }

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const DiscreteLaplacian& laplacian() const noexcept { return lap_; }
  Balance balance() const noexcept { return balance_; }
  double pc() const noexcept { return pc_; }
  const RealVec& ground_state() const noexcept { return w_; }
  const RealVec& kappa() const noexcept { return kappa_; }
  RadialField ground_state_field() const { return RadialField(grid_, w_); }

  /// kappa |u|^{p-1} u.
  RadialField nonlinearity(const RadialField& u) const {
    RadialField out(u.grid_ptr());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = kappa_[i] * std::pow(std::abs(u[i]), pc_ - 1.0) * u[i];
    return out;
  }

  /// Delta_h W + kappa W^{p_c}.
  RadialField static_residual() const {
    RealVec r = lap_.apply(w_);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += kappa_[i] * std::pow(w_[i], pc_);
    return RadialField(grid_, r);
  }

  /// sum_i w_i kappa_i |u_i|^{p+1}.
  double potential_integral(const RadialField& u) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += grid_->w(i) * kappa_[i] * std::pow(std::abs(u[i]), pc_ + 1.0);
    return acc;
  }

  /// Discrete Hamiltonian conserved by the semi-discrete flow.
  double hamiltonian(const RadialField& u) const {
    const double h = 0.5 * dirichlet_energy(u) - potential_integral(u) / (pc_ + 1.0);
    if (!std::isfinite(h)) throw NumericError("evolver", "non-finite energy");
    return h;
  }

 private:
  GridPtr grid_;
  DiscreteLaplacian lap_;
  Balance balance_;
  double pc_;
  RealVec w_;
  RealVec kappa_;
};

}  // namespace thresh
