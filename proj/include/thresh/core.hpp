// Basic types shared by every module: the spatial dimension, the ground state
// profile W and the error types used across the library.
#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace thresh {

using cplx = std::complex<double>;
using RealVec = std::vector<double>;
using CplxVec = std::vector<cplx>;

/// Raised for invalid arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails (non-finite values, no
/// convergence, singular systems). `stage` names the producing module.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Spatial dimension d >= 3 of the radial problem.
class Dimension {
 public:
  explicit Dimension(int d) : d_(d) {
    if (d < 3) throw InvalidArgument("dimension must be >= 3, got " + std::to_string(d));
  }
  int value() const noexcept { return d_; }
  /// Critical power p_c = (d+2)/(d-2).
  double pc() const noexcept { return double(d_ + 2) / double(d_ - 2); }
  /// Sobolev exponent 2* = 2d/(d-2) = p_c + 1.
  double sobolev_exponent() const noexcept { return 2.0 * d_ / double(d_ - 2); }
  /// W is square integrable only for d >= 5.
  bool ground_state_in_l2() const noexcept { return d_ >= 5; }
  /// Surface area of the unit sphere S^{d-1}.
  double sphere_area() const noexcept {
    const double half = 0.5 * d_;
    return 2.0 * std::pow(std::numbers::pi, half) / std::tgamma(half);
  }
  friend bool operator==(const Dimension&, const Dimension&) = default;

 private:
  int d_;
};

inline double critical_exponent(int d) { return Dimension(d).pc(); }

/// Ground state W(r) = (1 + r^2/(d(d-2)))^{-(d-2)/2}.
inline double eval_w(const Dimension& dim, double r) {
  if (!std::isfinite(r) || r < 0.0) throw InvalidArgument("eval_w: radius must be finite and >= 0");
  const double d = dim.value();
  return std::pow(1.0 + r * r / (d * (d - 2.0)), -(d - 2.0) / 2.0);
}

/// Radial derivative W'(r).
inline double eval_w_prime(const Dimension& dim, double r) {
  const double d = dim.value();
  const double s = 1.0 + r * r / (d * (d - 2.0));
  return -(r / d) * std::pow(s, -d / 2.0);
}

/// Scaling generator (Lambda W)(r) = ((d-2)/2) W + r W'.
inline double eval_lambda_w(const Dimension& dim, double r) {
  return 0.5 * (dim.value() - 2.0) * eval_w(dim, r) + r * eval_w_prime(dim, r);
}

/// Phase/scale pair acting as e^{i theta} mu^{-(d-2)/2} u(r/mu).
struct SymmetryParams {
  double theta = 0.0;
  double mu = 1.0;
  SymmetryParams inverse() const { return {-theta, 1.0 / mu}; }
};

inline bool all_finite(const CplxVec& v) {
  for (const auto& z : v)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

inline bool all_finite(const RealVec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace thresh
