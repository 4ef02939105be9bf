// Distance to the orbit of W under phase and scaling, and exponential rate fits.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "thresh/series.hpp"

namespace thresh {

struct ModulationFit {
  double theta = 0.0;
  double mu = 1.0;
  double distance = 0.0;
  int evaluations = 0;
  bool bracket_ok = true;
  std::vector<std::pair<double, double>> scan;  // (mu, distance) on the coarse scan
};

struct ModulationOptions {
  double scan_decades = 0.6;  // scan mu0 * 10^[-s, s]
  int scan_points = 25;
  double tolerance = 1e-10;  // on log mu
};

namespace detail {

// Precomputed pieces of ||u - e^{i theta} W_mu||^2 for fixed u.
class OrbitDistance {
 public:
  explicit OrbitDistance(const RadialField& u) : u_(u), du_(gradient4(u.values(), u.grid())) {}

  // Returns (distance, theta) minimized over theta at fixed mu. The distance
  // is measured on the difference itself; expanding the square would cancel
  // to sqrt(eps) accuracy.
  std::pair<double, double> at(double mu) {
    ++evaluations;
    const RadialField w = modulated_w(u_.grid_ptr(), {0.0, mu});
    const RadialGrid& g = u_.grid();
    const CplxVec dw = gradient4(w.values(), g);
    cplx cross{};
    for (std::size_t i = 0; i < dw.size(); ++i) cross += g.q(i) * du_[i] * std::conj(dw[i]);
    const std::size_t n = dw.size() - 1;
    const bool tail = g.boundary() == BoundaryCondition::GroundStateTail;
    if (tail) cross += g.boundary_flux() * u_[n] * std::conj(w[n]);
    const double theta = std::arg(cross);
    const cplx rot = std::polar(1.0, theta);
    double d2 = 0.0;
    for (std::size_t i = 0; i < dw.size(); ++i) d2 += g.q(i) * std::norm(du_[i] - rot * dw[i]);
    if (tail) d2 += g.boundary_flux() * std::norm(u_[n] - rot * w[n]);
    return {std::sqrt(d2), theta};
  }

  int evaluations = 0;

 private:
  const RadialField& u_;
  CplxVec du_;
};

}  // namespace detail

/// Minimizes ||u - W_[theta, mu]||_{H^1 dot}. theta is exact for each mu; mu is
/// scanned on a log grid around the amplitude-matched guess
/// mu0 = |u(0)|^{-2/(d-2)}, then refined by golden section.
inline ModulationFit fit_modulation(const RadialField& u, const ModulationOptions& opt = {}) {
  if (!(u.max_abs() > 0.0)) throw InvalidArgument("fit_modulation: zero field");
  const double d = u.grid().d();
  detail::OrbitDistance f(u);
  const double amp = std::abs(u[0]);
  const double mu0 = amp > 0.0 ? std::pow(amp, -2.0 / (d - 2.0)) : 1.0;

  ModulationFit fit;
  const int np = std::max(opt.scan_points, 5);
  std::vector<double> logs(np), dist(np);
  int best = 0;
  for (int i = 0; i < np; ++i) {
    logs[i] = std::log(mu0) + std::log(10.0) * opt.scan_decades * (2.0 * i / (np - 1) - 1.0);
    dist[i] = f.at(std::exp(logs[i])).first;
    fit.scan.emplace_back(std::exp(logs[i]), dist[i]);
    if (dist[i] < dist[best]) best = i;
  }
  fit.bracket_ok = best > 0 && best < np - 1;
  double a = logs[std::max(best - 1, 0)], b = logs[std::min(best + 1, np - 1)];
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f.at(std::exp(x1)).first, f2 = f.at(std::exp(x2)).first;
  while (b - a > opt.tolerance) {
    if (f1 < f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - g * (b - a);
      f1 = f.at(std::exp(x1)).first;
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + g * (b - a);
      f2 = f.at(std::exp(x2)).first;
    }
  }
  fit.mu = std::exp(0.5 * (a + b));
  std::tie(fit.distance, fit.theta) = f.at(fit.mu);
  // never worse than the unmodulated ground state
  const auto [d1, t1] = f.at(1.0);
  if (d1 < fit.distance) fit.mu = 1.0, fit.distance = d1, fit.theta = t1;
  fit.evaluations = f.evaluations;
  return fit;
}

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // rms of the log fit
  double t_begin = 0.0, t_end = 0.0;
  int samples = 0;
  bool decaying = false;
};

/// Least squares of log d(t) against t over [first sample, last sample above
/// 10 x floor]; rate is the negated slope.
inline RateFit rate_fit(const RealVec& times, const RealVec& distances, double floor) {
  if (times.size() != distances.size()) throw InvalidArgument("rate_fit: length mismatch");
  std::size_t last = 0;
  bool any = false;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (distances[i] > 10.0 * floor && std::isfinite(distances[i])) last = i, any = true;
  RealVec t, y;
  if (any)
    for (std::size_t i = 0; i <= last; ++i) {
      if (!(distances[i] > 0.0) || !std::isfinite(distances[i])) continue;
      t.push_back(times[i]);
      y.push_back(std::log(distances[i]));
    }
  if (t.size() < 5) throw NumericError("diagnostics", "rate fit window has fewer than 5 samples above the floor");
  const LinearFit lf = least_squares(t, y);
  RateFit r;
  r.rate = -lf.slope;
  r.intercept = lf.intercept;
  r.residual = lf.rms;
  r.t_begin = t.front();
  r.t_end = t.back();
  r.samples = int(t.size());
  // non-decaying when the fitted decay over the window is below 1%
  r.decaying = r.rate * std::abs(r.t_end - r.t_begin) > 0.01;
  return r;
}

}  // namespace thresh
