// Time integration of i u_t + Delta_h u + kappa |u|^{p-1} u = 0.
//
// crank-nicolson-full: the midpoint rule with the difference-quotient
// nonlinearity
//   G(u1, u0) = (F(|u1|^2) - F(|u0|^2)) / (|u1|^2 - |u0|^2) (u1 + u0) / 2,
//   F(s) = 2/(p+1) s^{(p+1)/2},
// which conserves the discrete mass and Hamiltonian exactly; the implicit
// nonlinearity is resolved by fixed-point iteration around one banded solve.
// strang: half nonlinear phase rotation, Cayley (or exact exponential) linear
// step, half nonlinear phase rotation.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <memory>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "thresh/modulation.hpp"

namespace thresh {

enum class Scheme { CrankNicolsonFull, Strang, StrangExact };

inline std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::CrankNicolsonFull: return "crank-nicolson-full";
    case Scheme::Strang: return "strang";
    case Scheme::StrangExact: return "strang-exact";
  }
  return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
  if (s == "crank-nicolson-full") return Scheme::CrankNicolsonFull;
  if (s == "strang") return Scheme::Strang;
  if (s == "strang-exact") return Scheme::StrangExact;
  throw InvalidArgument("unknown scheme '" + s + "'");
}

struct EvolverConfig {
  double dt = 2e-3;  // magnitude; direction comes from the time span
  double t_start = 0.0;
  double t_end = 1.0;
  Scheme scheme = Scheme::CrankNicolsonFull;
  double amp_factor = 10.0;
  double grad_factor = 10.0;
  double sample_interval = 0.25;
  int snapshot_every = 0;  // samples between stored fields; 0 stores none
  double dt_floor = 1e-7;
  bool adaptive = true;  // shrink dt like max|u|^{-(p-1)} as the solution concentrates
  double iteration_tolerance = 1e-14;
  int max_iterations = 60;
  bool fit_modulation = true;
  int exact_exponential_limit = 2500;  // largest grid for strang-exact
  // Early stops, 0 disables: after the modulated distance has fallen by this
  // factor and then risen by it again from its minimum; once the
  // potential-to-kinetic ratio drops below this value.
  double departure_factor = 0.0;
  double scattering_stop = 0.0;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("evolver.dt must be positive");
    if (!(dt_floor > 0.0) || !(dt > dt_floor)) throw InvalidArgument("evolver.dt must exceed evolver.dt_floor > 0");
    if (!(amp_factor > 1.0) || !(grad_factor > 1.0)) throw InvalidArgument("blowup thresholds must exceed 1");
    if (!std::isfinite(t_start) || !std::isfinite(t_end)) throw InvalidArgument("evolver time span must be finite");
    if (!(sample_interval > 0.0)) throw InvalidArgument("evolver.sample_interval must be positive");
    if (snapshot_every < 0) throw InvalidArgument("evolver.snapshot_every must be nonnegative");
    if (max_iterations < 1) throw InvalidArgument("evolver.max_iterations must be positive");
    if (departure_factor < 0.0 || (departure_factor > 0.0 && departure_factor <= 1.0))
      throw InvalidArgument("evolver.departure_factor must be 0 or exceed 1");
    if (scattering_stop < 0.0) throw InvalidArgument("evolver.scattering_stop must be nonnegative");
  }
};

enum class Termination { Completed, BlowupDetected, NonFinite };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::BlowupDetected: return "blowup-detected";
    case Termination::NonFinite: return "nan";
  }
  return "?";
}

struct TraceSample {
  double t = 0.0;
  double energy = 0.0;  // discrete Hamiltonian of the model
  double kinetic = 0.0;
  double max_amp = 0.0;
  double h1_dist = 0.0;  // to the fitted W_[theta, mu]
  double theta = 0.0;
  double mu = 1.0;
  double potential_ratio = 0.0;  // ((d-2)/(2d)) ||u||_{2*}^{2*} / (1/2 ||grad u||^2)
  double mass = 0.0;
};

struct EvolutionTrace {
  std::vector<TraceSample> samples;
  std::vector<std::pair<double, RadialField>> snapshots;
  Termination termination = Termination::Completed;
  std::string reason;
  double t_star_low = 0.0, t_star_high = 0.0;  // bracket when blowup was detected
  double direction = 1.0;
  double reflection_horizon = 0.0;  // elapsed time before boundary reflections matter
  bool reflection_warning = false;
  long steps = 0;
  double min_dt = 0.0;
  double reference_kinetic = 0.0;  // ||grad W|| on the grid
  double reference_amp = 1.0;      // max W

  RealVec column(double TraceSample::*field) const {
    RealVec out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.*field);
    return out;
  }
};

class Stepper {
 public:
  Stepper(std::shared_ptr<const NlsModel> model, const EvolverConfig& cfg) : model_(std::move(model)), cfg_(cfg) {
    cfg_.validate();
    if (cfg_.scheme == Scheme::StrangExact) {
      const std::size_t m = model_->grid().size();
      if (int(m) > cfg_.exact_exponential_limit)
        throw InvalidArgument("strang-exact needs a dense eigendecomposition; grid has " + std::to_string(m) +
                              " nodes, limit " + std::to_string(cfg_.exact_exponential_limit));
      auto [diag, off] = model_->laplacian().symmetrized();
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(Eigen::Index(m), Eigen::Index(m));
      for (std::size_t i = 0; i < m; ++i) {
        s(i, i) = diag[i];
        if (i + 1 < m) s(i, i + 1) = s(i + 1, i) = off[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
      if (es.info() != Eigen::Success) throw NumericError("evolver", "eigendecomposition of the Laplacian failed");
      eigvals_ = es.eigenvalues();
      eigvecs_ = es.eigenvectors();
    }
  }

  const NlsModel& model() const { return *model_; }

  /// One step of signed size dt; returns nullopt if the implicit solve fails.
  std::optional<RadialField> step(const RadialField& u, double dt) {
    switch (cfg_.scheme) {
      case Scheme::CrankNicolsonFull: return midpoint_step(u, dt);
      case Scheme::Strang:
      case Scheme::StrangExact: {
        RadialField v = phase_rotation(u, 0.5 * dt);
        v = cfg_.scheme == Scheme::Strang ? cayley(v, dt) : exact_linear(v, dt);
        return phase_rotation(v, 0.5 * dt);
      }
    }
    return std::nullopt;
  }

  int last_iterations() const noexcept { return iterations_; }

 private:
  const BandLU<cplx>& factor(double dt) {
    for (auto& [key, lu] : lu_cache_)
      if (key == dt) return lu;
    {
      const DiscreteLaplacian& lap = model_->laplacian();
      const std::size_t m = lap.diag().size();
      BandMatrix<cplx> a(m, 1, 1);
      const cplx c{0.0, -0.5 * dt};
      for (std::size_t i = 0; i < m; ++i) {
        a(i, i) = 1.0 + c * lap.diag()[i];
        if (i > 0) a(i, i - 1) = c * lap.lower()[i];
        if (i + 1 < m) a(i, i + 1) = c * lap.upper()[i];
      }
      // adaptive runs revisit a short ladder of step sizes
      if (lu_cache_.size() >= 12) lu_cache_.pop_front();
      lu_cache_.emplace_back(dt, BandLU<cplx>(std::move(a)));
    }
    return lu_cache_.back().second;
  }

  // (I + i dt/2 Delta) u
  CplxVec explicit_half(const RadialField& u, double dt) const {
    CplxVec b = model_->laplacian().apply(u.values());
    const cplx c{0.0, 0.5 * dt};
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = u[i] + c * b[i];
    return b;
  }

  RadialField cayley(const RadialField& u, double dt) {
    CplxVec b = explicit_half(u, dt);
    factor(dt).solve_in_place(std::span<cplx>(b));
    return RadialField(u.grid_ptr(), std::move(b));
  }

  RadialField exact_linear(const RadialField& u, double dt) const {
    const RadialGrid& g = u.grid();
    const Eigen::Index m = Eigen::Index(u.size());
    Eigen::VectorXcd x(m);
    for (Eigen::Index i = 0; i < m; ++i) x[i] = std::sqrt(g.w(i)) * u[i];
    Eigen::VectorXcd c = eigvecs_.transpose() * x;
    for (Eigen::Index i = 0; i < m; ++i) c[i] *= std::polar(1.0, dt * eigvals_[i]);
    x = eigvecs_ * c;
    RadialField out(u.grid_ptr());
    for (Eigen::Index i = 0; i < m; ++i) out[i] = x[i] / std::sqrt(g.w(i));
    return out;
  }

  RadialField phase_rotation(const RadialField& u, double tau) const {
    RadialField out(u);
    const double p = model_->pc();
    for (std::size_t i = 0; i < u.size(); ++i)
      out[i] *= std::polar(1.0, tau * model_->kappa()[i] * std::pow(std::abs(u[i]), p - 1.0));
    return out;
  }

  // (F(x) - F(y)) / (x - y) with F(s) = s^q / q, q = (p+1)/2.
  static double quotient(double x, double y, double q) {
    if (x < y) std::swap(x, y);
    if (x == 0.0) return 0.0;
    if (y == 0.0) return std::pow(x, q - 1.0) / q;
    const double l = std::log(x / y);
    if (l < 1e-300) return std::pow(y, q - 1.0);
    return std::pow(y, q - 1.0) * std::expm1(q * l) / (q * std::expm1(l));
  }

  // Same quotient when 2q is an integer n, in terms of a = sqrt(x), b = sqrt(y):
  // (a^n - b^n) / (q (a^2 - b^2)) = sum_k a^k b^{n-1-k} / (q (a + b)).
  static double quotient_integer(double a, double b, int n, double q) {
    const double s = a + b;
    if (s == 0.0) return 0.0;
    double bp[16];
    bp[0] = 1.0;
    for (int k = 1; k < n; ++k) bp[k] = bp[k - 1] * b;
    double acc = 0.0, ak = 1.0;
    for (int k = 0; k < n; ++k, ak *= a) acc += ak * bp[n - 1 - k];
    return acc / (q * s);
  }

  std::optional<RadialField> midpoint_step(const RadialField& u0, double dt) {
    const std::size_t m = u0.size();
    const double q = 0.5 * (model_->pc() + 1.0);
    const RealVec& kappa = model_->kappa();
    const CplxVec base = explicit_half(u0, dt);
    const BandLU<cplx>& lu = factor(dt);
    RealVec s0(m), a0(m);
    for (std::size_t i = 0; i < m; ++i) s0[i] = std::norm(u0[i]), a0[i] = std::sqrt(s0[i]);
    const double twice_q = 2.0 * q;
    const int n_int = int(std::lround(twice_q));
    const bool integer_power = std::abs(twice_q - n_int) < 1e-12 && n_int >= 2 && n_int <= 16;
    CplxVec u1 = u0.values();
    const cplx idt{0.0, dt};
    CplxVec rhs(m);
    for (iterations_ = 1; iterations_ <= cfg_.max_iterations; ++iterations_) {
      for (std::size_t i = 0; i < m; ++i) {
        const double qt = integer_power ? quotient_integer(std::sqrt(std::norm(u1[i])), a0[i], n_int, q)
                                        : quotient(std::norm(u1[i]), s0[i], q);
        rhs[i] = base[i] + idt * kappa[i] * qt * 0.5 * (u1[i] + u0[i]);
      }
      lu.solve_in_place(std::span<cplx>(rhs));
      double change2 = 0.0, scale2 = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        change2 = std::max(change2, std::norm(rhs[i] - u1[i]));
        scale2 = std::max(scale2, std::norm(rhs[i]));
      }
      const double change = std::sqrt(change2), scale = std::sqrt(scale2);
      u1.swap(rhs);
      if (!std::isfinite(change)) return std::nullopt;
      if (change <= cfg_.iteration_tolerance * std::max(1.0, scale)) return RadialField(u0.grid_ptr(), std::move(u1));
    }
    return std::nullopt;
  }

  std::shared_ptr<const NlsModel> model_;
  EvolverConfig cfg_;
  std::deque<std::pair<double, BandLU<cplx>>> lu_cache_;
  int iterations_ = 0;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
};

/// One step of signed size dt.
inline RadialField step(const std::shared_ptr<const NlsModel>& model, const RadialField& u, double dt,
                        const EvolverConfig& cfg = {}) {
  if (!u.finite()) throw InvalidArgument("step: non-finite field");
  Stepper s(model, cfg);
  auto out = s.step(u, dt);
  if (!out || !out->finite()) throw NumericError("evolver", "non-finite step output (blowup suspected)");
  return *out;
}

namespace detail {

inline TraceSample measure(const NlsModel& model, const RadialField& u, double t, bool fit) {
  TraceSample s;
  s.t = t;
  s.energy = model.hamiltonian(u);
  const double k2 = h1_energy(u);
  s.kinetic = std::sqrt(k2);
  s.max_amp = u.max_abs();
  const double d = model.grid().d();
  const double pot = (d - 2.0) / (2.0 * d) * lp_power(u, model.grid().dim().sobolev_exponent());
  s.potential_ratio = k2 > 0.0 ? pot / (0.5 * k2) : 0.0;
  s.mass = inner(u, u).real();
  if (fit && s.max_amp > 0.0) {
    const ModulationFit mf = fit_modulation(u);
    s.h1_dist = mf.distance;
    s.theta = mf.theta;
    s.mu = mf.mu;
  } else {
    s.h1_dist = h1_distance(u, model.ground_state_field());
  }
  return s;
}

}  // namespace detail

/// Time for waves launched from the core to reach r_max and return halfway,
/// r_max / (2 c) with group speed c = 2 sqrt(||grad u||^2 / ||u||^2).
inline double reflection_horizon(const RadialField& u) {
  const double m = inner(u, u).real();
  const double k = h1_energy(u);
  if (!(m > 0.0) || !(k > 0.0)) return std::numeric_limits<double>::infinity();
  return u.grid().r_max() / (2.0 * 2.0 * std::sqrt(k / m));
}

inline EvolutionTrace evolve(const std::shared_ptr<const NlsModel>& model, const RadialField& u0,
                             const EvolverConfig& cfg) {
  cfg.validate();
  require_same_grid(model->grid(), u0.grid(), "evolve");
  if (!u0.finite()) throw InvalidArgument("evolve: non-finite initial data");
  Stepper stepper(model, cfg);
  const double p = model->pc();
  const double dir = cfg.t_end >= cfg.t_start ? 1.0 : -1.0;

  EvolutionTrace trace;
  trace.direction = dir;
  trace.reference_kinetic = kinetic_norm(model->ground_state_field());
  trace.reference_amp = model->ground_state_field().max_abs();
  trace.reflection_horizon = reflection_horizon(u0);
  trace.reflection_warning = std::abs(cfg.t_end - cfg.t_start) > trace.reflection_horizon;
  trace.min_dt = cfg.dt;

  RadialField u = u0;
  double t = cfg.t_start;
  trace.samples.push_back(detail::measure(*model, u, t, cfg.fit_modulation));
  if (cfg.snapshot_every > 0) trace.snapshots.emplace_back(t, u);
  const double span = std::abs(cfg.t_end - cfg.t_start);
  int sample_index = 1;
  const double first_dist = trace.samples.front().h1_dist;
  double min_dist = first_dist;
  auto next_sample_time = [&] { return cfg.t_start + dir * std::min(span, sample_index * cfg.sample_interval); };

  while (dir * (cfg.t_end - t) > 0.0) {
    double h = cfg.dt;
    if (cfg.adaptive) {
      const double ratio = u.max_abs() / trace.reference_amp;
      // largest ladder value dt 2^{-j/4} not above dt / ratio^{p-1}
      if (ratio > 1.0) h = cfg.dt * std::exp2(-std::ceil(4.0 * (p - 1.0) * std::log2(ratio)) / 4.0);
    }
    if (h < cfg.dt_floor) {
      trace.samples.push_back(detail::measure(*model, u, t, false));
      trace.termination = Termination::BlowupDetected;
      trace.reason = "time step fell below the floor";
      trace.t_star_low = t;
      trace.t_star_high = t + dir * h * 10.0;
      break;
    }
    const double target = next_sample_time();
    bool lands = false;
    if (dir * (target - t) <= h * (1.0 + 1e-12)) h = std::abs(target - t), lands = true;
    auto next = stepper.step(u, dir * h);
    if (!next) {
      // implicit solve failed at this size: retry with a smaller step
      if (h * 0.5 < cfg.dt_floor) {
        trace.termination = Termination::BlowupDetected;
        trace.reason = "implicit step failed at the time-step floor";
        trace.t_star_low = t;
        trace.t_star_high = t + dir * h;
        break;
      }
      auto half = stepper.step(u, dir * h * 0.5);
      if (!half) {
        trace.termination = Termination::NonFinite;
        trace.reason = "implicit solve diverged";
        break;
      }
      next = std::move(half);
      h *= 0.5;
      lands = false;
    }
    const double t_prev = t;
    t = lands ? target : t + dir * h;
    ++trace.steps;
    if (!lands) trace.min_dt = std::min(trace.min_dt, h);
    if (!next->finite()) {
      trace.termination = Termination::NonFinite;
      trace.reason = "non-finite field";
      trace.t_star_low = t_prev;
      trace.t_star_high = t;
      break;
    }
    u = std::move(*next);

    const double amp = u.max_abs();
    if (amp > cfg.amp_factor * trace.reference_amp) {
      const double kin = kinetic_norm(u);
      if (kin > cfg.grad_factor * trace.reference_kinetic) {
        trace.samples.push_back(detail::measure(*model, u, t, false));
        trace.termination = Termination::BlowupDetected;
        trace.reason = "amplitude and gradient thresholds exceeded";
        trace.t_star_low = t_prev;
        trace.t_star_high = t;
        break;
      }
    }
    if (lands) {
      trace.samples.push_back(detail::measure(*model, u, t, cfg.fit_modulation));
      if (cfg.snapshot_every > 0 && sample_index % cfg.snapshot_every == 0) trace.snapshots.emplace_back(t, u);
      ++sample_index;
      const TraceSample& s = trace.samples.back();
      min_dist = std::min(min_dist, s.h1_dist);
      if (cfg.departure_factor > 0.0 && min_dist * cfg.departure_factor < first_dist &&
          s.h1_dist > cfg.departure_factor * min_dist) {
        trace.reason = "stopped after departing from the ground-state orbit";
        break;
      }
      if (cfg.scattering_stop > 0.0 && s.potential_ratio < cfg.scattering_stop) {
        trace.reason = "stopped at the scattering threshold";
        break;
      }
    }
  }
  if (trace.termination == Termination::BlowupDetected && trace.t_star_low > trace.t_star_high)
    std::swap(trace.t_star_low, trace.t_star_high);
  return trace;
}

/// max |E(t) - E(0)| / |E(0)| over the samples.
inline double energy_drift(const EvolutionTrace& trace) {
  if (trace.samples.empty()) return 0.0;
  const double e0 = trace.samples.front().energy;
  double drift = 0.0;
  for (const auto& s : trace.samples) {
    if (!std::isfinite(s.energy)) break;
    drift = std::max(drift, std::abs(s.energy - e0));
  }
  return e0 != 0.0 ? drift / std::abs(e0) : drift;
}

}  // namespace thresh
