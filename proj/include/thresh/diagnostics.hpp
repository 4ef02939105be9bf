// Kinetic dichotomy and trajectory classification of evolution traces.
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "thresh/evolver.hpp"

namespace thresh {

enum class KineticSide { Below, At, Above, Mixed };
enum class Regime { ConvergesToW, ScatteringProxy, Blowup, Undetermined };

inline std::string to_string(KineticSide s) {
  switch (s) {
    case KineticSide::Below: return "below";
    case KineticSide::At: return "at";
    case KineticSide::Above: return "above";
    case KineticSide::Mixed: return "mixed";
  }
  return "?";
}

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::ConvergesToW: return "converges-to-W";
    case Regime::ScatteringProxy: return "scattering-proxy";
    case Regime::Blowup: return "blowup";
    case Regime::Undetermined: return "undetermined";
  }
  return "?";
}

struct DichotomyResult {
  KineticSide side = KineticSide::At;
  std::vector<double> violations;  // sample times on the minority side
  double max_excess = 0.0;         // max (kinetic - ||grad W||) / ||grad W||
  double min_excess = 0.0;
};

/// Sign of ||grad u(t)|| - ||grad W|| over the samples with index < end,
/// ignoring differences within the relative dead-band.
inline DichotomyResult kinetic_dichotomy(const EvolutionTrace& trace, double deadband = 1e-6,
                                         std::size_t end = std::size_t(-1)) {
  DichotomyResult r;
  const double ref = trace.reference_kinetic;
  if (!(ref > 0.0)) throw InvalidArgument("kinetic_dichotomy: trace lacks the reference kinetic norm");
  end = std::min(end, trace.samples.size());
  int above = 0, below = 0;
  r.max_excess = -std::numeric_limits<double>::infinity();
  r.min_excess = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < end; ++i) {
    const double ex = (trace.samples[i].kinetic - ref) / ref;
    r.max_excess = std::max(r.max_excess, ex);
    r.min_excess = std::min(r.min_excess, ex);
    if (ex > deadband) ++above;
    if (ex < -deadband) ++below;
  }
  if (above == 0 && below == 0) return r.side = KineticSide::At, r;
  const bool is_above = above >= below;
  r.side = is_above ? KineticSide::Above : KineticSide::Below;
  for (std::size_t i = 0; i < end; ++i) {
    const double ex = (trace.samples[i].kinetic - ref) / ref;
    if (is_above ? ex < -deadband : ex > deadband) r.violations.push_back(trace.samples[i].t);
  }
  if (!r.violations.empty()) r.side = KineticSide::Mixed;
  return r;
}

struct ClassifyOptions {
  double converge_tolerance = 1e-3;  // final modulated distance relative to ||grad W||
  double proxy_threshold = 0.05;
  double deadband = 1e-6;
};

struct ClassificationReport {
  Regime regime = Regime::Undetermined;
  KineticSide kinetic_side = KineticSide::At;
  std::vector<double> kinetic_violations;
  std::optional<RateFit> rate;
  double theta = 0.0, mu = 1.0;
  double min_distance = 0.0;
  double t_min_distance = 0.0;
  std::size_t window_end = 0;  // samples [0, window_end) precede departure
  std::optional<double> proxy_time;
  double reflection_horizon = 0.0;
  double t_star_low = 0.0, t_star_high = 0.0;
  std::string note;
};

/// Pre-departure window: samples up to the minimum of the modulated distance.
/// Before it the distance follows the decaying mode; after it the unstable
/// mode, seeded at the discretization floor, takes over.
inline std::size_t departure_index(const EvolutionTrace& trace) {
  std::size_t arg = 0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i)
    if (trace.samples[i].h1_dist < trace.samples[arg].h1_dist) arg = i;
  return arg;
}

inline ClassificationReport classify(const EvolutionTrace& trace, const ClassifyOptions& opt = {}) {
  ClassificationReport rep;
  if (trace.samples.empty()) return rep.note = "empty trace", rep;
  rep.reflection_horizon = trace.reflection_horizon;
  const std::size_t dep = departure_index(trace);
  rep.window_end = dep + 1;
  rep.min_distance = trace.samples[dep].h1_dist;
  rep.t_min_distance = trace.samples[dep].t;
  rep.theta = trace.samples[dep].theta;
  rep.mu = trace.samples[dep].mu;

  // the dichotomy is judged where the trace still shadows the threshold solution
  const bool decays = dep > 0;
  const DichotomyResult dich = kinetic_dichotomy(trace, opt.deadband, decays ? rep.window_end : std::size_t(-1));
  rep.kinetic_side = dich.side;
  rep.kinetic_violations = dich.violations;

  if (trace.termination == Termination::BlowupDetected) {
    rep.regime = Regime::Blowup;
    rep.t_star_low = trace.t_star_low;
    rep.t_star_high = trace.t_star_high;
    return rep;
  }
  if (trace.termination == Termination::NonFinite) {
    rep.note = "trace ended with non-finite values";
    return rep;
  }
  if (decays) {
    RealVec t, d;
    for (std::size_t i = 0; i <= dep; ++i) t.push_back(trace.samples[i].t), d.push_back(trace.samples[i].h1_dist);
    // time runs backward on backward traces; fit against elapsed time
    const double t0 = t.front();
    for (double& x : t) x = (x - t0) * trace.direction;
    try {
      RateFit f = rate_fit(t, d, rep.min_distance);
      f.t_begin = trace.samples.front().t + trace.direction * f.t_begin;
      f.t_end = trace.samples.front().t + trace.direction * f.t_end;
      rep.rate = f;
    } catch (const NumericError& e) {
      rep.note = e.what();
    }
    if (rep.rate && rep.rate->rate > 0.0 && rep.rate->decaying &&
        rep.min_distance < opt.converge_tolerance * trace.reference_kinetic) {
      rep.regime = Regime::ConvergesToW;
      return rep;
    }
  }
  for (const auto& s : trace.samples) {
    if (s.potential_ratio < opt.proxy_threshold) {
      const double elapsed = std::abs(s.t - trace.samples.front().t);
      if (elapsed <= trace.reflection_horizon) {
        rep.proxy_time = s.t;
        rep.regime = Regime::ScatteringProxy;
      } else {
        rep.note = "scattering threshold reached only after the reflection horizon";
      }
      break;
    }
  }
  return rep;
}

}  // namespace thresh
