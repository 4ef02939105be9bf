// Field snapshots, traces and sidecars on disk.
//
// Field CSV:
//   # d=6 r_max=60 n=6000 boundary=ground-state-tail
//   r,re,im
//   0,1,0
//   ...
// Numbers are written with 17 significant digits so files round-trip exactly
// and identical runs produce identical bytes.
#pragma once

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "thresh/diagnostics.hpp"

namespace thresh {

using json = nlohmann::json;

inline std::string fmt_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string field_header(const RadialGrid& g) {
  return "# d=" + std::to_string(g.d()) + " r_max=" + fmt_number(g.r_max()) + " n=" + std::to_string(g.n()) +
         " boundary=" + to_string(g.boundary()) + "\n";
}

inline std::string field_csv(const RadialField& u) {
  const RadialGrid& g = u.grid();
  std::string out = field_header(g) + "r,re,im\n";
  out.reserve(out.size() + u.size() * 60);
  for (std::size_t i = 0; i < u.size(); ++i)
    out += fmt_number(g.r(i)) + "," + fmt_number(u[i].real()) + "," + fmt_number(u[i].imag()) + "\n";
  return out;
}

/// Parses a field CSV; the grid is rebuilt from the header.
inline RadialField parse_field_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("#", 0) != 0) throw InvalidArgument("field CSV: missing '# d=.. r_max=.. n=..' header");
  int d = 0, n = 0;
  double r_max = 0.0;
  std::string boundary = to_string(BoundaryCondition::GroundStateTail);
  {
    std::istringstream hs(line.substr(1));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      try {
        if (key == "d") d = std::stoi(val);
        else if (key == "r_max") r_max = std::stod(val);
        else if (key == "n") n = std::stoi(val);
        else if (key == "boundary") boundary = val;
      } catch (const std::exception&) {
        throw InvalidArgument("field CSV: bad header value for '" + key + "'");
      }
    }
  }
  if (d == 0 || n == 0 || !(r_max > 0.0)) throw InvalidArgument("field CSV: header must carry d, r_max and n");
  auto grid = build_grid(d, r_max, n, boundary_from_string(boundary));
  if (!std::getline(in, line) || line.rfind("r,re,im", 0) != 0) throw InvalidArgument("field CSV: expected column line 'r,re,im'");
  RadialField u(grid);
  std::size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (i >= u.size()) throw InvalidArgument("field CSV: more rows than n+1");
    double r, re, im;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &re, &im) != 3) throw InvalidArgument("field CSV: malformed row " + std::to_string(i));
    if (std::abs(r - grid->r(i)) > 1e-9 * std::max(1.0, r_max)) throw InvalidArgument("field CSV: node radius does not match the header grid");
    u[i++] = {re, im};
  }
  if (i != u.size()) throw InvalidArgument("field CSV: expected n+1 rows");
  return u;
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string trace_csv(const EvolutionTrace& tr) {
  std::string out = "t,E,kinetic,max_amp,h1_dist_to_modW,theta_fit,mu_fit,potential_ratio\n";
  for (const auto& s : tr.samples)
    out += fmt_number(s.t) + "," + fmt_number(s.energy) + "," + fmt_number(s.kinetic) + "," + fmt_number(s.max_amp) +
           "," + fmt_number(s.h1_dist) + "," + fmt_number(s.theta) + "," + fmt_number(s.mu) + "," +
           fmt_number(s.potential_ratio) + "\n";
  return out;
}

/// Reads the columns written by trace_csv back into samples.
inline std::vector<TraceSample> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,E,kinetic,max_amp,h1_dist_to_modW,theta_fit,mu_fit", 0) != 0)
    throw InvalidArgument("trace CSV: unexpected header");
  std::vector<TraceSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceSample s;
    const int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &s.t, &s.energy, &s.kinetic,
                                &s.max_amp, &s.h1_dist, &s.theta, &s.mu, &s.potential_ratio);
    if (got < 7) throw InvalidArgument("trace CSV: malformed row");
    out.push_back(s);
  }
  return out;
}

inline json termination_json(const EvolutionTrace& tr) {
  json j = {{"status", to_string(tr.termination)},
            {"reason", tr.reason},
            {"direction", tr.direction > 0 ? "forward" : "backward"},
            {"steps", tr.steps},
            {"min_dt", tr.min_dt},
            {"reflection_horizon", tr.reflection_horizon},
            {"reflection_warning", tr.reflection_warning},
            {"reference_kinetic", tr.reference_kinetic},
            {"reference_amplitude", tr.reference_amp}};
  if (!tr.samples.empty()) j["t_first"] = tr.samples.front().t, j["t_last"] = tr.samples.back().t;
  if (tr.termination != Termination::Completed) j["t_star"] = {tr.t_star_low, tr.t_star_high};
  return j;
}

inline json eigen_sidecar(const EigenPair& pair, const RadialGrid& g, double residual) {
  return {{"d", g.d()},
          {"r_max", g.r_max()},
          {"n", g.n()},
          {"boundary", to_string(g.boundary())},
          {"e0", pair.e0},
          {"residual", residual},
          {"normalization", {{"h1_norm", pair.h1_norm}, {"sign", "y1(0) > 0"}}},
          {"iterations", pair.iterations},
          {"coarse_shift", pair.coarse_shift}};
}

inline json residual_report_json(const ResidualReport& r) {
  return {{"rate", r.rate},
          {"weighted_rate", r.weighted_rate},
          {"fit_rms", r.fit_rms},
          {"floor", r.floor},
          {"window", {r.t_begin, r.t_end}},
          {"max_smallness", r.max_smallness},
          {"samples", r.times.size()}};
}

inline json classification_json(const ClassificationReport& c, const ClassifyOptions& opt) {
  json j = {{"regime", to_string(c.regime)},
            {"kinetic_side", to_string(c.kinetic_side)},
            {"kinetic_violations", c.kinetic_violations},
            {"theta", c.theta},
            {"mu", c.mu},
            {"min_distance", c.min_distance},
            {"t_min_distance", c.t_min_distance},
            {"reflection_horizon", c.reflection_horizon},
            {"thresholds",
             {{"converge_tolerance", opt.converge_tolerance},
              {"proxy_threshold", opt.proxy_threshold},
              {"kinetic_deadband", opt.deadband}}}};
  if (c.rate) {
    j["rate"] = c.rate->rate;
    j["windows"] = {{"rate_fit", {c.rate->t_begin, c.rate->t_end}}, {"rate_fit_samples", c.rate->samples}};
    j["rate_fit_residual"] = c.rate->residual;
  } else {
    j["rate"] = nullptr;
  }
  if (c.proxy_time) j["proxy_time"] = *c.proxy_time;
  if (c.regime == Regime::Blowup) j["t_star"] = {c.t_star_low, c.t_star_high};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

}  // namespace thresh
