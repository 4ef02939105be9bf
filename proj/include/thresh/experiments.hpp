// Scenario pipelines, the canonical threshold-solution experiments, sweeps and
// run directories.
//
// A pipeline computes everything in memory and returns a RunResult: output
// files with their producing module, certification checks and a summary.
// run() persists it into <out>/<scenario>-<config hash>/ via a staging
// directory renamed into place, so a failed run leaves no partial outputs and a
// completed directory is never modified again.
#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <Eigen/Core>

#include "thresh/config.hpp"
#include "thresh/io.hpp"

namespace thresh {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct Check {
  std::string name;
  std::string module;
  double value = 0.0;
  double bound = 0.0;
  std::string relation;  // "<=", ">=", "==" (value vs bound) or "info"
  bool pass = true;
  std::string detail;
};

inline Check check_le(std::string name, std::string module, double value, double bound, std::string detail = "") {
  return {std::move(name), std::move(module), value, bound, "<=", std::isfinite(value) && value <= bound, std::move(detail)};
}
inline Check check_ge(std::string name, std::string module, double value, double bound, std::string detail = "") {
  return {std::move(name), std::move(module), value, bound, ">=", std::isfinite(value) && value >= bound, std::move(detail)};
}
inline Check check_true(std::string name, std::string module, bool ok, std::string detail) {
  return {std::move(name), std::move(module), ok ? 1.0 : 0.0, 1.0, "==", ok, std::move(detail)};
}

inline json to_json(const Check& c) {
  json j = {{"name", c.name}, {"module", c.module}, {"value", c.value}, {"bound", c.bound}, {"relation", c.relation},
            {"pass", c.pass}};
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

struct OutputFile {
  std::string path;  // relative to the run directory
  std::string module;
  std::string content;
};

struct RunResult {
  ScenarioConfig config;
  std::vector<OutputFile> files;
  std::vector<Check> checks;
  json summary = json::object();

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
  void add(std::string path, std::string module, std::string content) {
    files.push_back({std::move(path), std::move(module), std::move(content)});
  }
  void add_json(std::string path, std::string module, const json& j) {
    add(std::move(path), std::move(module), j.dump(2) + "\n");
  }
};

struct RunOptions {
  int workers = 1;
  bool extended_checks = false;  // refinement studies behind --check
};

/// Rethrows any exception with the stage that raised it.
template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericError&) {
    throw;
  } catch (const InvalidArgument&) {
    throw;
  } catch (const std::exception& e) {
    throw NumericError(stage, e.what());
  }
}

// Continuum values of the ground-state functionals by adaptive quadrature.
struct ContinuumGroundState {
  double kinetic_sq = 0.0;   // ||grad W||^2
  double potential = 0.0;    // ||W||_{2*}^{2*}
  double energy = 0.0;
  double sobolev_quotient = 0.0;
};

inline ContinuumGroundState continuum_ground_state(int d) {
  const Dimension dim(d);
  boost::math::quadrature::exp_sinh<double> q;
  const double area = dim.sphere_area();
  const double qs = dim.sobolev_exponent();
  ContinuumGroundState c;
  // the integrands decay like r^{1-d}; far out the factors under/overflow
  const auto finite = [](double v) { return std::isfinite(v) ? v : 0.0; };
  c.kinetic_sq = area * q.integrate([&](double r) {
    const double wp = eval_w_prime(dim, r);
    return finite(wp * wp * std::pow(r, d - 1));
  });
  c.potential = area * q.integrate([&](double r) { return finite(std::pow(eval_w(dim, r), qs) * std::pow(r, d - 1)); });
  c.energy = 0.5 * c.kinetic_sq - (d - 2.0) / (2.0 * d) * c.potential;
  c.sobolev_quotient = std::pow(c.potential, 1.0 / qs) / std::sqrt(c.kinetic_sq);
  return c;
}

// ---------------------------------------------------------------------------
// shared construction

struct SpectralSetup {
  GridPtr grid;
  std::shared_ptr<const NlsModel> model;
  std::shared_ptr<const LinearizedBlocks> blocks;
  EigenPair pair;
  double residual = 0.0;
};

inline SpectralSetup spectral_setup(const GridConfig& gc, const EigenOptions& eo) {
  SpectralSetup s;
  s.grid = in_stage("discretization", [&] { return build_grid(gc.d, gc.r_max, gc.n, gc.boundary); });
  s.model = in_stage("discretization", [&] { return std::make_shared<const NlsModel>(s.grid, gc.balance); });
  s.blocks = std::make_shared<const LinearizedBlocks>(s.model);
  s.pair = in_stage("linearized_spectrum", [&] { return ground_mode(*s.blocks, eo); });
  s.residual = eigen_residual(*s.blocks, s.pair);
  return s;
}

inline double static_residual_ratio(const NlsModel& model) {
  const RadialField res = model.static_residual();
  RadialField nl = model.nonlinearity(model.ground_state_field());
  return l2_norm(res) / l2_norm(nl);
}

/// Runs `count` independent tasks on up to `workers` threads. Results are
/// stored by index, so the outcome does not depend on execution order.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const std::size_t nthreads = std::min<std::size_t>(std::max(workers, 1), count);
  if (nthreads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < nthreads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// ground state

inline RunResult run_ground_state(const ScenarioConfig& c, const RunOptions& opt) {
  RunResult out;
  out.config = c;
  const auto grid = build_grid(c.grid.d, c.grid.r_max, c.grid.n, c.grid.boundary);
  const NlsModel model(grid, c.grid.balance);
  const RadialField w = model.ground_state_field();
  const double kin2 = h1_energy(w);
  const double e = energy(w);
  const double poho = std::abs(e - kin2 / c.grid.d) / e;
  const double stat = static_residual_ratio(model);
  const double quotient = sobolev_quotient(w);
  const ContinuumGroundState cont = continuum_ground_state(c.grid.d);

  json rep = {{"d", c.grid.d},
              {"r_max", c.grid.r_max},
              {"n", c.grid.n},
              {"balance", to_string(c.grid.balance)},
              {"energy", e},
              {"kinetic_norm", std::sqrt(kin2)},
              {"pohozaev_defect", poho},
              {"static_residual", stat},
              {"sobolev_quotient", quotient},
              {"continuum", {{"energy", cont.energy}, {"kinetic_norm", std::sqrt(cont.kinetic_sq)},
                             {"sobolev_quotient", cont.sobolev_quotient}}}};
  out.checks.push_back(check_le("pohozaev_defect", "ground_state", poho, c.checks.pohozaev));
  out.checks.push_back(check_le("static_residual", "discretization", stat, c.checks.static_residual));
  out.checks.push_back(check_le("energy_vs_continuum", "ground_state", std::abs(e - cont.energy) / cont.energy,
                                c.checks.pohozaev));
  if (opt.extended_checks && c.grid.balance == Balance::Plain) {
    const NlsModel coarse(build_grid(c.grid.d, c.grid.r_max, c.grid.n / 2, c.grid.boundary), Balance::Plain);
    const double order = std::log2(static_residual_ratio(coarse) / stat);
    rep["static_residual_order"] = order;
    out.checks.push_back(check_le("static_residual_order", "discretization", std::abs(order - c.checks.static_order),
                                  c.checks.static_order_band, "observed order " + std::to_string(order)));
  }
  out.summary = rep;
  out.add("ground_state.csv", "ground_state", field_csv(w));
  out.add_json("ground_state.json", "ground_state", rep);
  return out;
}

// ---------------------------------------------------------------------------
// spectrum

inline RunResult run_spectrum(const ScenarioConfig& c, const RunOptions& opt) {
  RunResult out;
  out.config = c;
  const SpectralSetup s = spectral_setup(c.grid, c.eigen);
  json rep = eigen_sidecar(s.pair, *s.grid, s.residual);
  out.checks.push_back(check_ge("e0_positive", "linearized_spectrum", s.pair.e0, 0.0));
  out.checks.back().pass = s.pair.e0 > 0.0;
  out.checks.push_back(check_le("eigen_residual", "linearized_spectrum", s.residual, c.checks.eigen_residual));
  if (opt.extended_checks) {
    GridConfig finer = c.grid, wider = c.grid;
    finer.n *= 2;
    wider.n *= 2, wider.r_max *= 2;
    std::vector<GridConfig> variants{finer, wider};
    std::vector<double> e0s(2);
    parallel_for(2, opt.workers, [&](std::size_t i) { e0s[i] = spectral_setup(variants[i], c.eigen).pair.e0; });
    const double dn = std::abs(e0s[0] - s.pair.e0) / s.pair.e0, dr = std::abs(e0s[1] - s.pair.e0) / s.pair.e0;
    rep["e0_n_doubled"] = e0s[0];
    rep["e0_r_max_doubled"] = e0s[1];
    out.checks.push_back(check_le("e0_stable_n_doubling", "linearized_spectrum", dn, c.checks.e0_stability));
    out.checks.push_back(check_le("e0_stable_r_max_doubling", "linearized_spectrum", dr, c.checks.e0_stability));
    // kernel relations hold exactly for the continuum; on the plain model the
    // interior defect is the truncation error
    const double r_cut = c.grid.r_max / 2;
    const auto plain = [&](int n) {
      return build_blocks(build_grid(c.grid.d, c.grid.r_max, n, c.grid.boundary), Balance::Plain);
    };
    const KernelResiduals k1 = kernel_residuals(plain(c.grid.n), r_cut);
    const KernelResiduals k2 = kernel_residuals(plain(2 * c.grid.n), r_cut);
    const double om = std::log2(k1.minus_w / k2.minus_w), op = std::log2(k1.plus_lambda_w / k2.plus_lambda_w);
    rep["kernel"] = {{"minus_w", k1.minus_w}, {"plus_lambda_w", k1.plus_lambda_w}, {"order_minus", om},
                     {"order_plus", op}};
    out.checks.push_back(check_le("kernel_minus_order", "linearized_spectrum", std::abs(om - 2.0),
                                  c.checks.kernel_order_band, "observed order " + std::to_string(om)));
    out.checks.push_back(check_le("kernel_plus_order", "linearized_spectrum", std::abs(op - 2.0),
                                  c.checks.kernel_order_band, "observed order " + std::to_string(op)));
  }
  out.summary = rep;
  out.add("y_plus.csv", "linearized_spectrum", field_csv(s.pair.y_plus(s.grid)));
  out.add_json("y_plus.json", "linearized_spectrum", rep);
  return out;
}

// ---------------------------------------------------------------------------
// near solution

inline SeriesOptions series_options(const SeriesConfig& sc) {
  SeriesOptions so;
  so.k = sc.k;
  so.a = sc.a;
  so.j_max = sc.j_max;
  so.max_condition = sc.max_condition;
  return so;
}

/// ||(L - j e0) Phi_j - i F_j|| / ||F_j|| for j >= 2 (cell-weighted L2).
inline std::vector<double> profile_residuals(const NearSolution& near) {
  std::vector<double> out;
  for (int j = 2; j <= near.k(); ++j) {
    const RadialField& phi = near.profiles[std::size_t(j - 1)];
    const RadialField& f = near.forcings[std::size_t(j - 2)];
    RadialField r = near.blocks->apply_operator(phi) - cplx{j * near.e0} * phi - cplx{0.0, 1.0} * f;
    out.push_back(l2_norm(r) / l2_norm(f));
  }
  return out;
}

inline RunResult run_build_series(const ScenarioConfig& c, const RunOptions&) {
  RunResult out;
  out.config = c;
  const SpectralSetup s = spectral_setup(c.grid, c.eigen);
  const NearSolution near = in_stage("series_builder", [&] { return build_near_solution(s.blocks, s.pair, series_options(c.series)); });
  const double t_k = validity_start(near, c.series.validity_bound);
  RateWindow win;
  win.t_begin = t_k;
  win.span = c.series.window_span;
  win.step = c.series.window_step;
  win.floor_factor = c.series.floor_factor;
  const ResidualReport rr = in_stage("series_builder", [&] { return residual_rate(near, win); });
  const std::vector<double> pres = profile_residuals(near);
  const double expected = (c.series.k + 1) * s.pair.e0;

  json manifest = {{"d", c.grid.d},
                   {"k", c.series.k},
                   {"a", c.series.a},
                   {"e0", s.pair.e0},
                   {"t_k", t_k},
                   {"validity_bound", c.series.validity_bound},
                   {"eigen_residual", s.residual},
                   {"profile_residuals", pres},
                   {"conditions", near.conditions},
                   {"expected_rate", expected},
                   {"residual_report", residual_report_json(rr)}};
  json files = json::array();
  for (int j = 1; j <= near.k(); ++j) {
    const std::string name = "near_solution/phi_" + std::to_string(j) + ".csv";
    out.add(name, "series_builder", field_csv(near.profiles[std::size_t(j - 1)]));
    files.push_back(name);
  }
  manifest["profiles"] = files;
  out.add_json("near_solution/manifest.json", "series_builder", manifest);

  out.checks.push_back(check_le("eigen_residual", "linearized_spectrum", s.residual, c.checks.eigen_residual));
  for (std::size_t i = 0; i < pres.size(); ++i)
    out.checks.push_back(check_le("profile_residual_j" + std::to_string(i + 2), "series_builder", pres[i],
                                  c.checks.profile_residual));
  out.checks.push_back(check_le("residual_rate", "series_builder", std::abs(rr.rate - expected) / expected,
                                c.checks.series_rate, "fitted " + std::to_string(rr.rate) + " vs (k+1)e0 " +
                                                          std::to_string(expected)));
  out.summary = manifest;
  return out;
}

// ---------------------------------------------------------------------------
// evolution of a near solution

struct NearSolutionOutcome {
  double e0 = 0.0;
  double eigen_residual = 0.0;
  double t_k = 0.0;
  double t_seed = 0.0;
  double seed_smallness = 0.0;
  double seed_energy_defect = 0.0;  // (E(u0) - E(W)) / E(W), discrete Hamiltonian
  std::optional<EvolutionTrace> forward, backward, refined;
  std::optional<ClassificationReport> forward_report, backward_report;
  std::optional<DichotomyResult> forward_kinetic, backward_kinetic;
  double refine_shift = 0.0;  // |t*(dt) - t*(dt/2)| / |t*(dt) - t_seed|
  std::string refined_direction;
};

inline double blowup_time(const EvolutionTrace& tr) { return 0.5 * (tr.t_star_low + tr.t_star_high); }

/// Seeds u0 = W_k^a(t_seed) where the perturbation is `seed_smallness` of W,
/// evolves forward and backward and classifies both directions.
inline NearSolutionOutcome evolve_near_solution(const ScenarioConfig& c, int workers = 1) {
  NearSolutionOutcome o;
  const SpectralSetup s = spectral_setup(c.grid, c.eigen);
  o.e0 = s.pair.e0;
  o.eigen_residual = s.residual;
  const NearSolution near = in_stage("series_builder", [&] { return build_near_solution(s.blocks, s.pair, series_options(c.series)); });
  o.t_k = validity_start(near, c.series.validity_bound);
  o.t_seed = validity_start(near, c.series.seed_smallness);
  o.seed_smallness = smallness_ratio(near, o.t_seed);
  const RadialField u0 = assemble(near, o.t_seed);
  const double ew = s.model->hamiltonian(s.model->ground_state_field());
  o.seed_energy_defect = (s.model->hamiltonian(u0) - ew) / ew;

  auto config_for = [&](int dir, double dt) {
    EvolverConfig e = c.evolver;
    e.dt = dt;
    e.t_start = o.t_seed;
    e.t_end = o.t_seed + (dir > 0 ? c.run.forward_span : -c.run.backward_span);
    return e;
  };
  std::vector<int> dirs;
  if (c.run.forward) dirs.push_back(1);
  if (c.run.backward) dirs.push_back(-1);
  std::vector<EvolutionTrace> traces(dirs.size());
  in_stage("evolver", [&] {
    parallel_for(dirs.size(), workers, [&](std::size_t i) { traces[i] = evolve(s.model, u0, config_for(dirs[i], c.evolver.dt)); });
    return 0;
  });
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    ClassificationReport rep = classify(traces[i], c.thresholds);
    DichotomyResult kin = kinetic_dichotomy(traces[i], c.thresholds.deadband);
    if (dirs[i] > 0) o.forward = std::move(traces[i]), o.forward_report = rep, o.forward_kinetic = kin;
    else o.backward = std::move(traces[i]), o.backward_report = rep, o.backward_kinetic = kin;
  }
  if (c.run.refine_blowup) {
    const EvolutionTrace* hit = nullptr;
    int dir = 0;
    if (o.backward && o.backward->termination == Termination::BlowupDetected) hit = &*o.backward, dir = -1;
    else if (o.forward && o.forward->termination == Termination::BlowupDetected) hit = &*o.forward, dir = 1;
    if (hit) {
      o.refined = in_stage("evolver", [&] { return evolve(s.model, u0, config_for(dir, 0.5 * c.evolver.dt)); });
      o.refined_direction = dir > 0 ? "forward" : "backward";
      if (o.refined->termination == Termination::BlowupDetected)
        o.refine_shift = std::abs(blowup_time(*hit) - blowup_time(*o.refined)) / std::abs(blowup_time(*hit) - o.t_seed);
      else
        o.refine_shift = std::numeric_limits<double>::infinity();
    }
  }
  return o;
}

inline json outcome_json(const NearSolutionOutcome& o, const ScenarioConfig& c) {
  json j = {{"d", c.grid.d},
            {"a", c.series.a},
            {"k", c.series.k},
            {"e0", o.e0},
            {"eigen_residual", o.eigen_residual},
            {"t_k", o.t_k},
            {"t_seed", o.t_seed},
            {"seed_smallness", o.seed_smallness},
            {"seed_energy_defect", o.seed_energy_defect}};
  auto side = [&](const char* key, const std::optional<EvolutionTrace>& tr, const std::optional<ClassificationReport>& rep,
                  const std::optional<DichotomyResult>& kin) {
    if (!tr) return;
    json r = classification_json(*rep, c.thresholds);
    r["termination"] = termination_json(*tr);
    r["kinetic_all_samples"] = {{"side", to_string(kin->side)}, {"violations", kin->violations.size()},
                                {"max_excess", kin->max_excess}, {"min_excess", kin->min_excess}};
    r["energy_drift"] = energy_drift(*tr);
    j[key] = r;
  };
  side("forward", o.forward, o.forward_report, o.forward_kinetic);
  side("backward", o.backward, o.backward_report, o.backward_kinetic);
  if (o.refined) {
    j["refinement"] = {{"direction", o.refined_direction},
                       {"dt", 0.5 * c.evolver.dt},
                       {"termination", termination_json(*o.refined)},
                       {"relative_shift", o.refine_shift}};
  }
  return j;
}

/// Checks of the threshold-solution behaviors on a near-solution run: forward
/// convergence to W at rate e0 with a fixed kinetic side; backward scattering
/// for a < 0 and finite-time blowup for a > 0.
inline std::vector<Check> outcome_checks(const NearSolutionOutcome& o, const ScenarioConfig& c) {
  std::vector<Check> out;
  const bool above = c.series.a > 0.0;
  if (o.forward) {
    const auto& rep = *o.forward_report;
    out.push_back(check_true("forward_converges_to_W", "diagnostics", rep.regime == Regime::ConvergesToW,
                             "regime " + to_string(rep.regime)));
    const double rate = rep.rate ? rep.rate->rate : std::numeric_limits<double>::quiet_NaN();
    out.push_back(check_le("forward_rate_vs_e0", "diagnostics", std::abs(rate - o.e0) / o.e0, c.run.rate_tolerance,
                           "fitted " + std::to_string(rate) + " vs e0 " + std::to_string(o.e0)));
    const KineticSide want = above ? KineticSide::Above : KineticSide::Below;
    out.push_back(check_true("forward_kinetic_side", "diagnostics", o.forward_kinetic->side == want,
                             "expected " + to_string(want) + ", observed " + to_string(o.forward_kinetic->side)));
    out.push_back(check_le("forward_energy_drift", "evolver", energy_drift(*o.forward), c.checks.energy_drift));
  }
  if (o.backward) {
    const auto& rep = *o.backward_report;
    const Regime want = above ? Regime::Blowup : Regime::ScatteringProxy;
    out.push_back(check_true(above ? "backward_blowup" : "backward_scattering_proxy", "diagnostics", rep.regime == want,
                             "regime " + to_string(rep.regime)));
  }
  if (o.refined)
    out.push_back(check_le("blowup_time_refinement", "evolver", o.refine_shift, c.run.refine_tolerance,
                           "relative move of t* under dt/2"));
  return out;
}

inline RunResult run_near_solution(const ScenarioConfig& c, const RunOptions& opt) {
  RunResult out;
  out.config = c;
  NearSolutionOutcome o = evolve_near_solution(c, opt.workers);
  out.summary = outcome_json(o, c);
  out.checks = outcome_checks(o, c);
  if (o.forward) {
    out.add("forward_trace.csv", "evolver", trace_csv(*o.forward));
    out.add_json("forward_termination.json", "evolver", termination_json(*o.forward));
  }
  if (o.backward) {
    out.add("backward_trace.csv", "evolver", trace_csv(*o.backward));
    out.add_json("backward_termination.json", "evolver", termination_json(*o.backward));
  }
  if (o.refined) out.add("refined_trace.csv", "evolver", trace_csv(*o.refined));
  out.add_json("report.json", "diagnostics", out.summary);
  return out;
}

/// Default configuration of the W+/W- experiment in dimension d; sign picks
/// the branch through the sign of the unstable-mode amplitude.
inline ScenarioConfig canonical_wpm_config(int d, int sign) {
  if (sign != 1 && sign != -1) throw InvalidArgument("canonical_wpm: sign must be +1 or -1");
  ScenarioConfig c = scenario_defaults(Scenario::NearSolutionRun);
  c.grid.d = d;
  c.series.a = sign;
  validate(c);
  return c;
}

inline RunResult canonical_wpm(int d, int sign, const RunOptions& opt = {}) {
  return run_near_solution(canonical_wpm_config(d, sign), opt);
}

// ---------------------------------------------------------------------------
// custom data

inline RunResult run_classify(const ScenarioConfig& c, const RunOptions&) {
  RunResult out;
  out.config = c;
  const auto grid = build_grid(c.grid.d, c.grid.r_max, c.grid.n, c.grid.boundary);
  const auto model = std::make_shared<const NlsModel>(grid, c.grid.balance);
  RadialField u0(grid);
  const auto& ini = c.classify.initial;
  if (ini.kind == "field") {
    RadialField f = parse_field_csv(read_text(ini.path));
    if (!f.grid().same_as(*grid)) throw ConfigError("classify.initial.path", "field grid does not match the config grid");
    u0 = RadialField(grid, f.values());
  } else {
    u0 = model->ground_state_field();
  }
  u0 = std::polar(ini.factor, ini.phase) * u0;
  EvolverConfig e = c.evolver;
  e.t_start = 0.0;
  e.t_end = c.classify.direction * c.classify.span;
  const EvolutionTrace tr = in_stage("evolver", [&] { return evolve(model, u0, e); });
  const ClassificationReport rep = classify(tr, c.thresholds);
  json j = classification_json(rep, c.thresholds);
  const double ew = model->hamiltonian(model->ground_state_field());
  j["energy_ratio"] = model->hamiltonian(u0) / ew;
  j["kinetic_ratio"] = kinetic_norm(u0) / tr.reference_kinetic;
  j["termination"] = termination_json(tr);
  j["energy_drift"] = energy_drift(tr);
  if (!c.classify.expect.empty())
    out.checks.push_back(check_true("expected_regime", "diagnostics", to_string(rep.regime) == c.classify.expect,
                                    "expected " + c.classify.expect + ", observed " + to_string(rep.regime)));
  out.summary = j;
  out.add("trace.csv", "evolver", trace_csv(tr));
  out.add_json("termination.json", "evolver", termination_json(tr));
  out.add_json("report.json", "diagnostics", j);
  return out;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepCell {
  int d = 6, n = 0, k = 1;
  double a = 1.0;
  double e0 = 0.0, eigen_residual = 0.0;
  double t_k = 0.0, t_k_shifted = 0.0;
  double rate = 0.0, expected_rate = 0.0, rate_error = 0.0;
  std::string status = "ok";
};

inline std::vector<SweepCell> sweep_cells(const ScenarioConfig& c, int workers) {
  std::vector<SweepCell> cells;
  for (int d : c.sweep.d)
    for (int n : c.sweep.n)
      for (int k : c.sweep.k)
        for (double a : c.sweep.a) cells.push_back({d, n, k, a});

  // one read-only spectral setup per distinct grid
  std::map<std::pair<int, int>, std::size_t> key_index;
  std::vector<std::pair<int, int>> keys;
  for (const auto& cell : cells)
    if (key_index.emplace(std::pair{cell.d, cell.n}, keys.size()).second) keys.emplace_back(cell.d, cell.n);
  std::vector<std::shared_ptr<const SpectralSetup>> setups(keys.size());
  std::vector<std::string> setup_errors(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    GridConfig g = c.grid;
    g.d = keys[i].first, g.n = keys[i].second;
    try {
      setups[i] = std::make_shared<const SpectralSetup>(spectral_setup(g, c.eigen));
    } catch (const std::exception& e) {
      setup_errors[i] = e.what();
    }
  });

  parallel_for(cells.size(), workers, [&](std::size_t i) {
    SweepCell& cell = cells[i];
    const std::size_t si = key_index.at({cell.d, cell.n});
    if (!setups[si]) return void(cell.status = "failed: " + setup_errors[si]);
    const SpectralSetup& s = *setups[si];
    cell.e0 = s.pair.e0;
    cell.eigen_residual = s.residual;
    try {
      SeriesConfig sc = c.series;
      sc.k = cell.k, sc.a = cell.a;
      const NearSolution near = build_near_solution(s.blocks, s.pair, series_options(sc));
      cell.t_k = validity_start(near, sc.validity_bound);
      cell.t_k_shifted = cell.t_k - std::log(std::abs(cell.a)) / cell.e0;
      RateWindow win;
      win.t_begin = cell.t_k;
      win.span = sc.window_span;
      win.step = sc.window_step;
      win.floor_factor = sc.floor_factor;
      cell.rate = residual_rate(near, win).rate;
      cell.expected_rate = (cell.k + 1) * cell.e0;
      cell.rate_error = std::abs(cell.rate - cell.expected_rate) / cell.expected_rate;
    } catch (const std::exception& e) {
      cell.status = std::string("failed: ") + e.what();
    }
  });
  return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "d,n,k,a,e0,eigen_residual,t_k,t_k_shifted,rate,expected_rate,rate_rel_error,status\n";
  for (const auto& c : cells) {
    std::string status = c.status;
    std::replace(status.begin(), status.end(), ',', ';');
    out += std::to_string(c.d) + "," + std::to_string(c.n) + "," + std::to_string(c.k) + "," + fmt_number(c.a) + "," +
           fmt_number(c.e0) + "," + fmt_number(c.eigen_residual) + "," + fmt_number(c.t_k) + "," +
           fmt_number(c.t_k_shifted) + "," + fmt_number(c.rate) + "," + fmt_number(c.expected_rate) + "," +
           fmt_number(c.rate_error) + "," + status + "\n";
  }
  return out;
}

inline RunResult run_sweep(const ScenarioConfig& c, const RunOptions& opt) {
  RunResult out;
  out.config = c;
  const std::vector<SweepCell> cells = sweep_cells(c, opt.workers);
  json summary = {{"cells", cells.size()}};
  int failed = 0;
  for (const auto& cell : cells) {
    if (cell.status != "ok") {
      ++failed;
      out.checks.push_back(check_true("cell_d" + std::to_string(cell.d) + "_n" + std::to_string(cell.n) + "_k" +
                                          std::to_string(cell.k) + "_a" + fmt_number(cell.a),
                                      "experiments", false, cell.status));
      continue;
    }
    out.checks.push_back(check_le("rate_d" + std::to_string(cell.d) + "_n" + std::to_string(cell.n) + "_k" +
                                      std::to_string(cell.k) + "_a" + fmt_number(cell.a),
                                  "series_builder", cell.rate_error, c.sweep.rate_tolerance));
  }
  summary["failed_cells"] = failed;

  // e0 refinement order from three successive resolutions per dimension
  json orders = json::object();
  for (int d : c.sweep.d) {
    std::map<int, double> by_n;
    for (const auto& cell : cells)
      if (cell.d == d && cell.status == "ok") by_n[cell.n] = cell.e0;
    if (by_n.size() >= 3) {
      std::vector<std::pair<int, double>> v(by_n.begin(), by_n.end());
      json arr = json::array();
      for (std::size_t i = 0; i + 2 < v.size(); ++i) {
        const double ratio = double(v[i + 1].first) / v[i].first;
        arr.push_back(std::log(std::abs(v[i].second - v[i + 1].second) / std::abs(v[i + 1].second - v[i + 2].second)) /
                      std::log(ratio));
      }
      orders[std::to_string(d)] = arr;
    }
  }
  summary["e0_refinement_order"] = orders;

  // t_k - ln|a|/e0 should not depend on |a|
  json collapse = json::array();
  for (int d : c.sweep.d)
    for (int n : c.sweep.n)
      for (int k : c.sweep.k)
        for (int sign : {-1, 1}) {
          double lo = std::numeric_limits<double>::infinity(), hi = -lo;
          int count = 0;
          for (const auto& cell : cells)
            if (cell.d == d && cell.n == n && cell.k == k && (cell.a > 0) == (sign > 0) && cell.status == "ok")
              lo = std::min(lo, cell.t_k_shifted), hi = std::max(hi, cell.t_k_shifted), ++count;
          if (count >= 2) collapse.push_back({{"d", d}, {"n", n}, {"k", k}, {"sign", sign}, {"spread", hi - lo}});
        }
  summary["translation_collapse"] = collapse;
  out.summary = summary;
  out.add("sweep.csv", "experiments", sweep_csv(cells));
  out.add_json("summary.json", "experiments", summary);
  return out;
}

// ---------------------------------------------------------------------------
// dispatch and persistence

inline RunResult execute(const ScenarioConfig& c, const RunOptions& opt = {}) {
  validate(c);
  switch (c.scenario) {
    case Scenario::GroundState: return run_ground_state(c, opt);
    case Scenario::Spectrum: return run_spectrum(c, opt);
    case Scenario::BuildSeries: return run_build_series(c, opt);
    case Scenario::NearSolutionRun: return run_near_solution(c, opt);
    case Scenario::ClassifyCustom: return run_classify(c, opt);
    case Scenario::Sweep: return run_sweep(c, opt);
  }
  throw InvalidArgument("unknown scenario");
}

inline std::string run_directory_name(const ScenarioConfig& c) { return to_string(c.scenario) + "-" + config_hash(c); }

inline json toolchain_json() {
  return {{"artifact", kArtifactVersion},
#if defined(__clang__)
          {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
          {"compiler", std::string("gcc ") + __VERSION__},
#endif
          {"cxx_standard", long(__cplusplus)},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline json manifest_json(const RunResult& r, const RunOptions& opt, double wall_seconds) {
  json files = json::array();
  for (const auto& f : r.files) files.push_back({{"path", f.path}, {"module", f.module}, {"bytes", f.content.size()}});
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  return {{"schema_version", kSchemaVersion},
          {"scenario", to_string(r.config.scenario)},
          {"config_hash", config_hash(r.config)},
          {"config", to_json(r.config)},
          {"versions", toolchain_json()},
          {"wall_seconds", wall_seconds},
          {"workers", opt.workers},
          {"extended_checks", opt.extended_checks},
          {"outputs", files},
          {"checks", checks},
          {"passed", r.passed()},
          {"summary", r.summary}};
}

struct RunRecord {
  std::filesystem::path directory;
  json manifest;
  bool cached = false;
  bool passed() const { return manifest.value("passed", false); }
};

/// Writes a completed run. An existing directory for the same config hash is
/// reused as a cache unless extended checks were requested and it lacks them.
inline RunRecord run(const ScenarioConfig& c, const std::filesystem::path& out_root, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  validate(c);
  const fs::path dir = out_root / run_directory_name(c);
  if (fs::exists(dir / "manifest.json")) {
    json m = json::parse(read_text((dir / "manifest.json").string()));
    if (!opt.extended_checks || m.value("extended_checks", false)) return {dir, m, true};
    throw InvalidArgument("run directory " + dir.string() +
                          " exists without extended checks; remove it to rerun with --check");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult r = execute(c, opt);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json manifest = manifest_json(r, opt, wall);

  fs::create_directories(out_root);
  const fs::path staging = out_root / (".staging-" + run_directory_name(c) + "-" +
                                       std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  try {
    fs::create_directories(staging);
    for (const auto& f : r.files) {
      const fs::path p = staging / f.path;
      fs::create_directories(p.parent_path());
      write_text(p.string(), f.content);
    }
    write_text((staging / "manifest.json").string(), manifest.dump(2) + "\n");
    fs::rename(staging, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return {dir, manifest, false};
}

}  // namespace thresh
