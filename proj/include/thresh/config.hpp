// Scenario configuration: JSON schema (version 1), scenario defaults and the
// resolved echo written into manifests.
//
// Every key is optional; missing keys take the scenario default and the
// resolved value is echoed, so a manifest never depends on hidden defaults.
// Unknown keys are errors. Errors carry the dotted path of the offending field.
#pragma once

#include <json.hpp>

#include <set>
#include <string>
#include <vector>

#include "thresh/diagnostics.hpp"

namespace thresh {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& path, const std::string& what) : InvalidArgument(path + ": " + what) {}
};

enum class Scenario { GroundState, Spectrum, BuildSeries, NearSolutionRun, ClassifyCustom, Sweep };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::GroundState: return "ground-state";
    case Scenario::Spectrum: return "spectrum";
    case Scenario::BuildSeries: return "build-series";
    case Scenario::NearSolutionRun: return "evolve-near-solution";
    case Scenario::ClassifyCustom: return "classify-custom";
    case Scenario::Sweep: return "sweep";
  }
  return "?";
}

/// Accepts the scenario tags and the CLI subcommand names.
inline Scenario scenario_from_string(const std::string& s) {
  if (s == "ground-state") return Scenario::GroundState;
  if (s == "spectrum") return Scenario::Spectrum;
  if (s == "build-series") return Scenario::BuildSeries;
  if (s == "evolve-near-solution" || s == "wpm") return Scenario::NearSolutionRun;
  if (s == "classify-custom" || s == "classify") return Scenario::ClassifyCustom;
  if (s == "sweep") return Scenario::Sweep;
  throw ConfigError("scenario", "unknown scenario '" + s + "'");
}

struct GridConfig {
  int d = 6;
  double r_max = 60.0;
  int n = 6000;
  BoundaryCondition boundary = BoundaryCondition::GroundStateTail;
  Balance balance = Balance::Plain;
};

struct SeriesConfig {
  int k = 3;
  double a = 1.0;
  int j_max = 0;
  double max_condition = 1e12;
  double validity_bound = 0.5;   // defines t_k
  double seed_smallness = 0.05;  // max |v|/W at the seed time of evolution runs
  double window_span = 40.0;     // residual-rate window, units of 1/e0
  double window_step = 0.25;
  double floor_factor = 10.0;
};

struct NearRunConfig {
  bool forward = true;
  bool backward = true;
  double forward_span = 150.0;
  double backward_span = 150.0;
  bool refine_blowup = true;  // rerun a blowup direction at dt/2 and compare t*
  double refine_tolerance = 0.05;
  double rate_tolerance = 0.15;
};

struct InitialData {
  std::string kind = "scaled-w";  // scaled-w | field
  double factor = 1.0;
  double phase = 0.0;
  std::string path;
};

struct ClassifyConfig {
  InitialData initial;
  double span = 60.0;
  int direction = 1;
  std::string expect;  // empty: no expectation check
};

struct SweepConfig {
  std::vector<int> d{6};
  std::vector<int> k{1, 2, 3, 4};
  std::vector<double> a{1.0};
  std::vector<int> n{6000};
  double rate_tolerance = 0.10;
};

struct CheckTolerances {
  double static_residual = 1e-5;
  double static_order = 2.0;
  double static_order_band = 0.3;
  double pohozaev = 1e-6;
  double eigen_residual = 1e-8;
  double e0_stability = 5e-5;  // relative, "4 significant digits"
  double kernel_order_band = 0.3;
  double profile_residual = 1e-8;
  double series_rate = 0.10;
  double energy_drift = 1e-6;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  Scenario scenario = Scenario::Spectrum;
  GridConfig grid;
  EigenOptions eigen;
  SeriesConfig series;
  EvolverConfig evolver;
  NearRunConfig run;
  ClassifyConfig classify;
  ClassifyOptions thresholds;
  SweepConfig sweep;
  CheckTolerances checks;
};

/// Defaults per scenario. The near-solution runs use the well-balanced model,
/// a large domain so backward scattering completes before reflections return,
/// and a high-order seed placed deep in the validity window.
inline ScenarioConfig scenario_defaults(Scenario s) {
  ScenarioConfig c;
  c.scenario = s;
  if (s == Scenario::NearSolutionRun) {
    c.grid.r_max = 240.0;
    c.grid.n = 12000;
    c.grid.balance = Balance::WellBalanced;
    c.series.k = 8;
    c.evolver.dt = 0.02;
    c.evolver.sample_interval = 0.25;
    c.evolver.departure_factor = 10.0;
    c.evolver.scattering_stop = 0.05;
  } else if (s == Scenario::ClassifyCustom) {
    c.grid.r_max = 240.0;
    c.grid.n = 12000;
    c.grid.balance = Balance::WellBalanced;
    c.evolver.dt = 0.02;
    c.evolver.scattering_stop = 0.05;
  } else if (s == Scenario::Sweep) {
    c.grid.n = 6000;
  }
  return c;
}

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(at(key), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(at(key), "must be finite");
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class T>
  void get(const std::string& key, std::vector<T>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->empty()) throw ConfigError(at(key), "expected a non-empty array");
      std::vector<T> tmp;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        const std::string p = at(key) + "[" + std::to_string(i) + "]";
        if constexpr (std::is_integral_v<T>) {
          if (!e.is_number_integer()) throw ConfigError(p, "expected an integer");
        } else {
          if (!e.is_number()) throw ConfigError(p, "expected a number");
        }
        tmp.push_back(e.get<T>());
      }
      out = std::move(tmp);
    }
  }
  template <class E, class F>
  void get_enum(const std::string& key, E& out, F parse) {
    std::string s;
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(at(key), "expected a string");
      try {
        out = parse(v->get<std::string>());
      } catch (const InvalidArgument& e) {
        throw ConfigError(at(key), e.what());
      }
    }
  }

  /// Sub-object reader; an absent key reads as an empty object.
  ObjectReader sub(const std::string& key) {
    static const json empty = json::object();
    const json* v = find(key);
    return ObjectReader(v ? *v : empty, at(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

}  // namespace detail

inline void validate(const ScenarioConfig& c) {
  using detail::require;
  require(c.grid.d >= 3 && c.grid.d <= 12, "grid.d", "dimension must lie in [3, 12]");
  require(c.grid.r_max > 0.0, "grid.r_max", "must be positive");
  require(c.grid.n >= 16, "grid.n", "must be at least 16");
  require(c.eigen.coarse_n >= 16, "eigen.coarse_n", "must be at least 16");
  require(c.eigen.tolerance > 0.0, "eigen.tolerance", "must be positive");
  require(c.eigen.max_iterations >= 1, "eigen.max_iterations", "must be positive");
  require(c.eigen.refinement_steps >= 0, "eigen.refinement_steps", "must be nonnegative");
  require(c.series.k >= 1, "series.k", "must be at least 1");
  require(c.series.a != 0.0, "series.a", "must be nonzero");
  require(c.series.j_max == 0 || c.series.j_max >= c.series.k, "series.j_max", "must be 0 or at least series.k");
  require(c.series.max_condition > 1.0, "series.max_condition", "must exceed 1");
  require(c.series.validity_bound > 0.0 && c.series.validity_bound < 1.0, "series.validity_bound", "must lie in (0, 1)");
  require(c.series.seed_smallness > 0.0 && c.series.seed_smallness < 1.0, "series.seed_smallness", "must lie in (0, 1)");
  require(c.series.window_span > 0.0, "series.window_span", "must be positive");
  require(c.series.window_step > 0.0 && c.series.window_step < c.series.window_span, "series.window_step",
          "must be positive and below window_span");
  require(c.series.floor_factor >= 1.0, "series.floor_factor", "must be at least 1");
  try {
    EvolverConfig e = c.evolver;
    e.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("evolver", e.what());
  }
  require(c.run.forward || c.run.backward, "run", "at least one of forward/backward must be enabled");
  require(c.run.forward_span > 0.0, "run.forward_span", "must be positive");
  require(c.run.backward_span > 0.0, "run.backward_span", "must be positive");
  require(c.run.refine_tolerance > 0.0, "run.refine_tolerance", "must be positive");
  require(c.run.rate_tolerance > 0.0, "run.rate_tolerance", "must be positive");
  const auto& ini = c.classify.initial;
  require(ini.kind == "scaled-w" || ini.kind == "field", "classify.initial.kind", "must be 'scaled-w' or 'field'");
  require(ini.kind != "field" || !ini.path.empty(), "classify.initial.path", "required when kind is 'field'");
  require(ini.factor > 0.0, "classify.initial.factor", "must be positive");
  require(c.classify.span > 0.0, "classify.span", "must be positive");
  require(c.classify.direction == 1 || c.classify.direction == -1, "classify.direction", "must be +1 or -1");
  if (!c.classify.expect.empty()) {
    const auto& e = c.classify.expect;
    require(e == "converges-to-W" || e == "scattering-proxy" || e == "blowup" || e == "undetermined",
            "classify.expect", "unknown regime '" + e + "'");
  }
  require(c.thresholds.converge_tolerance > 0.0, "thresholds.converge_tolerance", "must be positive");
  require(c.thresholds.proxy_threshold > 0.0 && c.thresholds.proxy_threshold < 1.0, "thresholds.proxy_threshold",
          "must lie in (0, 1)");
  require(c.thresholds.deadband >= 0.0, "thresholds.deadband", "must be nonnegative");
  for (std::size_t i = 0; i < c.sweep.d.size(); ++i)
    require(c.sweep.d[i] >= 3 && c.sweep.d[i] <= 12, "sweep.d[" + std::to_string(i) + "]", "dimension must lie in [3, 12]");
  for (std::size_t i = 0; i < c.sweep.k.size(); ++i)
    require(c.sweep.k[i] >= 1, "sweep.k[" + std::to_string(i) + "]", "must be at least 1");
  for (std::size_t i = 0; i < c.sweep.a.size(); ++i)
    require(c.sweep.a[i] != 0.0 && std::isfinite(c.sweep.a[i]), "sweep.a[" + std::to_string(i) + "]", "must be nonzero");
  for (std::size_t i = 0; i < c.sweep.n.size(); ++i)
    require(c.sweep.n[i] >= 16, "sweep.n[" + std::to_string(i) + "]", "must be at least 16");
  require(c.sweep.rate_tolerance > 0.0, "sweep.rate_tolerance", "must be positive");
}

/// Parses a config document. `forced` (a CLI subcommand) must agree with a
/// "scenario" key when both are given.
inline ScenarioConfig parse_config(const json& doc, std::optional<Scenario> forced = std::nullopt) {
  detail::ObjectReader root(doc, "");
  int version = kSchemaVersion;
  root.get("schema_version", version);
  if (version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                            std::to_string(kSchemaVersion) + ")");
  std::optional<Scenario> tag;
  if (const json* s = root.find("scenario")) {
    if (!s->is_string()) throw ConfigError("scenario", "expected a string");
    tag = scenario_from_string(s->get<std::string>());
  }
  if (forced && tag && *forced != *tag)
    throw ConfigError("scenario", "config declares '" + to_string(*tag) + "' but the command runs '" +
                                      to_string(*forced) + "'");
  if (!forced && !tag) throw ConfigError("scenario", "missing");
  ScenarioConfig c = scenario_defaults(forced ? *forced : *tag);

  auto g = root.sub("grid");
  g.get("d", c.grid.d);
  g.get("r_max", c.grid.r_max);
  g.get("n", c.grid.n);
  g.get_enum("boundary", c.grid.boundary, boundary_from_string);
  g.get_enum("balance", c.grid.balance, balance_from_string);
  g.finish();

  auto e = root.sub("eigen");
  e.get("coarse_n", c.eigen.coarse_n);
  e.get("tolerance", c.eigen.tolerance);
  e.get("max_iterations", c.eigen.max_iterations);
  e.get("refinement_steps", c.eigen.refinement_steps);
  e.finish();

  auto s = root.sub("series");
  s.get("k", c.series.k);
  s.get("a", c.series.a);
  s.get("j_max", c.series.j_max);
  s.get("max_condition", c.series.max_condition);
  s.get("validity_bound", c.series.validity_bound);
  s.get("seed_smallness", c.series.seed_smallness);
  s.get("window_span", c.series.window_span);
  s.get("window_step", c.series.window_step);
  s.get("floor_factor", c.series.floor_factor);
  s.finish();

  auto ev = root.sub("evolver");
  ev.get("dt", c.evolver.dt);
  ev.get_enum("scheme", c.evolver.scheme, scheme_from_string);
  ev.get("amp_factor", c.evolver.amp_factor);
  ev.get("grad_factor", c.evolver.grad_factor);
  ev.get("sample_interval", c.evolver.sample_interval);
  ev.get("snapshot_every", c.evolver.snapshot_every);
  ev.get("dt_floor", c.evolver.dt_floor);
  ev.get("adaptive", c.evolver.adaptive);
  ev.get("iteration_tolerance", c.evolver.iteration_tolerance);
  ev.get("max_iterations", c.evolver.max_iterations);
  ev.get("fit_modulation", c.evolver.fit_modulation);
  ev.get("exact_exponential_limit", c.evolver.exact_exponential_limit);
  ev.get("departure_factor", c.evolver.departure_factor);
  ev.get("scattering_stop", c.evolver.scattering_stop);
  ev.finish();

  auto r = root.sub("run");
  r.get("forward", c.run.forward);
  r.get("backward", c.run.backward);
  r.get("forward_span", c.run.forward_span);
  r.get("backward_span", c.run.backward_span);
  r.get("refine_blowup", c.run.refine_blowup);
  r.get("refine_tolerance", c.run.refine_tolerance);
  r.get("rate_tolerance", c.run.rate_tolerance);
  r.finish();

  auto cl = root.sub("classify");
  {
    auto ini = cl.sub("initial");
    ini.get("kind", c.classify.initial.kind);
    ini.get("factor", c.classify.initial.factor);
    ini.get("phase", c.classify.initial.phase);
    ini.get("path", c.classify.initial.path);
    ini.finish();
  }
  cl.get("span", c.classify.span);
  cl.get("direction", c.classify.direction);
  cl.get("expect", c.classify.expect);
  cl.finish();

  auto th = root.sub("thresholds");
  th.get("converge_tolerance", c.thresholds.converge_tolerance);
  th.get("proxy_threshold", c.thresholds.proxy_threshold);
  th.get("kinetic_deadband", c.thresholds.deadband);
  th.finish();

  auto sw = root.sub("sweep");
  sw.get("d", c.sweep.d);
  sw.get("k", c.sweep.k);
  sw.get("a", c.sweep.a);
  sw.get("n", c.sweep.n);
  sw.get("rate_tolerance", c.sweep.rate_tolerance);
  sw.finish();

  auto ck = root.sub("checks");
  ck.get("static_residual", c.checks.static_residual);
  ck.get("static_order", c.checks.static_order);
  ck.get("static_order_band", c.checks.static_order_band);
  ck.get("pohozaev", c.checks.pohozaev);
  ck.get("eigen_residual", c.checks.eigen_residual);
  ck.get("e0_stability", c.checks.e0_stability);
  ck.get("kernel_order_band", c.checks.kernel_order_band);
  ck.get("profile_residual", c.checks.profile_residual);
  ck.get("series_rate", c.checks.series_rate);
  ck.get("energy_drift", c.checks.energy_drift);
  ck.finish();

  root.finish();
  validate(c);
  return c;
}

/// Fully resolved echo; parse_config(to_json(c)) == c.
inline json to_json(const ScenarioConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["scenario"] = to_string(c.scenario);
  j["grid"] = {{"d", c.grid.d},
               {"r_max", c.grid.r_max},
               {"n", c.grid.n},
               {"boundary", to_string(c.grid.boundary)},
               {"balance", to_string(c.grid.balance)}};
  j["eigen"] = {{"coarse_n", c.eigen.coarse_n},
                {"tolerance", c.eigen.tolerance},
                {"max_iterations", c.eigen.max_iterations},
                {"refinement_steps", c.eigen.refinement_steps}};
  j["series"] = {{"k", c.series.k},
                 {"a", c.series.a},
                 {"j_max", c.series.j_max},
                 {"max_condition", c.series.max_condition},
                 {"validity_bound", c.series.validity_bound},
                 {"seed_smallness", c.series.seed_smallness},
                 {"window_span", c.series.window_span},
                 {"window_step", c.series.window_step},
                 {"floor_factor", c.series.floor_factor}};
  const EvolverConfig& e = c.evolver;
  j["evolver"] = {{"dt", e.dt},
                  {"scheme", to_string(e.scheme)},
                  {"amp_factor", e.amp_factor},
                  {"grad_factor", e.grad_factor},
                  {"sample_interval", e.sample_interval},
                  {"snapshot_every", e.snapshot_every},
                  {"dt_floor", e.dt_floor},
                  {"adaptive", e.adaptive},
                  {"iteration_tolerance", e.iteration_tolerance},
                  {"max_iterations", e.max_iterations},
                  {"fit_modulation", e.fit_modulation},
                  {"exact_exponential_limit", e.exact_exponential_limit},
                  {"departure_factor", e.departure_factor},
                  {"scattering_stop", e.scattering_stop}};
  j["run"] = {{"forward", c.run.forward},
              {"backward", c.run.backward},
              {"forward_span", c.run.forward_span},
              {"backward_span", c.run.backward_span},
              {"refine_blowup", c.run.refine_blowup},
              {"refine_tolerance", c.run.refine_tolerance},
              {"rate_tolerance", c.run.rate_tolerance}};
  j["classify"] = {{"initial",
                    {{"kind", c.classify.initial.kind},
                     {"factor", c.classify.initial.factor},
                     {"phase", c.classify.initial.phase},
                     {"path", c.classify.initial.path}}},
                   {"span", c.classify.span},
                   {"direction", c.classify.direction},
                   {"expect", c.classify.expect}};
  j["thresholds"] = {{"converge_tolerance", c.thresholds.converge_tolerance},
                     {"proxy_threshold", c.thresholds.proxy_threshold},
                     {"kinetic_deadband", c.thresholds.deadband}};
  j["sweep"] = {{"d", c.sweep.d}, {"k", c.sweep.k}, {"a", c.sweep.a}, {"n", c.sweep.n},
                {"rate_tolerance", c.sweep.rate_tolerance}};
  j["checks"] = {{"static_residual", c.checks.static_residual},
                 {"static_order", c.checks.static_order},
                 {"static_order_band", c.checks.static_order_band},
                 {"pohozaev", c.checks.pohozaev},
                 {"eigen_residual", c.checks.eigen_residual},
                 {"e0_stability", c.checks.e0_stability},
                 {"kernel_order_band", c.checks.kernel_order_band},
                 {"profile_residual", c.checks.profile_residual},
                 {"series_rate", c.checks.series_rate},
                 {"energy_drift", c.checks.energy_drift}};
  return j;
}

/// FNV-1a over the canonical (key-sorted, compact) resolved config.
inline std::string config_hash(const ScenarioConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) h = (h ^ ch) * 1099511628211ull;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace thresh
