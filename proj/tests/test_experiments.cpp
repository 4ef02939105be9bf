#include <gtest/gtest.h>

#include <filesystem>

#include "thresh/experiments.hpp"

using namespace thresh;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thresh_test_" + name);
  fs::remove_all(p);
  return p;
}

ScenarioConfig small_spectrum() {
  return parse_config(json::parse(R"({"scenario": "spectrum", "grid": {"n": 1200}})"));
}

std::string config_error(const std::string& text) {
  try {
    parse_config(json::parse(text));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error(R"({"scenario": "spectrum", "grid": {"n": "many"}})").find("grid.n"), std::string::npos);
  EXPECT_NE(config_error(R"({"scenario": "spectrum", "evolver": {"dtt": 1}})").find("evolver.dtt"), std::string::npos);
  EXPECT_NE(config_error(R"({"scenario": "sweep", "sweep": {"k": [1, 0]}})").find("sweep.k[1]"), std::string::npos);
  EXPECT_NE(config_error(R"({"scenario": "nope"})").find("scenario"), std::string::npos);
  EXPECT_NE(config_error(R"({"grid": {}})").find("scenario"), std::string::npos);
  EXPECT_NE(config_error(R"({"scenario": "spectrum", "schema_version": 7})").find("schema_version"), std::string::npos);
  EXPECT_NE(config_error(R"({"scenario": "build-series", "series": {"a": 0}})").find("series.a"), std::string::npos);
}

TEST(Config, SubcommandMustAgreeWithDeclaredScenario) {
  const json doc = json::parse(R"({"scenario": "spectrum"})");
  EXPECT_THROW(parse_config(doc, Scenario::Sweep), ConfigError);
  EXPECT_EQ(parse_config(doc, Scenario::Spectrum).scenario, Scenario::Spectrum);
  EXPECT_EQ(parse_config(json::object(), Scenario::NearSolutionRun).grid.r_max, 240.0);
}

TEST(Config, ResolvedEchoRoundTrips) {
  const ScenarioConfig c = parse_config(json::parse(R"({"scenario": "wpm", "series": {"a": -1}, "evolver": {"dt": 0.01}})"));
  const json echo = to_json(c);
  const ScenarioConfig back = parse_config(echo);
  EXPECT_EQ(to_json(back), echo);
  EXPECT_EQ(config_hash(back), config_hash(c));
  ScenarioConfig other = c;
  other.evolver.dt = 0.02;
  EXPECT_NE(config_hash(other), config_hash(c));
}

TEST(Io, FieldCsvRoundTrip) {
  auto g = build_grid(6, 10.0, 50);
  RadialField u = RadialField::sample(g, [](double r) { return cplx(std::exp(-r), std::sin(r) / 3.0); });
  const RadialField v = parse_field_csv(field_csv(u));
  EXPECT_TRUE(v.grid().same_as(*g));
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(u[i], v[i]);
  EXPECT_THROW(parse_field_csv("r,re,im\n0,1,0\n"), InvalidArgument);
}

TEST(Io, TraceCsvRoundTrip) {
  EvolutionTrace tr;
  tr.samples.push_back({0.5, 1.0, 2.0, 3.0, 4e-7, 0.1, 1.01, 0.66, 0.0});
  const auto back = parse_trace_csv(trace_csv(tr));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].h1_dist, 4e-7);
  EXPECT_EQ(back[0].mu, 1.01);
}

TEST(Experiments, SpectrumRunWritesArtifactsAndCaches) {
  const fs::path root = scratch("spectrum");
  const ScenarioConfig c = small_spectrum();
  const RunRecord a = run(c, root);
  EXPECT_FALSE(a.cached);
  EXPECT_TRUE(a.passed());
  EXPECT_TRUE(fs::exists(a.directory / "y_plus.csv"));
  const json side = json::parse(read_text((a.directory / "y_plus.json").string()));
  for (const char* key : {"d", "r_max", "n", "e0", "residual", "normalization"}) EXPECT_TRUE(side.contains(key)) << key;
  EXPECT_GT(side["e0"].get<double>(), 0.0);
  EXPECT_EQ(a.manifest["config"], to_json(c));
  for (const auto& f : a.manifest["outputs"]) EXPECT_FALSE(f["module"].get<std::string>().empty());
  const RunRecord b = run(c, root);
  EXPECT_TRUE(b.cached);
  EXPECT_EQ(b.directory, a.directory);
  fs::remove_all(root);
}

TEST(Experiments, IdenticalConfigsGiveIdenticalBytes) {
  const ScenarioConfig c = parse_config(json::parse(R"({"scenario": "build-series", "grid": {"n": 1200, "balance": "well-balanced"}})"));
  const RunRecord a = run(c, scratch("det_a")), b = run(c, scratch("det_b"));
  for (const auto& f : a.manifest["outputs"]) {
    const std::string p = f["path"];
    if (p.ends_with(".csv")) {
      EXPECT_EQ(read_text((a.directory / p).string()), read_text((b.directory / p).string())) << p;
    }
  }
  fs::remove_all(scratch("det_a"));
  fs::remove_all(scratch("det_b"));
}

TEST(Experiments, NumericFailureLeavesNoOutputs) {
  const fs::path root = scratch("failure");
  // far too coarse for the well-balanced weights to stay positive
  ScenarioConfig c = parse_config(json::parse(R"({"scenario": "spectrum", "grid": {"n": 16, "r_max": 2000, "balance": "well-balanced"}})"));
  EXPECT_ANY_THROW(run(c, root));
  if (fs::exists(root)) {
    EXPECT_TRUE(fs::is_empty(root));
  }
  fs::remove_all(root);
}

TEST(Experiments, SweepIsIndependentOfWorkerCount) {
  const ScenarioConfig c = parse_config(json::parse(
      R"({"scenario": "sweep", "sweep": {"k": [1, 2], "a": [-1, 2], "n": [600, 1200]}, "grid": {"r_max": 30}})"));
  const std::string one = sweep_csv(sweep_cells(c, 1)), three = sweep_csv(sweep_cells(c, 3));
  EXPECT_EQ(one, three);
  const auto cells = sweep_cells(c, 2);
  ASSERT_EQ(cells.size(), 8u);
  // amplitude only translates the near solution in time
  for (const auto& x : cells)
    for (const auto& y : cells)
      if (x.n == y.n && x.k == y.k && (x.a > 0) == (y.a > 0)) {
        EXPECT_NEAR(x.t_k_shifted, y.t_k_shifted, 1e-2);
      }
}

TEST(Experiments, ClassifyScaledGroundStateBelowThreshold) {
  const ScenarioConfig c = parse_config(json::parse(R"({
    "scenario": "classify",
    "grid": {"r_max": 120, "n": 3000},
    "evolver": {"dt": 0.04},
    "classify": {"initial": {"kind": "scaled-w", "factor": 0.8}, "span": 70, "expect": "scattering-proxy"}})"));
  const RunResult r = execute(c);
  EXPECT_TRUE(r.passed()) << r.summary.dump(2);
}
