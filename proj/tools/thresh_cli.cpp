// Command-line front end: one subcommand per scenario.
//
// Exit status: 0 all checks passed, 1 a check failed, 2 invalid config or
// arguments, 3 numerical failure.
#include <CLI11.hpp>

#include <iostream>

#include "thresh/experiments.hpp"

namespace {

int execute_command(thresh::Scenario scenario, const std::string& config_path, const std::string& out_dir, int workers,
                    bool check, bool dry_run) {
  using namespace thresh;
  ScenarioConfig cfg;
  try {
    json doc = json::object();
    if (!config_path.empty()) {
      try {
        doc = json::parse(read_text(config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError(config_path, std::string("not valid JSON: ") + e.what());
      }
    }
    cfg = parse_config(doc, scenario);
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (dry_run) {
    std::cout << to_json(cfg).dump(2) << "\n" << run_directory_name(cfg) << "\n";
    return 0;
  }
  try {
    RunOptions opt;
    opt.workers = workers;
    opt.extended_checks = check;
    const RunRecord rec = run(cfg, out_dir, opt);
    std::cout << (rec.cached ? "cached " : "wrote ") << rec.directory.string() << "\n";
    for (const auto& c : rec.manifest["checks"]) {
      std::cout << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " ["
                << c["module"].get<std::string>() << "] " << c["value"].dump() << " " << c["relation"].get<std::string>()
                << " " << c["bound"].dump();
      if (c.contains("detail")) std::cout << "  (" << c["detail"].get<std::string>() << ")";
      std::cout << "\n";
    }
    return rec.passed() ? 0 : 1;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure in " << e.stage() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold solutions of the energy-critical radial NLS: ground state, spectrum, near solutions, evolution"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs";
  int workers = 1;
  bool check = false, dry_run = false;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ground-state", "certify the sampled ground state"},
      {"spectrum", "unstable eigenpair of the linearized operator"},
      {"build-series", "near-solution profiles and residual decay"},
      {"wpm", "evolve a near solution forward and backward and classify both directions"},
      {"classify", "evolve custom initial data and classify the trajectory"},
      {"sweep", "Cartesian sweep over d, k, a and n"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON scenario config (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "root directory for run directories")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--check", check, "also run the refinement studies; exit status reflects all checks");
    sub->add_flag("--dry-run", dry_run, "print the resolved config and run directory, compute nothing");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return execute_command(thresh::scenario_from_string(name), config_path, out_dir, workers, check, dry_run);
}
