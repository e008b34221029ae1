// dqtrack command line: run / montecarlo / observability / validate-config.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dqtrack/errors.hpp"
#include "dqtrack/sim.hpp"

namespace fs = std::filesystem;
using namespace dqtrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int trials = 50;
  std::string mode;
  int threads = 0;
};

// Raised for bad flag values that CLI11 cannot check by itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ScenarioConfig load(const Options& o) {
  ScenarioConfig cfg = o.config.empty() ? ScenarioConfig::flyby_default() : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.mode.empty()) {
    const auto m = parse_measurement_mode(o.mode);
    if (!m) throw UsageError("--mode must be pixels, positions or unit_vectors");
    cfg.mode = *m;
  }
  cfg.validate();
  return cfg;
}

void require_pixels(const ScenarioConfig& cfg) {
  if (cfg.mode != MeasurementMode::Pixels) {
    throw UsageError("filter runs are defined for pixel measurements only (got " +
                     to_string(cfg.mode) + ")");
  }
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

int cmd_run(const Options& o) {
  const ScenarioConfig cfg = load(o);
  require_pixels(cfg);
  const TrialRecord rec = run_scenario(cfg, 0);
  const fs::path dir = cfg.output_dir;
  {
    std::ofstream os = open_out(dir / "trial.csv");
    write_trial_csv(os, rec);
  }
  {
    std::ofstream os = open_out(dir / "summary.json");
    write_summary_json(os, summarize(cfg, {rec}));
  }
  std::cout << "wrote " << (dir / "trial.csv").string() << " and "
            << (dir / "summary.json").string() << '\n';
  return kExitOk;
}

int cmd_montecarlo(const Options& o) {
  const ScenarioConfig cfg = load(o);
  require_pixels(cfg);
  if (o.trials < 1) throw UsageError("--trials must be >= 1");
  const std::vector<TrialRecord> trials = run_trials(cfg, o.trials, o.threads);
  const fs::path dir = cfg.output_dir;
  {
    std::ofstream os = open_out(dir / "trial.csv");
    write_trial_csv(os, trials.front());
  }
  {
    std::ofstream os = open_out(dir / "summary.json");
    write_summary_json(os, summarize(cfg, trials));
  }
  std::cout << "wrote " << (dir / "summary.json").string() << " (" << o.trials << " trials)\n";
  return kExitOk;
}

int cmd_observability(const Options& o) {
  const ScenarioConfig cfg = load(o);
  const ObservabilityAudit audit = audit_observability(cfg, cfg.mode);
  write_observability_json(std::cout, cfg, audit);
  if (!o.out.empty()) {
    std::ofstream os = open_out(fs::path(o.out) / "observability.json");
    write_observability_json(os, cfg, audit);
  }
  return kExitOk;
}

int cmd_validate(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  load(o);
  std::cout << "ok: " << o.config << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual quaternion visual target tracking"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "YAML scenario file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Base random seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--mode", o.mode, "pixels | positions | unit_vectors");
  };
  CLI::App* run = app.add_subcommand("run", "Single trial: trial.csv + summary.json");
  add_common(run);
  CLI::App* mc = app.add_subcommand("montecarlo", "Monte Carlo trials: summary.json");
  add_common(mc);
  mc->add_option("--trials", o.trials, "Number of trials")->capture_default_str();
  mc->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  CLI::App* obs = app.add_subcommand("observability", "Codistribution rank report (JSON)");
  add_common(obs);
  CLI::App* val = app.add_subcommand("validate-config", "Check a scenario file");
  add_common(val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (run->parsed()) return cmd_run(o);
    if (mc->parsed()) return cmd_montecarlo(o);
    if (obs->parsed()) return cmd_observability(o);
    return cmd_validate(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
