#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "simlab/consensus.hpp"
#include "simlab/errors.hpp"
#include "simlab/estimation.hpp"
#include "simlab/scenario.hpp"

namespace {

simlab::ScenarioConfig load_config(const std::string& path) {
  std::ifstream file(path);
  if (!file)
    throw simlab::ConfigInvalid("cannot open config file: " + path);
  nlohmann::json doc;
  try {
    file >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw simlab::ConfigInvalid(std::string("config parse error: ") +
                                e.what());
  }
  return simlab::ScenarioConfig::from_json(doc);
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int trials = 0;
  int jobs = 0;
};

void apply_overrides(simlab::ScenarioConfig& cfg, const CommonOpts& opts) {
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (const char* env = std::getenv("SIMLAB_OUT"); env && *env)
    cfg.out_dir = env;
  if (opts.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.trials > 0) cfg.trials = opts.trials;
  if (opts.jobs > 0) cfg.jobs = opts.jobs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simlab: distributed estimation/detection simulation lab"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool validate_only = false;
  std::string forced_kind;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON scenario config")
        ->required();
    sub->add_option("--seed", opts.seed, "master seed override");
    sub->add_option("--trials", opts.trials, "trial count override");
    sub->add_option("--jobs", opts.jobs, "parallel trial workers");
    sub->add_option("--out", opts.out_dir,
                    "output directory (SIMLAB_OUT env overrides)");
  };

  for (const auto& kind : simlab::scenario_kinds()) {
    CLI::App* sub = app.add_subcommand(kind, "run a " + kind + " scenario");
    add_common(sub);
    sub->callback([&forced_kind, kind] { forced_kind = kind; });
  }
  CLI::App* validate =
      app.add_subcommand("validate", "validate a config without running");
  add_common(validate);
  validate->callback([&validate_only] { validate_only = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    simlab::ScenarioConfig cfg = load_config(opts.config_path);
    apply_overrides(cfg, opts);
    if (!forced_kind.empty() && cfg.kind != forced_kind)
      throw simlab::ConfigInvalid("config kind '" + cfg.kind +
                                  "' does not match subcommand '" +
                                  forced_kind + "'");
    if (validate_only) {
      simlab::validate_scenario(cfg);
      std::cout << "config ok: " << cfg.kind << "\n";
      return 0;
    }
    const simlab::RunRecord record = simlab::run_scenario(cfg);
    std::cout << "scenario " << record.kind << " finished in "
              << record.wall_clock_seconds << " s\n";
    for (const auto& f : record.outputs)
      std::cout << "  wrote " << cfg.out_dir << "/" << f << "\n";
    return 0;
  } catch (const simlab::ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const simlab::ConsensusNotConverged& e) {
    std::cerr << "numeric non-convergence: " << e.what() << "\n";
    return 3;
  } catch (const simlab::EstimationNotConverged& e) {
    std::cerr << "numeric non-convergence: " << e.what() << "\n";
    return 3;
  } catch (const simlab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
