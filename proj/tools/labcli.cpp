// labcli: run one experiment pipeline from a TOML config
#include <CLI11.hpp>
#include <iostream>

#include "margulab/labcli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Margulis measure / MME lab for the suspended cat map"};
  app.set_version_flag("--version", ml::kToolVersion);
  app.require_subcommand(1, 1);

  std::string config, out, checkpoint;
  std::uint64_t seed = 0;
  int workers = -1;
  for (const auto& name : ml::subcommands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "TOML config file")->required();
    sub->add_option("--seed", seed, "overrides run.seed");
    sub->add_option("--workers", workers, "OpenMP threads (0 = all cores); overrides run.workers");
    sub->add_option("--checkpoint", checkpoint, "directory for Margulis checkpoints (resume if present)");
    sub->add_option("--out", out, "output directory; overrides run.out");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();

  ml::LabConfig cfg;
  try {
    cfg = ml::load_config(config, ml::margulab_environment());
  } catch (const ml::LabError& e) {
    std::cerr << "labcli: config error: " << e.what() << "\n";
    return 2;
  }
  if (sub->count("--seed")) {
    cfg.seed = seed;
    cfg.dichotomy.seed = seed;
  }
  if (sub->count("--workers")) {
    if (workers < 0) {
      std::cerr << "labcli: config error: --workers must be >= 0\n";
      return 2;
    }
    cfg.workers = workers;
  }
  if (sub->count("--checkpoint")) cfg.checkpoint = checkpoint;
  if (sub->count("--out")) cfg.out = out;

  int rc = ml::run_subcommand(name, cfg, std::cerr);
  if (rc == 0) std::cout << "labcli: " << name << " done, outputs in " << cfg.out << "\n";
  return rc;
}
