#pragma once
// Experiment runner: TOML configs, subcommand pipelines, output manifests.
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "margulab/mme.hpp"
#include "margulab/splitting.hpp"

namespace ml {

extern const char* const kToolVersion;

struct LabConfig {
  MapDescriptor map;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: all cores
  std::string out = "out";
  std::string checkpoint;  // empty: none
  DichotomyConfig dichotomy;
  int box_samples = 4;
  double segment_half_width = 0.01;
  std::vector<double> holonomy_sizes{0.2, 0.1, 0.05, 0.025};
  int holonomy_nw = 4, holonomy_nc = 32;
  double holonomy_t0 = 0.25;
  int splitting_points = 16;
  SplittingOptions splitting;
  std::vector<double> sweep_epsilons{0.0, 0.02, 0.05};
};

// MARGULAB_<SECTION>_<KEY> overrides; values are TOML literals (bare strings allowed)
using EnvMap = std::map<std::string, std::string>;
EnvMap margulab_environment();  // the MARGULAB_* part of the process environment

// throws LabError(ConfigError) naming the offending key
LabConfig parse_config(const std::string& toml_text, const EnvMap& env = {});
LabConfig load_config(const std::string& path, const EnvMap& env = {});
std::string to_toml(const LabConfig& c);
// digest of the canonical TOML without run.out / run.workers / run.checkpoint
std::string config_hash(const LabConfig& c);

std::string sha256_hex(const std::string& bytes);

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunManifest {
  std::string command, config_hash, tool_version;
  std::uint64_t seed = 0;
  int workers = 0;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::vector<OutputFile> files;
  std::string to_json() const;
};

// output directory with digest bookkeeping
class Run {
 public:
  Run(LabConfig cfg, std::string command);
  const LabConfig& config() const { return cfg_; }
  void write(const std::string& rel, const std::string& content);
  void time(const std::string& stage, const std::function<void()>& body);
  // writes manifest.json last
  RunManifest finish();

 private:
  LabConfig cfg_;
  RunManifest man_;
};

// CSV headers (documented in README)
extern const char* const kCurveCsvHeader;     // k,log_length
extern const char* const kLadderCsvHeader;    // nx,ny,nt,depth,log_rho,per_step
extern const char* const kRatiosCsvHeader;    // k,ell,ratio
extern const char* const kHistCsvHeader;      // system,chart,iw,ic,mass
extern const char* const kHolonomyCsvHeader;  // perp,size,sup_dev
extern const char* const kFramesCsvHeader;    // x,y,t,es_a,...,residual,min_angle
extern const char* const kSweepCsvHeader;     // epsilon,verdict,...

// sup|J - 1| of stable holonomies between cu-plaques at perpendicular offsets holonomy_sizes
struct HolonomyLadder {
  std::vector<double> perp, size, sup_dev;
};
HolonomyLadder holonomy_ladder(const LabConfig& c);

void run_entropy(Run& r);
void run_margulis(Run& r);
void run_dichotomy(Run& r);
void run_holonomy(Run& r);
void run_splitting(Run& r);
void run_sweep(Run& r);

const std::vector<std::string>& subcommands();
// 0 success, 2 config error, 3 numerical failure (stage named), 4 budget exceeded
int exit_code(const LabError& e);
// runs one subcommand and maps failures to exit codes; diagnostics go to err
int run_subcommand(const std::string& name, const LabConfig& cfg, std::ostream& err);

// least squares log y = log C + alpha log x; returns {alpha, C, r2}
struct PowerFit {
  double alpha = 0, C = 0, r2 = 0;
};
PowerFit power_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ml
