#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "margulab/labcli.hpp"

using namespace ml;
namespace fs = std::filesystem;

namespace {

std::string golden(const std::string& name) {
  const char* d = std::getenv("GOLDEN_DIR");
  return std::string(d ? d : "configs/golden") + "/" + name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  return s;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("margulab_test_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json manifest(const fs::path& out) { return nlohmann::json::parse(slurp(out / "manifest.json")); }

std::string digest_of(const nlohmann::json& m, const std::string& path) {
  for (const auto& f : m["files"])
    if (f["path"] == path) return f["sha256"];
  return "";
}

int run_cli(const std::string& args, const std::string& env = "") {
  const char* exe = std::getenv("LABCLI");
  REQUIRE_MESSAGE(exe, "LABCLI is not set");
  std::string cmd = env + (env.empty() ? "" : " ") + "\"" + exe + "\" " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("sha256 of known strings") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("power fit recovers an exact power law") {
  std::vector<double> x{0.2, 0.1, 0.05, 0.025}, y;
  for (double v : x) y.push_back(3.0 * v * v);
  PowerFit p = power_fit(x, y);
  CHECK(p.alpha == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.C == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("config round trip through TOML") {
  LabConfig c = parse_config(R"(
[map]
family = "TransversalShear"
epsilon = 0.03
shape = "bump"
[run]
seed = 11
[margulis]
n_max = 20
window = 6
[entropy]
ladder = [[16, 16, 8, 1], [32, 32, 16, 2]]
[quasi_product]
hist_boxes = [2, 3, 4]
[sweep]
epsilons = [0.0, 0.01]
)");
  CHECK(c.map.family == Family::TransversalShear);
  CHECK(c.map.epsilon == 0.03);
  CHECK(c.dichotomy.seed == 11);
  REQUIRE(c.dichotomy.ladder.size() == 2);
  CHECK(c.dichotomy.ladder[1].depth == 2);
  CHECK(c.dichotomy.hist_boxes.ny == 3);
  std::string t = to_toml(c);
  LabConfig d = parse_config(t);
  CHECK(to_toml(d) == t);
  CHECK(config_hash(d) == config_hash(c));
}

TEST_CASE("config hash ignores run location but not the map") {
  LabConfig a = parse_config("[map]\nepsilon = 0.05\n");
  LabConfig b = a;
  b.out = "elsewhere";
  b.workers = 3;
  CHECK(config_hash(a) == config_hash(b));
  b.map.epsilon = 0.02;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown keys and sections are rejected by name") {
  auto msg = [](const std::string& text, const EnvMap& env = {}) {
    try {
      parse_config(text, env);
    } catch (const LabError& e) {
      CHECK(e.kind == ErrorKind::ConfigError);
      CHECK(exit_code(e) == 2);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(msg("[map]\nepsilonn = 0.1\n").find("map.epsilonn") != std::string::npos);
  CHECK(msg("[mapp]\nepsilon = 0.1\n").find("mapp") != std::string::npos);
  CHECK(msg("[margulis]\nn_max = \"x\"\n").find("margulis.n_max") != std::string::npos);
  CHECK(msg("", {{"MARGULAB_MAP_EPS", "0.1"}}).find("MARGULAB_MAP_EPS") != std::string::npos);
  CHECK(msg("[margulis]\nn_max = 4\nwindow = 8\n").find("margulis.window") != std::string::npos);
}

TEST_CASE("environment overrides the file") {
  LabConfig c = parse_config("[map]\nepsilon = 0.02\n[run]\nseed = 3\n",
                             {{"MARGULAB_MAP_EPSILON", "0.05"}, {"MARGULAB_MAP_SHAPE", "bump_x"}, {"MARGULAB_RUN_SEED", "9"}});
  CHECK(c.map.epsilon == 0.05);
  CHECK(c.map.shape == Shape::BumpX);
  CHECK(c.seed == 9);
  CHECK(c.dichotomy.seed == 9);
}

TEST_CASE("non-invertible time change names map.epsilon") {
  // 1 + dtau/dt = 1 - 2 pi eps sin(2 pi t) dips below 0 once eps > 1/(2 pi)
  try {
    parse_config("[map]\nshape = \"cos\"\nepsilon = 0.2\n");
    FAIL("expected ConfigError");
  } catch (const LabError& e) {
    CHECK(std::string(e.what()).find("map.epsilon") != std::string::npos);
    CHECK(exit_code(e) == 2);
  }
  CHECK_NOTHROW(parse_config("[map]\nshape = \"cos\"\nepsilon = 0.15\n"));
}

TEST_CASE("exit codes") {
  CHECK(exit_code(LabError(ErrorKind::InvalidDescriptor, "x")) == 2);
  CHECK(exit_code(LabError(ErrorKind::RefinementBudgetExceeded, "x", "margulis")) == 4);
  CHECK(exit_code(LabError(ErrorKind::NotApplicable, "x", "margulis")) == 3);
  std::ostringstream err;
  CHECK(run_subcommand("nope", LabConfig{}, err) == 2);
}

TEST_CASE("margulis on a shear is reported with its stage") {
  LabConfig c = load_config(golden("shear_dichotomy.toml"));
  c.out = scratch("shear").string();
  std::ostringstream err;
  CHECK(run_subcommand("margulis", c, err) == 3);
  CHECK(err.str().find("stage 'margulis'") != std::string::npos);
}

TEST_CASE("dichotomy at eps 0 writes a nonhyperbolic report, bitwise stable across worker counts") {
  LabConfig c = load_config(golden("eps0_dichotomy.toml"));
  c.out = scratch("eps0_a").string();
  c.workers = 1;
  std::ostringstream err;
  REQUIRE(run_subcommand("dichotomy", c, err) == 0);
  auto j = nlohmann::json::parse(slurp(fs::path(c.out) / "dichotomy.json"));
  CHECK(j["verdict"] == "NonhyperbolicCase");
  CHECK(j["schema_version"] == 1);
  DichotomyReport R = DichotomyReport::from_json(slurp(fs::path(c.out) / "dichotomy.json"));
  CHECK(R.verdict == Verdict::NonhyperbolicCase);

  auto m1 = manifest(c.out);
  CHECK(m1["command"] == "dichotomy");
  CHECK(m1["seed"] == 1);
  CHECK(m1["config_hash"] == config_hash(c));
  CHECK(digest_of(m1, "dichotomy.json") == sha256_hex(slurp(fs::path(c.out) / "dichotomy.json")));

  LabConfig c2 = c;
  c2.out = scratch("eps0_b").string();
  c2.workers = 2;
  REQUIRE(run_subcommand("dichotomy", c2, err) == 0);
  auto m2 = manifest(c2.out);
  CHECK(m2["config_hash"] == m1["config_hash"]);
  CHECK(digest_of(m2, "dichotomy.json") == digest_of(m1, "dichotomy.json"));
}

TEST_CASE("CSV outputs carry the documented headers") {
  LabConfig c = load_config(golden("cos005_dichotomy.toml"));
  c.splitting_points = 4;
  c.dichotomy.n_samples = 50;
  c.out = scratch("csv").string();
  std::ostringstream err;
  for (const char* s : {"entropy", "margulis", "splitting"}) REQUIRE_MESSAGE(run_subcommand(s, c, err) == 0, err.str());
  fs::path o = c.out;
  CHECK(first_line(o / "curve_growth.csv") == kCurveCsvHeader);
  CHECK(first_line(o / "box_ladder.csv") == kLadderCsvHeader);
  CHECK(first_line(o / "margulis_ratios.csv") == kRatiosCsvHeader);
  CHECK(first_line(o / "margulis_hist.csv") == kHistCsvHeader);
  CHECK(first_line(o / "frames.csv") == kFramesCsvHeader);
  CHECK(first_line(o / "exponents.csv") == exponent_csv_header());

  auto e = nlohmann::json::parse(slurp(o / "entropy.json"));
  CHECK(e["max_relative_gap"].get<double>() < 0.05);

  LabConfig h = load_config(golden("bumpx_holonomy.toml"));
  h.out = scratch("hol").string();
  REQUIRE(run_subcommand("holonomy", h, err) == 0);
  CHECK(first_line(fs::path(h.out) / "holonomy.csv") == kHolonomyCsvHeader);
  auto hj = nlohmann::json::parse(slurp(fs::path(h.out) / "holonomy.json"));
  CHECK(hj["fit"]["alpha"].get<double>() > 0.5);
}

TEST_CASE("margulis checkpoint resume reproduces the outputs") {
  LabConfig c = load_config(golden("cos005_dichotomy.toml"));
  fs::path cp = scratch("ckpt");
  c.checkpoint = cp.string();
  c.out = scratch("ckpt_a").string();
  std::ostringstream err;
  REQUIRE(run_subcommand("margulis", c, err) == 0);
  CHECK(fs::exists(cp / "cu" / "manifest.json"));
  CHECK(fs::exists(cp / "cs" / "manifest.json"));
  LabConfig r = c;
  r.out = scratch("ckpt_b").string();
  REQUIRE(run_subcommand("margulis", r, err) == 0);
  auto a = manifest(c.out), b = manifest(r.out);
  for (const char* f : {"margulis.json", "margulis_ratios.csv", "margulis_hist.csv"}) {
    CHECK_MESSAGE(digest_of(a, f) == digest_of(b, f), f);
    CHECK(!digest_of(a, f).empty());
  }
  // a checkpoint of another map is refused
  LabConfig w = c;
  w.map.epsilon = 0.02;
  w.out = scratch("ckpt_c").string();
  CHECK(run_subcommand("margulis", w, err) == 2);
}

TEST_CASE("labcli binary: precedence file < env < flag, and exit codes") {
  fs::path o = scratch("cli");
  std::string cfg = "--config \"" + golden("cos005_dichotomy.toml") + "\"";
  REQUIRE(run_cli("holonomy " + cfg + " --out " + o.string(), "MARGULAB_RUN_SEED=5") == 0);
  CHECK(manifest(o)["seed"] == 5);
  REQUIRE(run_cli("holonomy " + cfg + " --seed 9 --out " + o.string(), "MARGULAB_RUN_SEED=5") == 0);
  CHECK(manifest(o)["seed"] == 9);

  fs::path bad = fs::temp_directory_path() / "margulab_test_bad.toml";
  std::ofstream(bad) << "[map]\nshape = \"cos\"\nepsilon = 0.2\n";
  CHECK(run_cli("dichotomy --config " + bad.string() + " --out " + o.string()) == 2);
  CHECK(run_cli("dichotomy --config /nonexistent.toml") == 2);
  CHECK(run_cli("dichotomy") == 2);
  CHECK(run_cli("dichotomy " + cfg + " --workers -1") == 2);
  CHECK(run_cli("holonomy " + cfg + " --out " + o.string(), "MARGULAB_MAP_EPSILON=oops") == 2);
}
