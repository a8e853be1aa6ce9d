#include <fmt/format.h>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "margulab/labcli.hpp"

namespace ml {

const char* const kToolVersion = "margulab 0.3.0";

const char* const kCurveCsvHeader = "k,log_length";
const char* const kLadderCsvHeader = "nx,ny,nt,depth,log_rho,per_step";
const char* const kRatiosCsvHeader = "k,ell,ratio";
const char* const kHistCsvHeader = "system,chart,iw,ic,mass";
const char* const kHolonomyCsvHeader = "perp,size,sup_dev";
const char* const kFramesCsvHeader =
    "x,y,t,es_a,es_b,es_c,ec_a,ec_b,ec_c,eu_a,eu_b,eu_c,residual,min_angle";
const char* const kSweepCsvHeader =
    "epsilon,verdict,lambda_c_cu_s,stderr_cu_s,lambda_c_cs_u,stderr_cs_u,h_curve,h_box,h_margulis,restricted";

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 || EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, md, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 failed");
  }
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["command"] = command;
  j["tool_version"] = tool_version;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["workers"] = workers;
  j["timings"] = nlohmann::ordered_json::array();
  for (const auto& [k, v] : timings) j["timings"].push_back({{"stage", k}, {"seconds", v}});
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return j.dump(2) + "\n";
}

Run::Run(LabConfig cfg, std::string command) : cfg_(std::move(cfg)) {
  man_.command = std::move(command);
  man_.config_hash = ml::config_hash(cfg_);
  man_.tool_version = kToolVersion;
  man_.seed = cfg_.seed;
  man_.workers = workers();
  std::filesystem::create_directories(cfg_.out);
}

void Run::write(const std::string& rel, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p = fs::path(cfg_.out) / rel;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream o(p, std::ios::binary);
  o << content;
  if (!o) throw LabError(ErrorKind::ConfigError, "cannot write '" + p.string() + "'", "output");
  for (auto& f : man_.files)
    if (f.path == rel) {
      f = OutputFile{rel, sha256_hex(content), content.size()};
      return;
    }
  man_.files.push_back(OutputFile{rel, sha256_hex(content), content.size()});
}

void Run::time(const std::string& stage, const std::function<void()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  body();
  man_.timings.emplace_back(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

RunManifest Run::finish() {
  namespace fs = std::filesystem;
  std::ofstream(fs::path(cfg_.out) / "config.toml") << to_toml(cfg_);
  man_.files.push_back(OutputFile{"config.toml", sha256_hex(to_toml(cfg_)), to_toml(cfg_).size()});
  std::ofstream(fs::path(cfg_.out) / "manifest.json") << man_.to_json();
  return man_;
}

PowerFit power_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(x[i]), ly[i] = std::log(y[i]);
    sx += lx[i], sy += ly[i], sxx += lx[i] * lx[i], sxy += lx[i] * ly[i];
  }
  double dn = static_cast<double>(n);
  PowerFit f;
  f.alpha = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  double b = (sy - f.alpha * sx) / dn;
  f.C = std::exp(b);
  double my = sy / dn, ss = 0, sr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ss += (ly[i] - my) * (ly[i] - my);
    double r = ly[i] - (b + f.alpha * lx[i]);
    sr += r * r;
  }
  f.r2 = ss > 0 ? 1 - sr / ss : 1.0;
  return f;
}

}  // namespace ml
