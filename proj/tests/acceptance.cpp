// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <sstream>

#include "margulab/labcli.hpp"

using namespace ml;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MapDescriptor cos_map(double eps) { return MapDescriptor{Family::TimeChange, eps, Shape::Cos, Direction::Forward}; }

std::string golden(const std::string& name) {
  const char* d = std::getenv("GOLDEN_DIR");
  return std::string(d ? d : "configs/golden") + "/" + name;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::min(std::abs(a), std::abs(b)); }

// everything built once per epsilon
struct Lab {
  MapDescriptor f;
  DichotomyConfig cfg;
  Systems S;
  std::unique_ptr<QuasiProductMeasure> qa, qb;
  DichotomyReport R;
};

Lab& lab(double eps) {
  static std::map<double, std::unique_ptr<Lab>> cache;
  auto& p = cache[eps];
  if (!p) {
    p = std::make_unique<Lab>();
    p->f = cos_map(eps);
    p->R = dichotomy_report(p->f, p->cfg);
    p->S = build_systems(p->f, p->cfg);
    p->qa = std::make_unique<QuasiProductMeasure>(quasi_product(p->f, p->S.cu, p->S.s, lattice_cover(p->f, p->cfg.cover_m), p->cfg.n_profile));
    p->qb = std::make_unique<QuasiProductMeasure>(
        quasi_product(p->f, p->S.cs, p->S.u, lattice_cover(p->f.inverse(), p->cfg.cover_m), p->cfg.n_profile));
  }
  return *p;
}

const std::vector<double> kSweep{0.0, 0.02, 0.05};

MeasureSampler mixture(const MeasureSampler& a, const MeasureSampler& b, double w) {
  MeasureSampler m = a;
  m.name = fmt::format("{:.2f} {} + {:.2f} {}", w, a.name, 1 - w, b.name);
  m.draw = [a, b, w](std::uint64_t seed, std::size_t n) {
    auto na = static_cast<std::size_t>(std::lround(w * static_cast<double>(n)));
    auto xs = a.draw(seed, na), ys = b.draw(seed ^ 0x9e3779b97f4a7c15ULL, n - na);
    xs.insert(xs.end(), ys.begin(), ys.end());
    return xs;
  };
  return m;
}

// invariant candidates: quasi-products, Parry chains, invariant slices, periodic orbits, mixtures
std::vector<MeasureSampler> candidates(Lab& L) {
  const MapDescriptor& f = L.f;
  std::vector<MeasureSampler> v{L.qa->sampler, L.qb->sampler};
  for (BoxSpec s : {BoxSpec{16, 16, 8, 1, 4}, BoxSpec{16, 16, 8, 2, 4}, BoxSpec{8, 8, 8, 1, 4}}) {
    BoxModel m = build_box_model(f, s);
    perron(m);
    // cesaro 0 is uniform inside boxes, not invariant once eps > 0
    for (int ces : {100, 1000}) {
      v.push_back(parry_sampler(m, ces));
      v.back().name = fmt::format("parry {}x{}x{} depth {} cesaro {}", s.nx, s.ny, s.nt, s.depth, ces);
    }
  }
  std::vector<double> slices = invariant_slices(f);
  if (slices.size() > 3) slices.resize(3);
  for (double t : slices) v.push_back(slice_sampler(t));
  PeriodicSet P = periodic_points(5);
  int orbits = 0;
  for (const auto& p : P.pts) {
    if (orbits >= 10) break;
    for (int k = 1; k <= 5; ++k) {
      try {
        v.push_back(periodic_orbit_measure(f, MTPoint(p, slices[static_cast<std::size_t>(orbits) % slices.size()]), k));
        ++orbits;
        break;
      } catch (const LabError&) {
      }
    }
  }
  for (double w : {0.25, 0.5, 0.75})
    if (v[0].ucond == v[2].ucond && v[0].orientation == v[2].orientation) v.push_back(mixture(v[0], v[2], w));
  if (f.epsilon == 0) v.push_back(volume_sampler());
  return v;
}

void dilation_equals_entropy() {
  DichotomyConfig cfg;
  auto t0 = std::chrono::steady_clock::now();
  LeafFunctional L0 = dilation_functional(cos_map(0), cfg);
  double s0 = seconds_since(t0);
  double e0 = std::abs(L0.dilation / kLambda - 1);
  t0 = std::chrono::steady_clock::now();
  LeafFunctional L5 = dilation_functional(cos_map(0.05), cfg);
  double h = entropy_curve_growth(cos_map(0.05), u_leaf(cos_map(0.05), MTPoint(TorusPoint(0.37, 0.58), 0.1), 0.01), cfg.curve_n).slope;
  double s5 = seconds_since(t0);
  double e5 = std::abs(std::log(L5.dilation) - h) / h;
  report(e0 <= 0.01 && s0 <= 120 && e5 <= 0.02 && s5 <= 600, "dilation equals entropy",
         fmt::format("eps=0: D={:.6f} rel err {:.2e} (<=1%) in {:.1f}s (<=120s); eps=0.05: log D={:.6f} curve={:.6f} rel gap {:.2e} "
                     "(<=2%) in {:.1f}s (<=600s)",
                     L0.dilation, e0, s0, std::log(L5.dilation), h, e5, s5));
}

void three_estimators() {
  bool ok = true;
  std::string d;
  for (double eps : kSweep) {
    const auto& R = lab(eps).R;
    double g = std::max({rel_gap(R.h_curve, R.h_box), rel_gap(R.h_curve, R.h_margulis), rel_gap(R.h_box, R.h_margulis)});
    ok = ok && std::isfinite(g) && g <= 0.05;
    d += fmt::format("eps={}: curve {:.4f} box {:.4f} logD {:.4f} gap {:.2e}; ", eps, R.h_curve, R.h_box, R.h_margulis, g);
  }
  report(ok, "three-estimator entropy agreement", d + "tol 5%");
}

void variational_inequality() {
  bool ok = true;
  std::string d;
  UnstableEntropyOptions o;
  o.n_samples = 400;
  for (double eps : kSweep) {
    Lab& L = lab(eps);
    double bound = std::log(L.S.cu.dilation);
    auto cands = candidates(L);
    int bad = 0;
    double worst = -1e300;
    for (const auto& mu : cands) {
      auto e = unstable_entropy(L.f, mu, L.S.u, o);
      double z = (e.value - bound) / std::max(e.stderr_, 1e-300);
      worst = std::max(worst, e.value - bound - 3 * e.stderr_);
      if (e.value > bound + 3 * e.stderr_) {
        ++bad;
        fmt::print("  violation eps={} {}: h={:.5f} logD={:.5f} z={:.2f}\n", eps, mu.name, e.value, bound, z);
      }
    }
    ok = ok && bad == 0 && cands.size() >= 20;
    d += fmt::format("eps={}: {} candidates, {} violations, max(h - logD - 3se) {:.3e}; ", eps, cands.size(), bad, worst);
  }
  report(ok, "variational inequality", d);
}

void equality_case() {
  bool ok = true;
  std::string d;
  UnstableEntropyOptions o;
  o.n_samples = 1000;
  for (auto [eps, tol] : {std::pair{0.0, 0.02}, std::pair{0.05, 0.05}}) {
    Lab& L = lab(eps);
    auto e = unstable_entropy(L.f, L.qa->sampler, L.S.u, o);
    double bound = std::log(L.S.cu.dilation), r = std::abs(e.value / bound - 1);
    ok = ok && r <= tol;
    d += fmt::format("eps={}: h(cu*s)={:.5f}+-{:.1e} logD={:.5f} rel {:.2e} (<={}); ", eps, e.value, e.stderr_, bound, r, tol);
  }
  report(ok, "equality for the quasi-product", d);
}

void margulis_invariances() {
  bool ok = true;
  std::string d;
  for (double eps : {0.0, 0.05}) {
    Lab& L = lab(eps);
    const LeafFunctional& F = L.S.cu.functional;
    double D = L.S.cu.dilation;
    std::vector<CsHolonomy> bat;
    for (const auto& h : L.S.cu.charts)
      for (double p : {0.02, 0.05}) bat.push_back(CsHolonomy{h.chart.leaf, h.chart.w0, h.chart.w1, p, 0.0});
    CsReport cs = cs_quasi_invariance_check(F, bat);
    double C = 1 / D + 1 + D;
    bool cs_ok = cs.worst <= C;
    // halving the w-grid splits every cell's mass in two
    double halving = 0;
    for (const auto& h : L.S.cu.charts) {
      const int nw = 4, nc = 4;
      auto coarse = cell_masses(F, h.chart, nw, nc), fine = cell_masses(F, h.chart, 2 * nw, nc);
      for (int c = 0; c < nc; ++c)
        for (int w = 0; w < nw; ++w) {
          double parent = coarse[static_cast<std::size_t>(c * nw + w)];
          if (parent <= 1e-12 * L.S.cu.charts.size()) continue;
          for (int k = 0; k < 2; ++k) {
            double child = fine[static_cast<std::size_t>(c * 2 * nw + 2 * w + k)];
            halving = std::max(halving, std::abs(child / parent - 0.5) / 0.5);
          }
        }
    }
    bool e_ok = L.S.cu.s_invariance_residual <= 0.02 && L.S.u.u_dilation_residual <= 0.02 && cs_ok && halving <= 0.2;
    ok = ok && e_ok;
    d += fmt::format("eps={}: s-res {:.2e} u-res {:.2e} (<=0.02) cs worst {:.4f} in [1/C, C], C={:.4f}; halving dev {:.2e} (<=20%); ", eps,
                     L.S.cu.s_invariance_residual, L.S.u.u_dilation_residual, cs.worst, C, halving);
  }
  report(ok, "Margulis invariances", d);
}

void holonomy_ac() {
  LabConfig c = load_config(golden("bumpx_holonomy.toml"));
  HolonomyLadder H = holonomy_ladder(c);
  bool pos = true;
  for (double y : H.sup_dev) pos = pos && y > 0;
  PowerFit p = pos ? power_fit(H.perp, H.sup_dev) : PowerFit{};
  LabConfig z = c;
  z.map = cos_map(0);
  HolonomyLadder H0 = holonomy_ladder(z);
  double worst0 = *std::max_element(H0.sup_dev.begin(), H0.sup_dev.end());
  bool ok = pos && p.alpha > 0 && p.r2 >= 0.9 && worst0 <= 1e-8;
  report(ok, "holonomy absolute continuity",
         fmt::format("bump_x eps=0.05 sizes {}: sup|J-1| {:.3e}; fit alpha {:.3f} (>0) C {:.3f} R2 {:.3f} (>=0.9); eps=0 sup|J-1| {:.1e} (<=1e-8)",
                     fmt::join(H.perp, ","), fmt::join(H.sup_dev, ","), p.alpha, p.C, p.r2, worst0));
}

void dichotomy_ground_truth() {
  // eps = 0 over 100 seeds; the systems are seed-free, only the exponent sampling changes
  Lab& Z = lab(0);
  int hyperbolic = 0, nonhyp = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    LyapunovOptions lo;
    lo.horizon = Z.cfg.horizon;
    lo.n_samples = static_cast<int>(Z.cfg.n_samples);
    lo.seed = seed;
    auto a = lyapunov_center(Z.f, Z.qa->sampler, lo), b = lyapunov_center(Z.f, Z.qb->sampler, lo);
    Verdict v = classify(a.value, a.stderr_, b.value, b.stderr_);
    hyperbolic += v == Verdict::TwoHyperbolicMMEs;
    nonhyp += v == Verdict::NonhyperbolicCase;
  }
  bool seeds_ok = nonhyp == 100 && hyperbolic < 1 && Z.R.verdict == Verdict::NonhyperbolicCase;
  std::string d = fmt::format("eps=0: {}/100 NonhyperbolicCase, false-hyperbolic rate {}% (<1%); ", nonhyp, hyperbolic);
  bool order_ok = true, mme_ok = true;
  for (double eps : kSweep) {
    const auto& R = lab(eps).R;
    double se = std::hypot(R.lc_cu.stderr_, R.lc_cs.stderr_);
    bool o = R.lc_cs.value <= R.lc_cu.value + 3 * se;
    order_ok = order_ok && o;
    d += fmt::format("eps={}: {} lc(cs*u) {:.4f} <= lc(cu*s) {:.4f} + 3se {}", eps, verdict_name(R.verdict), R.lc_cs.value, R.lc_cu.value,
                     o ? "ok" : "VIOLATED");
    if (R.verdict == Verdict::TwoHyperbolicMMEs) {
      bool m = R.hist_tv >= 0.1 && R.support_cu >= 1.0 && R.support_cs >= 1.0;
      mme_ok = mme_ok && m;
      d += fmt::format(", TV {:.3f} (>=0.1) support {:.3f}/{:.3f} (full = 1)", R.hist_tv, R.support_cu, R.support_cs);
    }
    d += "; ";
  }
  report(seeds_ok && order_ok && mme_ok, "dichotomy ground truth", d);
}

void twin_measure() {
  bool ok = true;
  std::string d;
  {
    // eps = 0: hypothesis fails, every sampled point reports UnboundedWc
    Lab& Z = lab(0);
    int unbounded = 0;
    auto xs = Z.qb->sampler.draw(3, 20);
    for (const auto& x : xs) {
      try {
        twin_map(Z.f, x);
      } catch (const LabError& e) {
        unbounded += e.kind == ErrorKind::UnboundedWc;
      }
    }
    ok = ok && unbounded == 20;
    d += fmt::format("eps=0: UnboundedWc on {}/20 points; ", unbounded);
  }
  for (double eps : {0.02, 0.05}) {
    Lab& L = lab(eps);
    const auto& lc = L.R.lc_cs;
    if (!(lc.value < -3 * lc.stderr_)) {
      d += fmt::format("eps={}: lc(cs*u) {:.4f} not negative, hypothesis not met; ", eps, lc.value);
      continue;
    }
    TwinSample T = twin_sample(L.f, L.qb->sampler, 11, 200);
    if (T.defined_fraction < 0.9) {
      d += fmt::format("eps={}: twin defined on {:.2f} (<0.9), hypothesis not met; ", eps, T.defined_fraction);
      continue;
    }
    double resid = 0;
    int checked = 0;
    for (std::size_t i = 0; i < T.source.size() && checked < 40; ++i) {
      try {
        MTPoint bfx = twin_map(L.f, apply(L.f, T.source[i]));
        resid = std::max(resid, distance(bfx, apply(L.f, T.image[i])));
        ++checked;
      } catch (const LabError&) {
      }
    }
    LyapunovOptions lo;
    lo.n_samples = 400;
    lo.horizon = 200;
    auto e = lyapunov_center(L.f, twin_sampler(L.f, L.qb->sampler), lo);
    bool o = e.value >= -3 * e.stderr_ && resid <= 1e-6 && checked > 0;
    ok = ok && o;
    d += fmt::format("eps={}: defined {:.2f}, image exponent {:.4f}+-{:.1e} (>= -3se), equivariance {:.1e} over {} pts (<=1e-6); ", eps,
                     T.defined_fraction, e.value, e.stderr_, resid, checked);
  }
  report(ok, "twin measure", d);
}

void uniqueness() {
  bool ok = true;
  std::string d;
  for (double eps : {0.0, 0.05}) {
    Lab& L = lab(eps);
    std::vector<CuChart> charts;
    for (const auto& h : L.S.cu.charts) charts.push_back(h.chart);
    // another phi_1: a different plaque and a smooth lap instead of the sharp one
    CuChart other{LeafChart(L.f, MTPoint(TorusPoint(0.52, 0.18), 0.0)), 0.0, 0.05, 0.0, 1.0, 0};
    LeafFunctional F2 = margulis_iterate(lap(other, 0.0, 0.05, 0.5), L.cfg.margulis);
    MargulisSystem S2 = cu_conditionals(F2, charts, L.cfg.cu_nw, L.cfg.cu_nc);
    double tv = histogram_tv(L.S.cu, S2);
    ok = ok && tv <= 0.02;
    d += fmt::format("eps={}: D {:.6f} vs {:.6f}, per-chart TV {:.2e} (<=0.02); ", eps, L.S.cu.dilation, F2.dilation, tv);
  }
  report(ok, "uniqueness of the Margulis system", d);
}

void without_plotting() {
  // every golden config through the pipeline; nothing here depends on the plotting scripts
  std::vector<std::pair<std::string, std::string>> runs{{"eps0_dichotomy.toml", "dichotomy"},
                                                        {"cos002_dichotomy.toml", "dichotomy"},
                                                        {"cos005_dichotomy.toml", "dichotomy"},
                                                        {"cos005_dichotomy.toml", "entropy"},
                                                        {"cos005_dichotomy.toml", "margulis"},
                                                        {"cos005_dichotomy.toml", "splitting"},
                                                        {"bumpx_holonomy.toml", "holonomy"},
                                                        {"shear_dichotomy.toml", "dichotomy"},
                                                        {"sweep.toml", "sweep"}};
  bool ok = true;
  int files = 0;
  std::ostringstream err;
  for (const auto& [cfgname, cmd] : runs) {
    LabConfig c = load_config(golden(cfgname));
    c.out = (fs::temp_directory_path() / "margulab_acceptance" / (cfgname + "." + cmd)).string();
    fs::remove_all(c.out);
    int rc = run_subcommand(cmd, c, err);
    if (rc != 0) {
      ok = false;
      fmt::print("  {} {} exited {}: {}\n", cmd, cfgname, rc, err.str());
      continue;
    }
    std::ifstream in(fs::path(c.out) / "manifest.json");
    auto m = nlohmann::json::parse(in);
    for (const auto& f : m["files"]) {
      ok = ok && fs::exists(fs::path(c.out) / f["path"].get<std::string>());
      ++files;
    }
  }
  report(ok, "runnable without the plotting component", fmt::format("{} golden runs, {} output files present", runs.size(), files));
}

}  // namespace

int main() {
  set_workers(0);
  auto t0 = std::chrono::steady_clock::now();
  dilation_equals_entropy();
  three_estimators();
  variational_inequality();
  equality_case();
  margulis_invariances();
  holonomy_ac();
  dichotomy_ground_truth();
  twin_measure();
  uniqueness();
  without_plotting();
  fmt::print("{} criteria failed, {:.0f}s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
