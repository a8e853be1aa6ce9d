#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "margulab/labcli.hpp"

namespace ml {

namespace {

using ojson = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
std::string g17(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string(); }

ojson map_json(const MapDescriptor& f) {
  return ojson{{"family", family_name(f.family)},
               {"epsilon", f.epsilon},
               {"shape", shape_name(f.shape)},
               {"direction", direction_name(f.direction)}};
}

bool has_leaves(const MapDescriptor& f) { return !(f.family == Family::TransversalShear && f.epsilon != 0); }

MTPoint segment_base() { return MTPoint(TorusPoint(0.37, 0.58), 0.1); }

void hist_rows(std::string& csv, const MargulisSystem& s) {
  for (const auto& h : s.charts) {
    auto m = h.normalized();
    for (int c = 0; c < h.nc; ++c)
      for (int w = 0; w < h.nw; ++w)
        csv += fmt::format("{},{},{},{},{}\n", s.sigma, h.id, w, c, g17(m[static_cast<std::size_t>(c * h.nw + w)]));
  }
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"entropy", "margulis", "dichotomy", "holonomy", "splitting", "sweep"};
  return s;
}

void run_entropy(Run& r) {
  const LabConfig& c = r.config();
  const MapDescriptor& f = c.map;
  double h_curve = kNaN, h_marg = kNaN, D = kNaN;
  BoxLadder L;
  if (has_leaves(f)) {
    r.time("curve_growth", [&] {
      auto seg = u_leaf(f, segment_base(), c.segment_half_width);
      int n = f.t_only() ? c.dichotomy.curve_n : std::min(c.dichotomy.curve_n, 10);
      CurveGrowth g = entropy_curve_growth(f, seg, n);
      h_curve = g.slope;
      std::string csv = std::string(kCurveCsvHeader) + "\n";
      for (std::size_t k = 0; k < g.log_length.size(); ++k) csv += fmt::format("{},{}\n", k, g17(g.log_length[k]));
      r.write("curve_growth.csv", csv);
    });
    r.time("margulis", [&] {
      LeafFunctional F = dilation_functional(f, c.dichotomy);
      D = F.dilation;
      h_marg = std::log(D);
    });
  }
  r.time("box_ladder", [&] {
    auto rungs = c.dichotomy.ladder.empty() ? default_box_ladder(f) : c.dichotomy.ladder;
    for (auto& b : rungs) b.samples = c.box_samples;
    L = box_ladder(f, rungs);
    std::string csv = std::string(kLadderCsvHeader) + "\n";
    for (std::size_t i = 0; i < L.rungs.size(); ++i) {
      const auto& b = L.rungs[i];
      csv += fmt::format("{},{},{},{},{},{}\n", b.nx, b.ny, b.nt, b.depth, g17(L.log_rho[i]), g17(L.per_step[i]));
    }
    r.write("box_ladder.csv", csv);
  });
  double est[3] = {h_curve, L.extrapolated, h_marg}, gap = 0;
  bool all = true;
  for (double a : est)
    for (double b : est) {
      if (!std::isfinite(a) || !std::isfinite(b)) {
        all = false;
        continue;
      }
      gap = std::max(gap, std::abs(a - b) / std::min(std::abs(a), std::abs(b)));
    }
  ojson j;
  j["schema_version"] = 1;
  j["map"] = map_json(f);
  j["curve_growth"] = num(h_curve);
  j["box_ladder"] = num(L.extrapolated);
  j["log_dilation"] = num(h_marg);
  j["dilation"] = num(D);
  j["max_relative_gap"] = all ? num(gap) : ojson(nullptr);
  j["log_lambda"] = std::log(kLambda);
  r.write("entropy.json", j.dump(2) + "\n");
}

void run_margulis(Run& r) {
  namespace fs = std::filesystem;
  const LabConfig& c = r.config();
  const MapDescriptor& f = c.map;
  if (!has_leaves(f))
    throw LabError(ErrorKind::NotApplicable, "Margulis systems need the leaf charts (TimeChange or eps = 0)", "margulis");
  Systems S;
  bool resumed = false;
  r.time("systems", [&] {
    fs::path cp = c.checkpoint;
    if (!c.checkpoint.empty() && fs::exists(cp / "cu" / "manifest.json")) {
      S.cu = load_checkpoint((cp / "cu").string());
      if (!(S.cu.f == f)) throw LabError(ErrorKind::ConfigError, "checkpoint: stored map differs from map.*", "config");
      if (fs::exists(cp / "cs" / "manifest.json")) {
        S.cs = load_checkpoint((cp / "cs").string());
        S.u = u_conditionals(S.cu, c.dichotomy.nu);
        S.s = u_conditionals(S.cs, c.dichotomy.nu);
        S.full = true;
      }
      resumed = true;
    } else {
      S = build_systems(f, c.dichotomy);
      if (!c.checkpoint.empty()) {
        save_checkpoint(S.cu, (cp / "cu").string());
        if (S.full) save_checkpoint(S.cs, (cp / "cs").string());
      }
    }
  });
  CsReport cs;
  bool have_cs = false;
  if (S.full && f.t_only()) {
    r.time("cs_quasi_invariance", [&] {
      std::vector<CsHolonomy> bat;
      for (const auto& h : S.cu.charts)
        for (double d : {0.02, 0.05}) bat.push_back(CsHolonomy{h.chart.leaf, h.chart.w0, h.chart.w1, d, 0.0});
      cs = cs_quasi_invariance_check(S.cu.functional, bat);
      have_cs = true;
    });
  }
  const LeafFunctional& L = S.cu.functional;
  std::string ratios = std::string(kRatiosCsvHeader) + "\n";
  for (std::size_t k = 0; k < L.ref.size(); ++k)
    ratios += fmt::format("{},{},{}\n", k, g17(L.ref[k]), k < L.ratios.size() ? g17(L.ratios[k]) : std::string());
  r.write("margulis_ratios.csv", ratios);
  std::string hist = std::string(kHistCsvHeader) + "\n";
  hist_rows(hist, S.cu);
  if (S.full) {
    hist_rows(hist, S.u);
    hist_rows(hist, S.cs);
    hist_rows(hist, S.s);
  }
  r.write("margulis_hist.csv", hist);
  ojson j;
  j["schema_version"] = 1;
  j["map"] = map_json(f);
  j["dilation_u"] = num(S.cu.dilation);
  j["dilation_s"] = S.full ? num(S.cs.dilation) : ojson(nullptr);
  j["spread"] = num(L.spread);
  j["rate"] = num(L.rate);
  j["n_max"] = L.n_max;
  j["window"] = L.window;
  j["s_invariance_residual"] = num(S.cu.s_invariance_residual);
  j["u_dilation_residual"] = S.full ? num(S.u.u_dilation_residual) : ojson(nullptr);
  j["cs_quasi_invariance"] = have_cs ? ojson{{"C", cs.C}, {"worst", cs.worst}, {"within", cs.within}} : ojson(nullptr);
  j["flagged_charts"] = 0;
  for (const auto& h : S.cu.charts) j["flagged_charts"] = j["flagged_charts"].get<int>() + (h.flagged ? 1 : 0);
  r.write("margulis.json", j.dump(2) + "\n");
  (void)resumed;
}

void run_dichotomy(Run& r) {
  DichotomyReport R;
  r.time("dichotomy", [&] { R = dichotomy_report(r.config().map, r.config().dichotomy); });
  r.write("dichotomy.json", R.to_json() + "\n");
}

HolonomyLadder holonomy_ladder(const LabConfig& c) {
  LeafChart base(c.map, MTPoint(TorusPoint(0.31, 0.47), c.holonomy_t0));
  CuChart src{base, 0.0, 0.05, 0.0, 0.5, 0};
  HolonomyLadder H;
  for (double d : c.holonomy_sizes) {
    CuChart tg{base.with_perp(d), 0.0, 0.05, -0.3, 0.8, 1};
    StableHolonomy h(src, tg);
    H.perp.push_back(d);
    H.size.push_back(h.size());
    H.sup_dev.push_back(holonomy_jacobian(h, c.holonomy_nw, c.holonomy_nc).sup_dev);
  }
  return H;
}

void run_holonomy(Run& r) {
  const LabConfig& c = r.config();
  const MapDescriptor& f = c.map;
  HolonomyLadder H;
  r.time("jacobians", [&] { H = holonomy_ladder(c); });
  const auto &xs = H.perp, &sizes = H.size, &ys = H.sup_dev;
  std::string csv = std::string(kHolonomyCsvHeader) + "\n";
  for (std::size_t i = 0; i < xs.size(); ++i) csv += fmt::format("{},{},{}\n", g17(xs[i]), g17(sizes[i]), g17(ys[i]));
  r.write("holonomy.csv", csv);
  double worst = 0;
  bool positive = true;
  for (double y : ys) worst = std::max(worst, y), positive = positive && y > 0;
  ojson j;
  j["schema_version"] = 1;
  j["map"] = map_json(f);
  j["max_sup_dev"] = worst;
  if (positive) {
    PowerFit p = power_fit(xs, ys);
    j["fit"] = {{"alpha", num(p.alpha)}, {"C", num(p.C)}, {"r2", num(p.r2)}};
  } else {
    j["fit"] = nullptr;  // J == 1 somewhere on the ladder
  }
  r.write("holonomy.json", j.dump(2) + "\n");
}

void run_splitting(Run& r) {
  const LabConfig& c = r.config();
  const MapDescriptor& f = c.map;
  std::string csv = std::string(kFramesCsvHeader) + "\n";
  r.time("frames", [&] {
    // R3 low-discrepancy points, t kept off the seam
    const double a1 = 0.8191725133961645, a2 = 0.6710436067037893, a3 = 0.5497004779019703;
    for (int i = 1; i <= c.splitting_points; ++i) {
      MTPoint x(TorusPoint(std::fmod(0.5 + a1 * i, 1.0), std::fmod(0.5 + a2 * i, 1.0)), 0.05 + 0.9 * std::fmod(0.5 + a3 * i, 1.0));
      SplittingFrame F = compute_splitting(f, x, c.splitting);
      csv += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", g17(x.p.x), g17(x.p.y), g17(x.t), g17(F.e_s.a), g17(F.e_s.b),
                         g17(F.e_s.c), g17(F.e_c.a), g17(F.e_c.b), g17(F.e_c.c), g17(F.e_u.a), g17(F.e_u.b), g17(F.e_u.c),
                         g17(F.residual), g17(F.min_angle));
    }
  });
  r.write("frames.csv", csv);
  std::string ex = exponent_csv_header() + "\n";
  r.time("exponents", [&] {
    LyapunovOptions o;
    o.horizon = c.dichotomy.horizon;
    o.n_samples = static_cast<int>(c.dichotomy.n_samples);
    o.seed = c.seed;
    for (auto k : {ExponentKind::Stable, ExponentKind::Center, ExponentKind::Unstable})
      ex += exponent_csv_row(f, lyapunov(f, volume_sampler(), k, o)) + "\n";
  });
  r.write("exponents.csv", ex);
}

void run_sweep(Run& r) {
  const LabConfig& c = r.config();
  std::string csv = std::string(kSweepCsvHeader) + "\n";
  for (double eps : c.sweep_epsilons) {
    MapDescriptor f = c.map;
    f.epsilon = eps;
    try {
      validate(f);
    } catch (const LabError& e) {
      throw LabError(ErrorKind::ConfigError, fmt::format("sweep.epsilons: {} gives an invalid map ({})", eps, e.what()), "config");
    }
    DichotomyReport R;
    r.time(fmt::format("dichotomy eps={}", eps), [&] { R = dichotomy_report(f, c.dichotomy); });
    r.write(fmt::format("sweep/dichotomy_eps_{}.json", eps), R.to_json() + "\n");
    csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", g17(eps), verdict_name(R.verdict), g17(R.lc_cu.value), g17(R.lc_cu.stderr_),
                       g17(R.lc_cs.value), g17(R.lc_cs.stderr_), g17(R.h_curve), g17(R.h_box), g17(R.h_margulis),
                       R.restricted ? "true" : "false");
  }
  r.write("sweep.csv", csv);
}

int exit_code(const LabError& e) {
  switch (e.kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidDescriptor: return 2;
    case ErrorKind::RefinementBudgetExceeded: return 4;
    default: return 3;
  }
}

int run_subcommand(const std::string& name, const LabConfig& cfg, std::ostream& err) {
  static const std::map<std::string, void (*)(Run&)> table{{"entropy", run_entropy},     {"margulis", run_margulis},
                                                           {"dichotomy", run_dichotomy}, {"holonomy", run_holonomy},
                                                           {"splitting", run_splitting}, {"sweep", run_sweep}};
  auto it = table.find(name);
  if (it == table.end()) {
    err << "labcli: unknown subcommand '" << name << "'\n";
    return 2;
  }
  try {
    set_workers(cfg.workers);
    Run r(cfg, name);
    it->second(r);
    r.finish();
    return 0;
  } catch (const LabError& e) {
    err << "labcli: " << name << " failed";
    if (!e.stage.empty()) err << " in stage '" << e.stage << "'";
    err << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "labcli: " << name << " failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ml
