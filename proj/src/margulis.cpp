#include "margulab/margulis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace ml {

bool CuTestFunction::positive() const {
  for (const auto& c : region.cols)
    if (c.w1 > c.w0)
      for (const auto& i : c.iv)
        if (i.b > i.a && i.weight > 0) return true;
  return false;
}

double CuTestFunction::sup() const {
  double m = 0;
  for (const auto& c : region.cols)
    for (const auto& i : c.iv) m = std::max(m, i.weight);
  return m;
}

CuTestFunction indicator(const CuChart& c, double w0, double w1, double s0, double s1, int ncols) {
  return {c, ColumnRegion::rect(w0, w1, s0, s1, ncols), false};
}

CuTestFunction grid_function(const CuChart& c, int nw, int nc, const std::vector<double>& values) {
  CuTestFunction f{c, {}, false};
  for (int i = 0; i < nw; ++i) {
    Column col;
    col.w0 = c.w0 + (c.w1 - c.w0) * i / nw;
    col.w1 = c.w0 + (c.w1 - c.w0) * (i + 1) / nw;
    for (int j = 0; j < nc; ++j) {
      double v = values[static_cast<std::size_t>(j * nw + i)];
      if (v < 0) throw LabError(ErrorKind::InvalidDescriptor, "test functions are nonnegative");
      if (v > 0) col.iv.push_back({c.c0 + (c.c1 - c.c0) * j / nc, c.c0 + (c.c1 - c.c0) * (j + 1) / nc, v});
    }
    f.region.cols.push_back(col);
  }
  return f;
}

CuTestFunction lap(const CuChart& c, double w0, double w1, double gamma, int ncols) {
  CuTestFunction f{c, ColumnRegion::rect(w0, w1, gamma, gamma + 1, ncols), false};
  for (auto& col : f.region.cols) col.iv[0].b = gamma + c.leaf.ret(0.5 * (col.w0 + col.w1), gamma);
  return f;
}

double ell(const CuTestFunction& phi, int n, const QuadOptions& q) { return ell_series(phi.chart.leaf, phi.region, n, q)[static_cast<std::size_t>(n)]; }

double LeafFunctional::eval_series(const std::vector<double>& l) const {
  double s = 0;
  for (int k = n_max - window + 1; k <= n_max; ++k) s += l[static_cast<std::size_t>(k)] / ref[static_cast<std::size_t>(k)];
  return s / window;
}

double LeafFunctional::eval_shifted_series(const std::vector<double>& l) const {
  double s = 0;
  for (int k = n_max - window + 1; k <= n_max; ++k) s += l[static_cast<std::size_t>(k + 1)] / ref[static_cast<std::size_t>(k)];
  return s / window;
}

std::vector<double> LeafFunctional::series(const CuTestFunction& phi) const {
  if (!(phi.chart.leaf.map() == f) && !(f.family == Family::TimeChange && f.epsilon == 0 && phi.chart.leaf.map().epsilon == 0))
    throw LabError(ErrorKind::NotApplicable, "test function lives on leaves of a different map", "margulis");
  return ell_series(phi.chart.leaf, phi.region, n_max + 1, quad);
}

double LeafFunctional::operator()(const CuTestFunction& phi) const { return eval_series(series(phi)); }
double LeafFunctional::eval_shifted(const CuTestFunction& phi) const { return eval_shifted_series(series(phi)); }

LeafFunctional margulis_iterate(const CuTestFunction& phi1, const MargulisOptions& opt) {
  if (!phi1.positive()) throw LabError(ErrorKind::InvalidDescriptor, "phi_1 must have nonempty interior", "margulis");
  if (opt.window < 1 || opt.window > opt.n_max + 1)
    throw LabError(ErrorKind::ConfigError, "margulis.window: must lie in [1, n_max + 1]", "margulis");
  LeafFunctional L;
  L.f = phi1.chart.leaf.map();
  L.n_max = opt.n_max;
  L.window = opt.window;
  L.quad = opt.quad;
  L.ref = ell_series(phi1.chart.leaf, phi1.region, opt.n_max + 1, opt.quad);
  for (std::size_t k = 0; k + 1 < L.ref.size(); ++k) L.ratios.push_back(L.ref[k + 1] / L.ref[k]);
  double lo = 1e300, hi = -1e300, s = 0;
  for (int k = opt.n_max - opt.window + 1; k <= opt.n_max; ++k) {
    double r = L.ratios[static_cast<std::size_t>(k)];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    s += r;
  }
  L.dilation = s / opt.window;
  L.spread = (hi - lo) / L.dilation;
  // observed geometric rate of ratio_k -> D
  std::vector<double> x, y;
  for (int k = 1; k <= opt.n_max - opt.window; ++k) {
    double d = std::abs(L.ratios[static_cast<std::size_t>(k)] - L.dilation);
    if (d > 1e-13 * L.dilation) {
      x.push_back(k);
      y.push_back(std::log(d));
    }
  }
  if (x.size() >= 3) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sx += x[i];
      sy += y[i];
      sxx += x[i] * x[i];
      sxy += x[i] * y[i];
    }
    L.rate = std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
  }
  if (!(L.spread <= opt.tol))
    throw LabError(ErrorKind::NoConvergence,
                   fmt::format("l_(k+1)/l_k spread {:.3e} over the last {} steps exceeds {:.1e}", L.spread, opt.window, opt.tol),
                   "margulis");
  return L;
}

double ChartHistogram::total() const { return pairwise_sum(mass); }

std::vector<double> ChartHistogram::normalized() const {
  double t = total();
  std::vector<double> p(mass);
  for (auto& v : p) v = t > 0 ? v / t : 0.0;
  return p;
}

std::vector<double> cell_masses(const LeafFunctional& L, const CuChart& c, int nw, int nc) {
  const int N = L.n_max + 1;
  const std::size_t m = static_cast<std::size_t>(N) + 1;
  std::vector<double> edges(static_cast<std::size_t>(nc) + 1);
  for (int j = 0; j <= nc; ++j) edges[static_cast<std::size_t>(j)] = c.c0 + (c.c1 - c.c0) * j / nc;
  const double dw = (c.w1 - c.w0) / nw;
  const int sub = c.leaf.column_independent() ? 1 : 4;
  auto column = [&](double w0, std::vector<double>& out) {
    // out[j]: Lambda of cell j in this column
    std::vector<double> H(edges.size() * m), acc(static_cast<std::size_t>(nc) * m, 0.0);
    for (int q = 0; q < sub; ++q) {
      double w = w0 + dw * (q + 0.5) / sub;
      for (std::size_t e = 0; e < edges.size(); ++e) c.leaf.heights(w, edges[e], N, &H[e * m]);
      for (std::size_t j = 0; j < static_cast<std::size_t>(nc); ++j)
        for (std::size_t k = 0; k < m; ++k) {
          double a = H[j * m + k], b = H[(j + 1) * m + k];
          acc[j * m + k] += dw / sub * c.leaf.base_weight() / kLogLambda * std::pow(kLambda, a) * std::expm1((b - a) * kLogLambda);
        }
    }
    for (std::size_t j = 0; j < static_cast<std::size_t>(nc); ++j) {
      std::vector<double> l(acc.begin() + static_cast<long>(j * m), acc.begin() + static_cast<long>((j + 1) * m));
      out[j] = L.eval_series(l);
    }
  };
  std::vector<double> mass(static_cast<std::size_t>(nw) * static_cast<std::size_t>(nc));
  if (c.leaf.column_independent()) {
    std::vector<double> col(static_cast<std::size_t>(nc));
    column(c.w0, col);
    for (int j = 0; j < nc; ++j)
      for (int i = 0; i < nw; ++i) mass[static_cast<std::size_t>(j * nw + i)] = col[static_cast<std::size_t>(j)];
    return mass;
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < nw; ++i) {
    std::vector<double> col(static_cast<std::size_t>(nc));
    column(c.w0 + dw * i, col);
    for (int j = 0; j < nc; ++j) mass[static_cast<std::size_t>(j * nw + i)] = col[static_cast<std::size_t>(j)];
  }
  return mass;
}

double s_invariance_residual(const LeafFunctional& L, const std::vector<StableHolonomy>& battery, int nw, int nc) {
  double worst = 0;
  for (const auto& h : battery) {
    const CuChart& T = h.target();
    const CuChart& S = h.source();
    StableHolonomy back = h.inverse();
    std::vector<double> mt, ms;
    for (int j = 0; j < nc; ++j)
      for (int i = 0; i < nw; ++i) {
        double w0 = T.w0 + (T.w1 - T.w0) * i / nw, w1 = T.w0 + (T.w1 - T.w0) * (i + 1) / nw;
        double c0 = T.c0 + (T.c1 - T.c0) * j / nc, c1 = T.c0 + (T.c1 - T.c0) * (j + 1) / nc;
        double wm = 0.5 * (w0 + w1);
        mt.push_back(L.eval_series(ell_series(T.leaf, ColumnRegion::rect(w0, w1, c0, c1), L.n_max + 1, L.quad)));
        double a = c0 + back.shift(wm, c0), b = c1 + back.shift(wm, c1);
        ms.push_back(L.eval_series(ell_series(S.leaf, ColumnRegion::rect(w0, w1, a, b), L.n_max + 1, L.quad)));
      }
    double top = *std::max_element(mt.begin(), mt.end());
    for (std::size_t k = 0; k < mt.size(); ++k)
      if (mt[k] >= 1e-3 * top) worst = std::max(worst, std::abs(ms[k] - mt[k]) / mt[k]);
  }
  return worst;
}

MargulisSystem cu_conditionals(const LeafFunctional& L, const std::vector<CuChart>& charts, int nw, int nc,
                               const std::vector<StableHolonomy>& battery) {
  MargulisSystem s;
  s.sigma = "cu";
  s.f = L.f;
  s.dilation = L.dilation;
  s.functional = L;
  PeriodicSet P = periodic_points(s.period);
  for (const auto& c : charts) {
    ChartHistogram h;
    h.id = c.id;
    h.chart = c;
    h.nw = nw;
    h.nc = nc;
    h.mass = cell_masses(L, c, nw, nc);
    h.flagged = near_compact_leaf(c, P, s.tube, 1.0 + L.f.epsilon);
    s.charts.push_back(std::move(h));
  }
  if (!battery.empty()) s.s_invariance_residual = s_invariance_residual(L, battery);
  return s;
}

namespace {
void need_horizontal(const LeafChart& c) {
  if (!c.column_independent())
    throw LabError(ErrorKind::NotApplicable, "u-conditionals need slice-horizontal leaves (roof depending on t only)",
                   "margulis");
}
}  // namespace

double u_mass(const LeafFunctional& L, const LeafChart& chart, double w0, double w1, double c, int ncols) {
  need_horizontal(chart);
  ColumnRegion r = ColumnRegion::rect(w0, w1, c, c + chart.ret(0.0, c), ncols);
  return L.eval_series(ell_series(chart, r, L.n_max + 1, L.quad));
}

double u_mass_image(const LeafFunctional& L, const LeafChart& chart, double w0, double w1, double c, int ncols) {
  need_horizontal(chart);
  double a = c + chart.ret(0.0, c);
  ColumnRegion r = ColumnRegion::rect(w0, w1, a, a + chart.ret(0.0, a), ncols);
  return L.eval_series(ell_series(chart, r, L.n_max + 1, L.quad));
}

MargulisSystem u_conditionals(const MargulisSystem& cu, int nu) {
  MargulisSystem s = cu;
  s.sigma = cu.sigma == "cu" ? "u" : "s";
  s.charts.clear();
  double worst = 0;
  for (const auto& h : cu.charts) {
    if (h.flagged)
      throw LabError(ErrorKind::CompactLeafConflict, fmt::format("chart {} meets a compact center leaf", h.id), "margulis");
    ChartHistogram u;
    u.id = h.id;
    u.chart = h.chart;
    u.nw = nu;
    u.nc = 1;
    const CuChart& c = h.chart;
    for (int i = 0; i < nu; ++i) {
      double w0 = c.w0 + (c.w1 - c.w0) * i / nu, w1 = c.w0 + (c.w1 - c.w0) * (i + 1) / nu;
      double m = u_mass(cu.functional, c.leaf, w0, w1, c.c0);
      double mf = u_mass_image(cu.functional, c.leaf, w0, w1, c.c0);
      u.mass.push_back(m);
      worst = std::max(worst, std::abs(mf / m - cu.dilation) / cu.dilation);
    }
    s.charts.push_back(std::move(u));
  }
  s.u_dilation_residual = worst;
  return s;
}

CsReport cs_quasi_invariance_check(const LeafFunctional& L, const std::vector<CsHolonomy>& battery, double tol) {
  CsReport r;
  double D = L.dilation;
  r.C = 1.0 / D + 1.0 + D;
  for (const auto& h : battery) {
    double a = u_mass(L, h.chart, h.w0, h.w1, 0.0);
    double b = u_mass(L, h.chart.with_perp(h.perp), h.w0, h.w1, h.dc);
    double q = a / b;
    r.ratios.push_back(q);
    r.worst = std::max({r.worst, q, 1.0 / q});
  }
  r.within = r.worst <= r.C * (1.0 + tol);
  return r;
}

MargulisSystem stable_system(const MapDescriptor& f, const CuTestFunction& phi1_inverse, const std::vector<CuChart>& charts,
                             int nw, int nc, const MargulisOptions& opt) {
  if (!(phi1_inverse.chart.leaf.map() == f.inverse()))
    throw LabError(ErrorKind::InvalidDescriptor, "phi_1 must live on leaves of the inverse map", "margulis");
  LeafFunctional L = margulis_iterate(phi1_inverse, opt);
  MargulisSystem s = cu_conditionals(L, charts, nw, nc);
  s.sigma = "cs";
  return s;
}

double histogram_tv(const MargulisSystem& a, const MargulisSystem& b) {
  if (a.charts.size() != b.charts.size()) throw LabError(ErrorKind::InvalidDescriptor, "systems have different chart sets");
  double worst = 0;
  for (std::size_t i = 0; i < a.charts.size(); ++i) {
    auto p = a.charts[i].normalized(), q = b.charts[i].normalized();
    if (p.size() != q.size()) throw LabError(ErrorKind::InvalidDescriptor, "histograms have different shapes");
    double tv = 0;
    for (std::size_t k = 0; k < p.size(); ++k) tv += std::abs(p[k] - q[k]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

void save_checkpoint(const MargulisSystem& s, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["sigma"] = s.sigma;
  j["map"] = {{"family", family_name(s.f.family)},
              {"epsilon", s.f.epsilon},
              {"shape", shape_name(s.f.shape)},
              {"direction", direction_name(s.f.direction)}};
  j["dilation"] = s.dilation;
  const auto& L = s.functional;
  j["functional"] = {{"n_max", L.n_max}, {"window", L.window}, {"ref", L.ref},       {"ratios", L.ratios},
                     {"spread", L.spread}, {"rate", L.rate},     {"dilation", L.dilation}};
  j["period"] = s.period;
  j["tube"] = s.tube;
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  j["s_invariance_residual"] = num(s.s_invariance_residual);
  j["u_dilation_residual"] = num(s.u_dilation_residual);
  j["charts"] = nlohmann::json::array();
  for (const auto& h : s.charts) {
    std::string file = fmt::format("chart_{}.csv", h.id);
    const MTPoint& b = h.chart.leaf.base();
    j["charts"].push_back({{"id", h.id},
                           {"base", {b.p.x, b.p.y, b.t}},
                           {"perp", h.chart.leaf.perp()},
                           {"extent", {h.chart.w0, h.chart.w1, h.chart.c0, h.chart.c1}},
                           {"nw", h.nw},
                           {"nc", h.nc},
                           {"flagged", h.flagged},
                           {"file", file}});
    std::ofstream out(fs::path(dir) / file);
    out << "iw,ic,mass\n";
    for (int c = 0; c < h.nc; ++c)
      for (int w = 0; w < h.nw; ++w) out << fmt::format("{},{},{:.17g}\n", w, c, h.mass[static_cast<std::size_t>(c * h.nw + w)]);
  }
  std::ofstream(fs::path(dir) / "manifest.json") << j.dump(2) << "\n";
}

MargulisSystem load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw LabError(ErrorKind::ConfigError, "checkpoint: missing manifest.json in " + dir);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw LabError(ErrorKind::ConfigError, std::string("checkpoint: ") + e.what());
  }
  if (j.value("schema_version", 0) != 1) throw LabError(ErrorKind::ConfigError, "checkpoint: schema_version must be 1");
  MargulisSystem s;
  s.sigma = j["sigma"].get<std::string>();
  const auto& m = j["map"];
  s.f = MapDescriptor{parse_family(m["family"]), m["epsilon"].get<double>(), parse_shape(m["shape"]),
                      parse_direction(m["direction"])};
  s.dilation = j["dilation"];
  auto& L = s.functional;
  const auto& fj = j["functional"];
  L.f = s.f;
  L.n_max = fj["n_max"];
  L.window = fj["window"];
  L.ref = fj["ref"].get<std::vector<double>>();
  L.ratios = fj["ratios"].get<std::vector<double>>();
  L.spread = fj["spread"];
  L.rate = fj["rate"];
  L.dilation = fj["dilation"];
  s.period = j["period"];
  s.tube = j["tube"];
  auto num = [](const nlohmann::json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
  s.s_invariance_residual = num(j["s_invariance_residual"]);
  s.u_dilation_residual = num(j["u_dilation_residual"]);
  for (const auto& c : j["charts"]) {
    ChartHistogram h;
    h.id = c["id"];
    auto b = c["base"].get<std::vector<double>>();
    auto e = c["extent"].get<std::vector<double>>();
    LeafChart leaf = LeafChart(s.f, MTPoint::raw(TorusPoint(b[0], b[1]), b[2])).with_perp(c["perp"].get<double>());
    h.chart = CuChart{leaf, e[0], e[1], e[2], e[3], h.id};
    h.nw = c["nw"];
    h.nc = c["nc"];
    h.flagged = c["flagged"];
    h.mass.assign(static_cast<std::size_t>(h.nw) * static_cast<std::size_t>(h.nc), 0.0);
    std::ifstream csv(fs::path(dir) / c["file"].get<std::string>());
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
      std::istringstream ls(line);
      std::string a, bb, v;
      std::getline(ls, a, ',');
      std::getline(ls, bb, ',');
      std::getline(ls, v);
      h.mass[static_cast<std::size_t>(std::stoi(bb) * h.nw + std::stoi(a))] = std::stod(v);
    }
    s.charts.push_back(std::move(h));
  }
  return s;
}

}  // namespace ml
