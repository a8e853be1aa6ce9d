#include "margulab/foliation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace ml {

namespace {

double interp(const std::vector<double>& x, const std::vector<double>& y, double v) {
  if (x.size() == 1) return y[0];
  auto it = std::upper_bound(x.begin(), x.end(), v);
  std::size_t j = static_cast<std::size_t>(it - x.begin());
  j = std::clamp<std::size_t>(j, 1, x.size() - 1);
  double a = (v - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + a * (y[j] - y[j - 1]);
}

bool tilted(const MapDescriptor& f) { return f.family == Family::TransversalShear && f.epsilon != 0; }

}  // namespace

double LeafCurve::eval(double wv) const { return interp(w, s, wv); }

std::vector<MTPoint> LeafCurve::points() const {
  std::vector<MTPoint> out;
  for (std::size_t i = 0; i < w.size(); ++i) out.push_back(chart.point(w[i], s[i]));
  return out;
}

LeafCurve u_leaf(const MapDescriptor& f, const MTPoint& x, double half_width, int iters, double tol, int nodes,
                 double arc_step) {
  if (tilted(f)) throw LabError(ErrorKind::NotApplicable, "u_leaf: shear leaves are not horizontal", "foliation");
  LeafCurve lc{LeafChart(f, x), {}, {}, 0, {}};
  const LeafChart& c = lc.chart;
  double W = half_width / c.base_weight();
  for (int i = 0; i < nodes; ++i) lc.w.push_back(-W + 2 * W * i / (nodes - 1));
  std::vector<double> back_h(static_cast<std::size_t>(iters) + 1, 0.0);
  for (int k = 1; k <= iters; ++k) back_h[static_cast<std::size_t>(k)] = c.back(0.0, back_h[static_cast<std::size_t>(k - 1)]);
  std::vector<double> prev(lc.w.size(), 0.0), cur(lc.w.size());
  for (int n = 1; n <= iters; ++n) {
    double s0 = back_h[static_cast<std::size_t>(n)];
    double ref = c.height_n(0.0, s0, n);
    double res = 0;
    for (std::size_t i = 0; i < lc.w.size(); ++i) {
      cur[i] = c.height_n(lc.w[i], s0, n) - ref;
      res = std::max(res, std::abs(cur[i] - prev[i]));
    }
    lc.residual_history.push_back(res);
    std::swap(prev, cur);
  }
  lc.s = prev;
  // adaptive polyline: split segments longer than arc_step
  double s0 = back_h[static_cast<std::size_t>(iters)];
  double ref = c.height_n(0.0, s0, iters);
  for (std::size_t i = 1; i < lc.w.size() && lc.w.size() < (1u << 16);) {
    double sm = 0.5 * (lc.s[i] + lc.s[i - 1]);
    if (std::hypot(c.u_length(lc.w[i] - lc.w[i - 1], sm), lc.s[i] - lc.s[i - 1]) > arc_step) {
      double wm = 0.5 * (lc.w[i] + lc.w[i - 1]);
      lc.w.insert(lc.w.begin() + static_cast<long>(i), wm);
      lc.s.insert(lc.s.begin() + static_cast<long>(i), c.height_n(wm, s0, iters) - ref);
    } else {
      ++i;
    }
  }
  lc.residual = lc.residual_history.empty() ? 0 : lc.residual_history.back();
  if (!(lc.residual <= tol))
    throw LabError(ErrorKind::NoConvergence, fmt::format("u_leaf residual {:.3e} > {:.1e} after {} steps", lc.residual, tol, iters),
                   "foliation");
  return lc;
}

std::vector<double> graph_transform_step(const MapDescriptor& f, const MTPoint& x, const std::vector<double>& r,
                                         const std::vector<double>& g) {
  if (tilted(f)) throw LabError(ErrorKind::NotApplicable, "graph_transform_step: shear leaves are not horizontal", "foliation");
  LeafChart c(f, x);
  double sp = c.back(0.0, 0.0);
  double ref = c.height_n(0.0, sp, 1);
  double lp = std::pow(kLambda, sp);
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    double w = r[i] / c.base_weight();
    double gp = interp(r, g, r[i] * lp);
    out[i] = c.height_n(w, sp + gp, 1) - ref;
  }
  return out;
}

double leaf_volume(const CuChart& c, double w0, double w1, double s0, double s1) {
  if (!(w1 > w0) || !(s1 > s0)) return 0.0;
  if (!c.contains(w0, s0) || !c.contains(w1, s1))
    throw LabError(ErrorKind::OutOfChart, fmt::format("rectangle [{},{}]x[{},{}] leaves the chart", w0, w1, s0, s1), "foliation");
  return c.leaf.area(w0, w1, s0, s1);
}

std::string curve_csv(const LeafCurve& lc) {
  std::string out = "w,c,value\n";
  double L = 0;
  for (std::size_t i = 0; i < lc.w.size(); ++i) {
    if (i > 0)
      L += std::hypot(lc.chart.u_length(lc.w[i] - lc.w[i - 1], 0.5 * (lc.s[i] + lc.s[i - 1])), lc.s[i] - lc.s[i - 1]);
    out += fmt::format("{:.17g},{:.17g},{:.17g}\n", lc.w[i], lc.s[i], L);
  }
  return out;
}

std::string jacobian_csv(const JacobianField& jf) {
  std::string out = "w,c,value\n";
  std::size_t nw = jf.w_edges.size() - 1, nc = jf.c_edges.size() - 1;
  for (std::size_t j = 0; j < nc; ++j)
    for (std::size_t i = 0; i < nw; ++i)
      out += fmt::format("{:.17g},{:.17g},{:.17g}\n", 0.5 * (jf.w_edges[i] + jf.w_edges[i + 1]),
                         0.5 * (jf.c_edges[j] + jf.c_edges[j + 1]), jf.at(i, j));
  return out;
}

double curve_length(const LeafCurve& lc) {
  double L = 0;
  for (std::size_t i = 1; i < lc.w.size(); ++i) {
    double du = lc.chart.u_length(lc.w[i] - lc.w[i - 1], 0.5 * (lc.s[i] + lc.s[i - 1]));
    L += std::hypot(du, lc.s[i] - lc.s[i - 1]);
  }
  return L;
}

int covering_number(const LeafChart& c, const std::vector<std::pair<double, double>>& pts, double rho) {
  std::vector<std::pair<double, double>> centers;
  for (const auto& p : pts) {
    bool covered = false;
    for (const auto& q : centers) {
      double d = std::hypot(c.u_length(p.first - q.first, 0.5 * (p.second + q.second)), p.second - q.second);
      if (d <= rho) {
        covered = true;
        break;
      }
    }
    if (!covered) centers.push_back(p);
  }
  return static_cast<int>(centers.size());
}

CenterSegment center_segment(const MapDescriptor& f, const MTPoint& x, int nodes) {
  if (tilted(f)) throw LabError(ErrorKind::NotApplicable, "center_segment: shear center leaves are not flow lines", "foliation");
  CenterSegment cs;
  cs.start = x;
  if (f.family == Family::TransversalShear)
    cs.length = 1.0;
  else
    cs.length = f.direction == Direction::Forward ? tau(f, x) : tau_inverse(f, x);
  double sg = f.direction == Direction::Forward ? 1.0 : -1.0;
  for (int k = 0; k < nodes; ++k) cs.pts.push_back(flow(x, sg * cs.length * k / nodes));
  return cs;
}

StableHolonomy::StableHolonomy(const CuChart& source, const CuChart& target, const HolonomyOptions& opt)
    : src_(source), tgt_(target), opt_(opt) {
  const MTPoint& a = source.leaf.base();
  const MTPoint& b = target.leaf.base();
  if (!(source.leaf.map() == target.leaf.map()) || a.p.x != b.p.x || a.p.y != b.p.y || a.t != b.t)
    throw LabError(ErrorKind::NotApplicable, "holonomy charts must share a base orbit", "foliation");
}

double StableHolonomy::shift(double w, double c) const {
  const int n = opt_.n;
  double target = src_.leaf.height_n(w, c, n);
  auto F = [&](double d) { return tgt_.leaf.height_n(w, c + d, n) - target; };
  double lo = -opt_.max_shift, hi = opt_.max_shift;
  double flo = F(lo), fhi = F(hi);
  if (flo > 0 || fhi < 0)
    throw LabError(ErrorKind::NoIntersection, fmt::format("stable leaf through ({}, {}) misses the target chart", w, c), "foliation");
  // Illinois false position
  int side = 0;
  double d = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    d = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(d > lo && d < hi)) d = 0.5 * (lo + hi);
    double fd = F(d);
    if (std::abs(fd) <= 1e-15) return d;
    if (fd < 0) {
      lo = d;
      flo = fd;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = d;
      fhi = fd;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

double StableHolonomy::size(int nw, int nc) const {
  LeafChart rel = src_.leaf.with_perp(tgt_.leaf.perp() - src_.leaf.perp());
  double sup = 0;
  for (int i = 0; i < nw; ++i)
    for (int j = 0; j < nc; ++j) {
      double w = src_.w0 + (src_.w1 - src_.w0) * (i + 0.5) / nw;
      double c = src_.c0 + (src_.c1 - src_.c0) * (j + 0.5) / nc;
      sup = std::max(sup, std::hypot(rel.perp_length(c), shift(w, c)));
    }
  return sup;
}

namespace {
double cell_jacobian(const StableHolonomy& h, double ca, double cb, double da, double db) {
  double num = std::pow(kLambda, ca) * std::expm1((cb - ca) * kLogLambda) * h.source().leaf.base_weight();
  double den = std::pow(kLambda, ca + da) * std::expm1((cb + db - ca - da) * kLogLambda) * h.target().leaf.base_weight();
  if (!(den > 1e-300) || !std::isfinite(den))
    throw LabError(ErrorKind::DegenerateCell, fmt::format("image of cell [{}, {}] has measure {}", ca, cb, den), "foliation");
  return num / den;
}
}  // namespace

JacobianField holonomy_jacobian(const StableHolonomy& h, int nw, int nc) {
  const CuChart& s = h.source();
  JacobianField jf;
  for (int i = 0; i <= nw; ++i) jf.w_edges.push_back(s.w0 + (s.w1 - s.w0) * i / nw);
  for (int j = 0; j <= nc; ++j) jf.c_edges.push_back(s.c0 + (s.c1 - s.c0) * j / nc);
  jf.J.assign(static_cast<std::size_t>(nw) * static_cast<std::size_t>(nc), 1.0);
  bool degenerate = false;
  LabError err(ErrorKind::DegenerateCell, "");
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < nw; ++i) {
    try {
      double wm = 0.5 * (jf.w_edges[static_cast<std::size_t>(i)] + jf.w_edges[static_cast<std::size_t>(i + 1)]);
      std::vector<double> d(static_cast<std::size_t>(nc) + 1);
      for (int j = 0; j <= nc; ++j) d[static_cast<std::size_t>(j)] = h.shift(wm, jf.c_edges[static_cast<std::size_t>(j)]);
      for (int j = 0; j < nc; ++j) {
        auto J = static_cast<std::size_t>(j);
        jf.J[J * static_cast<std::size_t>(nw) + static_cast<std::size_t>(i)] =
            cell_jacobian(h, jf.c_edges[J], jf.c_edges[J + 1], d[J], d[J + 1]);
      }
    } catch (const LabError& e) {
#pragma omp critical
      {
        degenerate = true;
        err = e;
      }
    }
  }
  if (degenerate) throw err;
  for (double v : jf.J) jf.sup_dev = std::max(jf.sup_dev, std::abs(v - 1.0));
  return jf;
}

double jacobian_at(const StableHolonomy& h, double w, double c, double eta) {
  double a = c - 0.5 * eta, b = c + 0.5 * eta;
  return cell_jacobian(h, a, b, h.shift(w, a), h.shift(w, b));
}

ColumnRegion cu_ball(const LeafChart& c, double w, double s, double r) {
  double hw = r / c.u_length(1.0, s);
  return ColumnRegion::rect(w - hw, w + hw, s - r, s + r);
}

VolumeComparison volume_comparison(const LeafChart& c, const ColumnRegion& A, double r,
                                   const std::vector<std::pair<double, double>>& centers, int n_cal, int n_check) {
  VolumeComparison vc;
  vc.r_A = r;
  vc.n_cal = n_cal;
  std::vector<double> la = ell_series(c, A, n_check);
  vc.worst_ratio.assign(static_cast<std::size_t>(n_check) + 1, 0.0);
  for (const auto& x : centers) {
    std::vector<double> lb = ell_series(c, cu_ball(c, x.first, x.second, r), n_check);
    for (std::size_t n = 0; n < lb.size(); ++n) vc.worst_ratio[n] = std::max(vc.worst_ratio[n], lb[n] / la[n]);
  }
  double m = 0;
  for (int n = 0; n <= n_cal; ++n) m = std::max(m, vc.worst_ratio[static_cast<std::size_t>(n)]);
  vc.C_A = 1.5 * m;
  vc.holds = std::all_of(vc.worst_ratio.begin(), vc.worst_ratio.end(), [&](double v) { return v <= vc.C_A; });
  return vc;
}

PeriodicSet periodic_points(int max_period) {
  PeriodicSet P;
  P.max_period = max_period;
  using M2 = std::array<long, 4>;
  M2 Ak{1, 0, 0, 1};
  std::vector<TorusPoint> all;
  for (int k = 1; k <= max_period; ++k) {
    Ak = M2{2 * Ak[0] + Ak[2], 2 * Ak[1] + Ak[3], Ak[0] + Ak[2], Ak[1] + Ak[3]};  // A * Ak
    long a = Ak[0] - 1, b = Ak[1], c = Ak[2], d = Ak[3] - 1;
    long det = a * d - b * c;
    long D = std::labs(det);
    std::vector<std::pair<long, long>> seen;
    for (long m1 = 0; m1 < D; ++m1)
      for (long m2 = 0; m2 < D; ++m2) {
        long x = ((d * m1 - b * m2) % D + D) % D;
        long y = ((-c * m1 + a * m2) % D + D) % D;
        seen.emplace_back(x, y);
      }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    double sg = det > 0 ? 1.0 : -1.0;
    for (auto [x, y] : seen) {
      double px = sg * static_cast<double>(x) / static_cast<double>(D);
      double py = sg * static_cast<double>(y) / static_cast<double>(D);
      // one Newton step on A^k p - p = 0 mod 1
      double rx = Ak[0] * px + Ak[1] * py - px, ry = Ak[2] * px + Ak[3] * py - py;
      rx -= std::round(rx);
      ry -= std::round(ry);
      px -= (d * rx - b * ry) / static_cast<double>(det);
      py -= (-c * rx + a * ry) / static_cast<double>(det);
      all.emplace_back(px, py);
    }
  }
  for (const auto& p : all) {
    bool dup = false;
    for (const auto& q : P.pts) {
      Vec2 v = torus_diff(p, q);
      if (std::abs(v[0]) < 1e-9 && std::abs(v[1]) < 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) P.pts.push_back(p);
  }
  return P;
}

bool near_compact_leaf(const CuChart& c, const PeriodicSet& P, double tube, double s_extra) {
  const LeafChart& L = c.leaf;
  double sg = L.sigma();
  double h0 = L.t0() + sg * c.c0, h1 = L.t0() + sg * (c.c1 + s_extra);
  double Hmin = std::min(h0, h1), Hmax = std::max(h0, h1);
  for (long K = seam_floor(Hmin); K <= seam_floor(Hmax); ++K) {
    double H = std::clamp(K + 0.5, Hmin, Hmax);
    double s = sg * (H - L.t0());
    MTPoint a = L.point(c.w0, s);
    double len = (c.w1 - c.w0) * std::pow(sg > 0 ? kLambda : 1.0 / kLambda, static_cast<double>(K));
    const Vec2& e = L.dir();
    int M = static_cast<int>(std::ceil(len)) + 1;
    for (const auto& q : P.pts) {
      Vec2 v = torus_diff(a.p, q);
      for (int i = -M; i <= M; ++i)
        for (int j = -M; j <= M; ++j) {
          Vec2 u = v + Vec2(i, j);
          double t = std::clamp(u.dot(e), 0.0, len);
          if ((u - t * e).norm() < tube) return true;
        }
    }
  }
  return false;
}

CuChart clean_chart(const MapDescriptor& g, double t0, double width, double c0, double c1, const PeriodicSet& P, double tube,
                    double s_extra, int start_index, int id) {
  const double a1 = 0.7548776662466927, a2 = 0.5698402909980532;
  for (int j = start_index + 1; j < start_index + 20000; ++j) {
    double x = std::fmod(0.5 + a1 * j, 1.0), y = std::fmod(0.5 + a2 * j, 1.0);
    CuChart c{LeafChart(g, MTPoint(TorusPoint(x, y), t0)), 0.0, width, c0, c1, id};
    if (!near_compact_leaf(c, P, tube, s_extra)) return c;
  }
  throw LabError(ErrorKind::CompactLeafConflict, "no chart base avoids the compact center leaves", "margulis");
}

}  // namespace ml
