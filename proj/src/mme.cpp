#include "margulab/mme.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <memory>
#include <numeric>

#include "margulab/rng.hpp"

namespace ml {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_leaves(const MapDescriptor& a, const MapDescriptor& b) {
  if (a == b) return true;
  return a.epsilon == 0 && b.epsilon == 0 && a.direction == b.direction;
}

bool horizontal(const MapDescriptor& f) { return f.t_only(); }

double lsq_slope(const std::vector<double>& y, int k0, int k1) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int k = k0; k <= k1; ++k, ++m) {
    double x = k, v = y[static_cast<std::size_t>(k)];
    sx += x, sy += v, sxx += x * x, sxy += x * v;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

// ---------------------------------------------------------------- curve growth

CurveGrowth entropy_curve_growth(const MapDescriptor& f, const LeafCurve& seg, int n, double rtol, long budget) {
  const LeafChart& c = seg.chart;
  if (!same_leaves(c.map(), f) || c.sigma() < 0)
    throw LabError(ErrorKind::NotApplicable, "segment is not an unstable segment of this map", "mme");
  if (n < 2) throw LabError(ErrorKind::ConfigError, "curve growth needs n >= 2", "mme");
  const double a = seg.w.front(), b = seg.w.back();
  const double bw = c.base_weight();
  long used = 0;
  auto lengths = [&](long N) {
    std::vector<double> H(static_cast<std::size_t>((N + 1) * (n + 1)));
#pragma omp parallel for schedule(static)
    for (long i = 0; i <= N; ++i) {
      double w = a + (b - a) * static_cast<double>(i) / static_cast<double>(N);
      c.heights(w, seg.eval(w), n, &H[static_cast<std::size_t>(i * (n + 1))]);
    }
    used += (N + 1) * (n + 1);
    std::vector<double> out(static_cast<std::size_t>(n) + 1);
    std::vector<double> terms(static_cast<std::size_t>(N));
    const double dw = (b - a) / static_cast<double>(N);
    for (int k = 0; k <= n; ++k) {
      for (long i = 0; i < N; ++i) {
        double s0 = H[static_cast<std::size_t>(i * (n + 1) + k)], s1 = H[static_cast<std::size_t>((i + 1) * (n + 1) + k)];
        double du = bw * std::pow(kLambda, 0.5 * (s0 + s1)) * dw;
        terms[static_cast<std::size_t>(i)] = std::hypot(du, s1 - s0);
      }
      out[static_cast<std::size_t>(k)] = pairwise_sum(terms);
    }
    return out;
  };
  long N = 64;
  std::vector<double> L0 = lengths(N);
  for (;;) {
    if (used + (2 * N + 1) * (n + 1) > budget)
      throw LabError(ErrorKind::RefinementBudgetExceeded,
                     fmt::format("curve length of f^{}(segment) not resolved within {} height evaluations", n, budget), "mme");
    std::vector<double> L1 = lengths(2 * N);
    double dev = 0;
    for (int k = 0; k <= n; ++k) dev = std::max(dev, std::abs(L1[static_cast<std::size_t>(k)] / L0[static_cast<std::size_t>(k)] - 1));
    N *= 2;
    L0 = std::move(L1);
    if (dev <= rtol) break;
  }
  CurveGrowth g;
  g.nodes = static_cast<int>(N + 1);
  for (double v : L0) g.log_length.push_back(std::log(v));
  g.slope = lsq_slope(g.log_length, n / 2, n);
  return g;
}

// ---------------------------------------------------------------- quasi-products

Cover lattice_cover(const MapDescriptor& g, int m, double margin) {
  if (m < 1) throw LabError(ErrorKind::ConfigError, "cover lattice size must be positive", "mme");
  Cover cv;
  // a square of side W rotated onto (e_u, e_s) contains the axis square of side W / (|e.x| + |e.y|)
  double W = margin * (std::abs(e_u()[0]) + std::abs(e_u()[1])) / m;
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < m; ++i) {
      LeafChart c(g, MTPoint(TorusPoint((i + 0.5) / m, (j + 0.5) / m), 0.0));
      ProductChart p{c, -0.5 * W, 0.5 * W, 0.0, c.ret(0.0, 0.0), -0.5 * W, 0.5 * W};
      cv.charts.push_back(p);
    }
  return cv;
}

namespace {

// chart coordinates (w, s, v) of z in a product chart, for every lap level that contains it
template <class F>
void chart_coords(const ProductChart& pc, const MTPoint& z, F&& visit) {
  const LeafChart& L = pc.chart;
  double sg = L.sigma();
  double h0 = L.t0() + sg * pc.c0, h1 = L.t0() + sg * pc.c1;
  long m0 = static_cast<long>(std::floor(std::min(h0, h1))) - 1, m1 = static_cast<long>(std::floor(std::max(h0, h1))) + 1;
  for (long K = m0; K <= m1; ++K) {
    double H = z.t + static_cast<double>(K);
    double s = sg * (H - L.t0());
    if (s < pc.c0 || s >= pc.c1) continue;
    Vec2 d = torus_diff(L.base().p, apply_A(z.p, -K));
    double w = d.dot(L.dir()), v = d.dot(L.perp_dir());
    visit(w, s, v);
  }
}

}  // namespace

int cover_count(const Cover& c, const MTPoint& z) {
  int n = 0;
  for (const auto& pc : c.charts)
    chart_coords(pc, z, [&](double w, double, double v) {
      if (w >= pc.w0 && w < pc.w1 && v >= pc.v0 && v < pc.v1) ++n;
    });
  return n;
}

namespace {

struct QPState {
  Cover cover;
  int n_profile = 0;
  std::vector<double> chart_cdf;
  std::vector<std::vector<double>> cell_cdf;
};

MTPoint qp_local(const QPState& S, std::size_t p, Rng& g) {
  const ProductChart& pc = S.cover.charts[p];
  const auto& cdf = S.cell_cdf[p];
  double u = u01(g) * cdf.back();
  auto j = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
  j = std::min(j, cdf.size() - 1);
  double ds = (pc.c1 - pc.c0) / S.n_profile;
  double w = pc.w0 + (pc.w1 - pc.w0) * u01(g);
  double s = pc.c0 + (static_cast<double>(j) + u01(g)) * ds;
  double v = pc.v0 + (pc.v1 - pc.v0) * u01(g);
  return pc.chart.with_perp(v).point(w, s);
}

}  // namespace

std::vector<MTPoint> QuasiProductMeasure::local_draw(std::size_t chart, std::uint64_t seed, std::size_t n) const {
  QPState S;
  S.cover = cover;
  S.n_profile = n_profile;
  std::vector<double> cdf(profile[chart].size());
  std::partial_sum(profile[chart].begin(), profile[chart].end(), cdf.begin());
  S.cell_cdf.assign(cover.charts.size(), {});
  S.cell_cdf[chart] = cdf;
  std::vector<MTPoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng g = stream(seed, i);
    out[i] = qp_local(S, chart, g);
  }
  return out;
}

QuasiProductMeasure quasi_product(const MapDescriptor& f, const MargulisSystem& first, const MargulisSystem& second,
                                  const Cover& cover, int n_profile) {
  if (!horizontal(f)) throw LabError(ErrorKind::NotApplicable, "quasi-product sampler needs slice-horizontal leaves", "mme");
  if (cover.charts.empty()) throw LabError(ErrorKind::CoverGap, "empty cover", "mme");
  const LeafFunctional& L1 = first.functional;
  const LeafFunctional& L2 = second.functional;
  const MapDescriptor g1 = cover.charts[0].chart.map();
  if (!same_leaves(L1.f, g1)) throw LabError(ErrorKind::NotApplicable, "cover charts and first system ride different leaves", "mme");
  if (!same_leaves(L2.f, g1.inverse()))
    throw LabError(ErrorKind::NotApplicable, "second system must live on the transverse foliation", "mme");

  QuasiProductMeasure Q;
  Q.f = f;
  Q.tag = g1.direction == f.direction ? "cu*s" : "cs*u";
  Q.cover = cover;
  Q.n_profile = n_profile;
  const std::size_t P = cover.charts.size();
  Q.profile.assign(P, {});
  Q.chart_mass.assign(P, 0.0);
  const MapDescriptor g2 = g1.inverse();
  PeriodicSet per = periodic_points(5);
  for (std::size_t p = 0; p < P; ++p) {
    const ProductChart& pc = cover.charts[p];
    const LeafChart& L = pc.chart;
    CuChart cc{L, pc.w0, pc.w1, pc.c0, pc.c1, static_cast<int>(p)};
    if (near_compact_leaf(cc, per, 1e-2, 0.0)) ++Q.flagged_charts;
    std::vector<double> nu = cell_masses(L1, cc, 1, n_profile);
    // A^K e' = mu'^K e'
    double mup = L.sigma() > 0 ? 1.0 / kLambda : kLambda;
    std::vector<double> prof(static_cast<std::size_t>(n_profile));
    double ds = (pc.c1 - pc.c0) / n_profile;
    for (int j = 0; j < n_profile; ++j) {
      double s = pc.c0 + (j + 0.5) * ds;
      long K = seam_floor(L.t0() + L.sigma() * s);
      MTPoint y = L.point(0.5 * (pc.w0 + pc.w1), s);
      double sc = std::pow(mup, static_cast<double>(K));
      double ms = u_mass(L2, LeafChart(g2, y), pc.v0 * sc, pc.v1 * sc, 0.0);
      prof[static_cast<std::size_t>(j)] = nu[static_cast<std::size_t>(j)] * ms;
    }
    Q.chart_mass[p] = pairwise_sum(prof);
    Q.profile[p] = std::move(prof);
  }
  // the cover must reach every region of positive volume
  const double a1 = 0.8191725133961645, a2 = 0.6710436067037893, a3 = 0.5497004779019703;
  int gaps = 0;
  for (int i = 1; i <= 4096; ++i) {
    MTPoint z(TorusPoint(std::fmod(0.5 + a1 * i, 1.0), std::fmod(0.5 + a2 * i, 1.0)), std::fmod(0.5 + a3 * i, 1.0));
    if (cover_count(cover, z) == 0) ++gaps;
  }
  if (gaps > 0) throw LabError(ErrorKind::CoverGap, fmt::format("{} of 4096 probe points lie outside every product chart", gaps), "mme");

  auto S = std::make_shared<QPState>();
  S->cover = cover;
  S->n_profile = n_profile;
  S->chart_cdf.resize(P);
  std::partial_sum(Q.chart_mass.begin(), Q.chart_mass.end(), S->chart_cdf.begin());
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<double> cdf(Q.profile[p].size());
    std::partial_sum(Q.profile[p].begin(), Q.profile[p].end(), cdf.begin());
    S->cell_cdf.push_back(std::move(cdf));
  }
  Q.sampler.name = "quasi_product:" + Q.tag;
  Q.sampler.ucond = UConditional::Uniform;
  // repelling-type measures are sampled along backward orbits
  Q.sampler.orientation = Q.tag == "cu*s" ? Orientation::Backward : Orientation::Forward;
  Q.sampler.draw = [S](std::uint64_t seed, std::size_t n) {
    std::vector<MTPoint> out(n);
    const long N = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < N; ++i) {
      Rng g = stream(seed, static_cast<std::uint64_t>(i));
      for (;;) {
        double u = u01(g) * S->chart_cdf.back();
        auto p = static_cast<std::size_t>(std::upper_bound(S->chart_cdf.begin(), S->chart_cdf.end(), u) - S->chart_cdf.begin());
        p = std::min(p, S->chart_cdf.size() - 1);
        MTPoint z = qp_local(*S, p, g);
        // partition of unity: keep with probability 1 / (number of product sets containing z)
        int k = std::max(1, cover_count(S->cover, z));
        if (u01(g) * k < 1.0) {
          out[static_cast<std::size_t>(i)] = z;
          break;
        }
      }
    }
    return out;
  };
  return Q;
}

// ---------------------------------------------------------------- unstable entropy

namespace {

// number of seams crossed by one step of f from height t
long seam_step(const MapDescriptor& f, const MTPoint& x) {
  if (f.family == Family::TransversalShear) return f.direction == Direction::Forward ? 1 : -1;
  MapDescriptor fw = f;
  fw.direction = Direction::Forward;
  double H = f.direction == Direction::Forward ? x.t + tau(fw, x) : x.t - tau_inverse(fw, x);
  return seam_floor(H);
}

}  // namespace

std::pair<double, double> xi_element(const MapDescriptor& f, const MTPoint& x, int pullbacks, int eta) {
  if (!horizontal(f)) throw LabError(ErrorKind::NotApplicable, "partition needs slice-horizontal unstable leaves", "mme");
  MapDescriptor back = f.inverse();
  const Vec2& e = e_u();
  double lo = -1e300, hi = 1e300;
  MTPoint y = x;
  double scale = 1.0;  // lambda^{K_j}: x + a e_u sits at y + (a / scale) e_u
  for (int j = 0; j <= pullbacks; ++j) {
    double cx = std::floor(y.p.x * eta), cy = std::floor(y.p.y * eta);
    double alo = std::max((cx / eta - y.p.x) / e[0], (cy / eta - y.p.y) / e[1]);
    double ahi = std::min(((cx + 1) / eta - y.p.x) / e[0], ((cy + 1) / eta - y.p.y) / e[1]);
    lo = std::max(lo, alo * scale);
    hi = std::min(hi, ahi * scale);
    if (j == pullbacks) break;
    long K = -seam_step(back, y);  // f^{-1} crosses K seams downwards
    y = apply(back, y);
    scale *= std::pow(kLambda, static_cast<double>(K));
  }
  return {lo, hi};
}

EntropyEstimate unstable_entropy(const MapDescriptor& f, const MeasureSampler& mu, const MargulisSystem& system_u,
                                 const UnstableEntropyOptions& opt) {
  if (!horizontal(f)) throw LabError(ErrorKind::NotApplicable, "unstable entropy needs slice-horizontal unstable leaves", "mme");
  const LeafFunctional& L = system_u.functional;
  if (!same_leaves(L.f, f)) throw LabError(ErrorKind::NotApplicable, "system does not live on the unstable leaves of f", "mme");
  std::vector<MTPoint> xs = mu.draw(opt.seed, opt.n_samples);
  std::vector<double> vals(xs.size(), 0.0);
  if (mu.ucond == UConditional::Atomic) {
    // Dirac conditionals: every element keeps full mass
    EntropyEstimate e;
    e.n = xs.size();
    return e;
  }
  MapDescriptor back = f.inverse();
  const long N = static_cast<long>(xs.size());
  bool zero = false;
  auto one = [&](long i) {
    MTPoint y = xs[static_cast<std::size_t>(i)];
    std::vector<double> g(static_cast<std::size_t>(opt.horizon));
    for (int j = 0; j < opt.horizon; ++j) {
      if (mu.orientation == Orientation::Backward) y = apply(back, y);
      auto [a0, a1] = xi_element(f, y, opt.pullbacks, opt.eta);
      MTPoint fy = apply(f, y);
      auto [b0, b1] = xi_element(f, fy, opt.pullbacks + 1, opt.eta);
      double sc = std::pow(kLambda, -static_cast<double>(seam_step(f, y)));
      LeafChart ch(f, y);
      double m1 = u_mass(L, ch, a0, a1, 0.0);
      double m2 = u_mass(L, ch, b0 * sc, b1 * sc, 0.0);
      if (!(m1 > 1e-300) || !(m2 > 1e-300)) {
        zero = true;
        return;
      }
      g[static_cast<std::size_t>(j)] = -std::log(m2 / m1);
      if (mu.orientation == Orientation::Forward) y = fy;
    }
    vals[static_cast<std::size_t>(i)] = pairwise_sum(g) / opt.horizon;
  };
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (long i = 0; i < N; ++i) one(i);
  } else {
    for (long i = 0; i < N; ++i) one(i);
  }
  if (zero) throw LabError(ErrorKind::ZeroMassCell, "conditional mass of a partition element underflowed", "mme");
  MeanErr me = mean_stderr(vals);
  return EntropyEstimate{me.mean, me.stderr_, me.n};
}

// ---------------------------------------------------------------- twin map

namespace {

void need_time_change(const MapDescriptor& f) {
  if (f.family != Family::TimeChange || f.direction != Direction::Forward)
    throw LabError(ErrorKind::NotApplicable, "twin map needs a forward time change (parametrized center leaves)", "mme");
}

// lifted heights of x and flow(x, u) after n steps, as (integer part difference, fractional difference)
double center_gap(const MapDescriptor& f, const MTPoint& x, double u, int n) {
  std::vector<TorusPoint> q{x.p};
  auto at = [&](long K) -> const TorusPoint& {
    while (static_cast<long>(q.size()) <= K) q.push_back(apply_A(q.back(), 1));
    return q[static_cast<std::size_t>(K)];
  };
  long Kx = 0, Ky = 0;
  double tx = x.t, ty = x.t + u;
  long fl = static_cast<long>(std::floor(ty));
  Ky += fl;
  ty -= static_cast<double>(fl);
  for (int i = 0; i < n; ++i) {
    tx += tau_pt(f, at(Kx).x, tx);
    ty += tau_pt(f, at(Ky).x, ty);
    long a = static_cast<long>(std::floor(tx)), b = static_cast<long>(std::floor(ty));
    Kx += a, tx -= static_cast<double>(a);
    Ky += b, ty -= static_cast<double>(b);
  }
  return static_cast<double>(Ky - Kx) + (ty - tx);
}

}  // namespace

double center_decay_rate(const MapDescriptor& f, const MTPoint& x, double u, int n) {
  need_time_change(f);
  double d = std::abs(center_gap(f, x, u, n));
  if (d == 0) d = std::numeric_limits<double>::denorm_min();
  return std::log(d / std::abs(u)) / n;
}

MTPoint twin_map(const MapDescriptor& f, const MTPoint& x, const TwinOptions& opt) {
  need_time_change(f);
  auto inside = [&](double u) { return center_decay_rate(f, x, u, opt.n) < -opt.kappa; };
  double lo = 1e-6, hi = opt.search_len;
  if (!inside(lo)) throw LabError(ErrorKind::UnboundedWc, "center neighbours do not contract (lambda^c >= 0 here)", "mme");
  if (inside(hi)) throw LabError(ErrorKind::UnboundedWc, "contracting center set reaches search_len", "mme");
  for (int i = 0; i < opt.bisections && hi - lo > 1e-15 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  return flow(x, lo);
}

TwinSample twin_sample(const MapDescriptor& f, const MeasureSampler& mu, std::uint64_t seed, std::size_t n, const TwinOptions& opt) {
  need_time_change(f);
  TwinSample T;
  T.source = mu.draw(seed, n);
  std::vector<MTPoint> img(n);
  std::vector<char> ok(n, 0);
  const long N = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < N; ++i) {
    try {
      img[static_cast<std::size_t>(i)] = twin_map(f, T.source[static_cast<std::size_t>(i)], opt);
      ok[static_cast<std::size_t>(i)] = 1;
    } catch (const LabError&) {
    }
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (ok[i]) {
      T.image.push_back(img[i]);
      ++k;
    }
  T.defined_fraction = n ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
  return T;
}

MeasureSampler twin_sampler(const MapDescriptor& f, const MeasureSampler& mu, const TwinOptions& opt) {
  need_time_change(f);
  MeasureSampler s;
  s.name = "twin:" + mu.name;
  s.ucond = mu.ucond;
  s.orientation = Orientation::Backward;
  s.draw = [f, mu, opt](std::uint64_t seed, std::size_t n) {
    std::vector<MTPoint> out;
    for (std::uint64_t round = 0; out.size() < n; ++round) {
      if (round >= 8) throw LabError(ErrorKind::UnboundedWc, "twin map undefined on most of the sample", "mme");
      TwinSample T = twin_sample(f, mu, seed + 0x9e3779b97f4a7c15ULL * round, n, opt);
      for (const auto& y : T.image) {
        if (out.size() == n) break;
        out.push_back(y);
      }
    }
    return out;
  };
  return s;
}

// ---------------------------------------------------------------- minimality

SegmentParam segment_of(const LeafCurve& c) {
  return [c](double s) {
    double w = c.w.front() + (c.w.back() - c.w.front()) * s;
    return c.chart.point(w, c.eval(w));
  };
}

SegmentParam straight_u_segment(const MTPoint& x, double half_width) {
  return [x, half_width](double s) {
    double a = (2 * s - 1) * half_width;
    return MTPoint(TorusPoint(x.p.x + a * e_u()[0], x.p.y + a * e_u()[1]), x.t);
  };
}

double minimality_diagnostic(const MapDescriptor& f, const SegmentParam& seg, double adapted_length, int n, const BoxSpec& boxes,
                             long max_points) {
  BoxModel shape;
  shape.spec = boxes;
  double want = adapted_length * std::pow(kLambda, n) * std::max(boxes.nx, boxes.ny) * 4.0 + 1.0;
  long N = 1;
  while (N < want && 2 * N <= max_points) N *= 2;
  std::vector<char> hit(shape.size(), 0);
#pragma omp parallel
  {
    std::vector<char> mine(shape.size(), 0);
#pragma omp for schedule(static)
    for (long i = 0; i <= N; ++i) {
      MTPoint x = seg(static_cast<double>(i) / static_cast<double>(N));
      for (int k = 0; k <= n; ++k) {
        mine[static_cast<std::size_t>(shape.box_of(x))] = 1;
        if (k < n) x = apply(f, x);
      }
    }
#pragma omp critical
    for (std::size_t b = 0; b < mine.size(); ++b) hit[b] |= mine[b];
  }
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / static_cast<double>(hit.size());
}

// ---------------------------------------------------------------- candidates

MeasureSampler periodic_orbit_measure(const MapDescriptor& f, const MTPoint& x, int period) {
  std::vector<MTPoint> orbit{x};
  for (int i = 1; i < period; ++i) orbit.push_back(apply(f, orbit.back()));
  MTPoint back = apply(f, orbit.back());
  if (distance(back, x) > 1e-8)
    throw LabError(ErrorKind::NotApplicable, fmt::format("point does not close up after {} steps", period), "mme");
  return orbit_sampler(orbit, fmt::format("periodic_{}", period));
}

std::vector<double> invariant_slices(const MapDescriptor& f) {
  if (f.epsilon == 0 || f.family == Family::TransversalShear) return {0.0, 0.25, 0.5, 0.75};
  if (!f.t_only()) return {0.0};  // seam-flat shapes keep the seam slice
  std::vector<double> out;
  const int M = 1024;
  auto h = [&](double t) { return tau_pt(f, 0.0, t) - 1.0; };
  for (int i = 0; i < M; ++i) {
    double a = static_cast<double>(i) / M, b = static_cast<double>(i + 1) / M;
    double ha = h(a), hb = h(b);
    if (ha == 0) {
      out.push_back(a);
      continue;
    }
    if (ha * hb < 0) {
      for (int it = 0; it < 200; ++it) {
        double m = 0.5 * (a + b);
        if ((h(m) < 0) == (ha < 0))
          a = m;
        else
          b = m;
      }
      out.push_back(0.5 * (a + b));
    }
  }
  return out;
}

// ---------------------------------------------------------------- dichotomy

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::NonhyperbolicCase: return "NonhyperbolicCase";
    case Verdict::TwoHyperbolicMMEs: return "TwoHyperbolicMMEs";
    case Verdict::Inconclusive: break;
  }
  return "Inconclusive";
}

Verdict parse_verdict(const std::string& s) {
  if (s == "NonhyperbolicCase") return Verdict::NonhyperbolicCase;
  if (s == "TwoHyperbolicMMEs") return Verdict::TwoHyperbolicMMEs;
  if (s == "Inconclusive") return Verdict::Inconclusive;
  throw LabError(ErrorKind::ConfigError, "unknown verdict '" + s + "'");
}

Verdict classify(double lc_cu, double se_cu, double lc_cs, double se_cs, double k) {
  if (std::abs(lc_cu) <= k * se_cu && std::abs(lc_cs) <= k * se_cs) return Verdict::NonhyperbolicCase;
  if (lc_cs < -k * se_cs && k * se_cu < lc_cu) return Verdict::TwoHyperbolicMMEs;
  return Verdict::Inconclusive;
}

namespace {
CuChart phi1_chart(const MapDescriptor& f, double W) { return CuChart{LeafChart(f, MTPoint(TorusPoint(0.13, 0.77), 0.0)), 0.0, W, 0.0, 1.0, 0}; }
}  // namespace

LeafFunctional dilation_functional(const MapDescriptor& f, const DichotomyConfig& cfg) {
  const double W = cfg.chart_width;
  CuChart c1 = phi1_chart(f, W);
  // off the seam slice: for seam-flat shapes it is invariant and l_n is exactly lambda^n
  bool ci = c1.leaf.column_independent();
  MargulisOptions mo = cfg.margulis;
  if (!ci) {
    // column quadrature cost grows like lambda^n on tilted leaves
    mo.n_max = std::min(mo.n_max, 8);
    mo.window = std::min(mo.window, 4);
  }
  return margulis_iterate(lap(c1, 0.0, W, ci ? 0.0 : 0.5, ci ? 1 : 8), mo);
}

Systems build_systems(const MapDescriptor& f, const DichotomyConfig& cfg) {
  Systems S;
  const double W = cfg.chart_width;
  CuChart c1 = phi1_chart(f, W);
  LeafFunctional L = dilation_functional(f, cfg);
  PeriodicSet P = periodic_points(5);
  std::vector<CuChart> charts;
  std::vector<StableHolonomy> battery;
  for (int i = 0; i < cfg.n_charts; ++i) {
    charts.push_back(clean_chart(f, 0.0, W, 0.0, 1.0, P, 1e-2, 1.0 + f.epsilon, 100 * i, i));
    for (double d : {0.05, 0.02}) {
      CuChart t{charts.back().leaf.with_perp(d), 0.0, W, 0.0, 1.0, 100 + i};
      battery.emplace_back(charts.back(), t);
    }
  }
  S.cu = cu_conditionals(L, charts, cfg.cu_nw, cfg.cu_nc, battery);
  if (!horizontal(f)) return S;
  S.u = u_conditionals(S.cu, cfg.nu);
  // charts normalize an unperturbed shear to the time change
  const MapDescriptor h = c1.leaf.map();
  MapDescriptor g = h.inverse();
  CuChart i1{LeafChart(g, MTPoint(TorusPoint(0.21, 0.66), 0.0)), 0.0, W, 0.0, 1.0, 0};
  std::vector<CuChart> icharts;
  // t0 = 1/2 keeps the extended lap on three seam levels, as for the forward charts
  for (int i = 0; i < cfg.n_charts; ++i) icharts.push_back(clean_chart(g, 0.5, W, 0.0, 1.0, P, 1e-2, 1.0 + f.epsilon, 100 * i, i));
  S.cs = stable_system(h, lap(i1, 0.0, W, 0.0), icharts, cfg.cu_nw, cfg.cu_nc, cfg.margulis);
  S.s = u_conditionals(S.cs, cfg.nu);
  S.full = true;
  return S;
}

namespace {

using nlohmann::json;

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double unnum(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

json exp_json(const ExponentEstimate& e) {
  return json{{"value", num(e.value)}, {"stderr", num(e.stderr_)}, {"n_samples", e.n_samples}, {"horizon", e.horizon}, {"seed", e.seed}};
}
ExponentEstimate exp_from(const json& j) {
  ExponentEstimate e;
  e.value = unnum(j.at("value"));
  e.stderr_ = unnum(j.at("stderr"));
  e.n_samples = j.at("n_samples").get<int>();
  e.horizon = j.at("horizon").get<int>();
  e.seed = j.at("seed").get<std::uint64_t>();
  return e;
}

}  // namespace

std::string DichotomyReport::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["map"] = {{"family", family_name(f.family)},
              {"epsilon", f.epsilon},
              {"shape", shape_name(f.shape)},
              {"direction", direction_name(f.direction)}};
  j["seed"] = seed;
  j["dilation"] = num(dilation);
  j["entropy"] = {{"curve_growth", num(h_curve)}, {"box_ladder", num(h_box)}, {"log_dilation", num(h_margulis)}};
  j["lambda_c_cu_s"] = exp_json(lc_cu);
  j["lambda_c_cs_u"] = exp_json(lc_cs);
  j["verdict"] = verdict_name(verdict);
  j["diagnostics"] = {{"restricted", restricted},
                      {"minimality_coverage", num(minimality_coverage)},
                      {"s_invariance_residual", num(s_invariance_residual)},
                      {"u_dilation_residual", num(u_dilation_residual)},
                      {"histogram_tv", num(hist_tv)},
                      {"support_cu_s", num(support_cu)},
                      {"support_cs_u", num(support_cs)}};
  return j.dump(2);
}

DichotomyReport DichotomyReport::from_json(const std::string& s) {
  json j = json::parse(s);
  DichotomyReport r;
  r.schema_version = j.at("schema_version").get<int>();
  if (r.schema_version != 1) throw LabError(ErrorKind::ConfigError, "unsupported report schema_version");
  const json& m = j.at("map");
  r.f.family = parse_family(m.at("family").get<std::string>());
  r.f.epsilon = m.at("epsilon").get<double>();
  r.f.shape = parse_shape(m.at("shape").get<std::string>());
  r.f.direction = parse_direction(m.at("direction").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.dilation = unnum(j.at("dilation"));
  r.h_curve = unnum(j.at("entropy").at("curve_growth"));
  r.h_box = unnum(j.at("entropy").at("box_ladder"));
  r.h_margulis = unnum(j.at("entropy").at("log_dilation"));
  r.lc_cu = exp_from(j.at("lambda_c_cu_s"));
  r.lc_cs = exp_from(j.at("lambda_c_cs_u"));
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  const json& d = j.at("diagnostics");
  r.restricted = d.at("restricted").get<bool>();
  r.minimality_coverage = unnum(d.at("minimality_coverage"));
  r.s_invariance_residual = unnum(d.at("s_invariance_residual"));
  r.u_dilation_residual = unnum(d.at("u_dilation_residual"));
  r.hist_tv = unnum(d.at("histogram_tv"));
  r.support_cu = unnum(d.at("support_cu_s"));
  r.support_cs = unnum(d.at("support_cs_u"));
  return r;
}

DichotomyReport dichotomy_report(const MapDescriptor& f, const DichotomyConfig& cfg) {
  validate(f);
  DichotomyReport R;
  R.f = f;
  R.seed = cfg.seed;
  R.dilation = R.h_curve = R.h_box = R.h_margulis = kNaN;
  R.minimality_coverage = R.s_invariance_residual = R.u_dilation_residual = kNaN;
  R.hist_tv = R.support_cu = R.support_cs = kNaN;
  LyapunovOptions lo;
  lo.horizon = cfg.horizon;
  lo.n_samples = static_cast<int>(cfg.n_samples);
  lo.seed = cfg.seed;
  bool leaves = !(f.family == Family::TransversalShear && f.epsilon != 0);
  Systems S;
  if (leaves) {
    S = build_systems(f, cfg);
    R.dilation = S.cu.dilation;
    R.h_margulis = std::log(S.cu.dilation);
    R.s_invariance_residual = S.cu.s_invariance_residual;
    LeafCurve seg = u_leaf(f, MTPoint(TorusPoint(0.37, 0.58), 0.1), 0.01);
    int n = horizontal(f) ? cfg.curve_n : std::min(cfg.curve_n, 10);
    R.h_curve = entropy_curve_growth(f, seg, n).slope;
    R.minimality_coverage = minimality_diagnostic(f, segment_of(seg), 0.02, cfg.minimality_n, cfg.minimality_boxes);
  } else {
    R.minimality_coverage =
        minimality_diagnostic(f, straight_u_segment(MTPoint(TorusPoint(0.37, 0.58), 0.1), 0.01), 0.02, cfg.minimality_n, cfg.minimality_boxes);
  }
  if (cfg.box_ladder) R.h_box = box_ladder(f, cfg.ladder.empty() ? default_box_ladder(f) : cfg.ladder).extrapolated;
  if (S.full) {
    R.u_dilation_residual = S.u.u_dilation_residual;
    QuasiProductMeasure qa = quasi_product(f, S.cu, S.s, lattice_cover(f, cfg.cover_m), cfg.n_profile);
    QuasiProductMeasure qb = quasi_product(f, S.cs, S.u, lattice_cover(f.inverse(), cfg.cover_m), cfg.n_profile);
    R.lc_cu = lyapunov_center(f, qa.sampler, lo);
    R.lc_cs = lyapunov_center(f, qb.sampler, lo);
    auto ha = box_histogram(qa.sampler.draw(cfg.seed + 1, cfg.hist_samples), cfg.hist_boxes);
    auto hb = box_histogram(qb.sampler.draw(cfg.seed + 2, cfg.hist_samples), cfg.hist_boxes);
    R.hist_tv = tv_distance(ha, hb);
    R.support_cu = support_fraction(ha);
    R.support_cs = support_fraction(hb);
  } else {
    // exponents of volume along backward / forward orbits stand in for the two quasi-products
    R.restricted = true;
    MeasureSampler vb = volume_sampler(), vf = volume_sampler();
    vb.orientation = Orientation::Backward;
    R.lc_cu = lyapunov_center(f, vb, lo);
    R.lc_cs = lyapunov_center(f, vf, lo);
  }
  R.verdict = classify(R.lc_cu.value, R.lc_cu.stderr_, R.lc_cs.value, R.lc_cs.stderr_);
  return R;
}

}  // namespace ml
