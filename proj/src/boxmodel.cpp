#include <algorithm>
#include <array>
#include <climits>
#include <memory>
#include <cmath>
#include <numeric>

#include "margulab/mme.hpp"
#include "margulab/rng.hpp"

namespace ml {

namespace {

using I2 = std::array<long long, 2>;

// A^K as an integer matrix {a, b, c, d}
std::array<long long, 4> cat_power(long K) {
  std::array<long long, 4> M{1, 0, 0, 1};
  std::array<long long, 4> step = K >= 0 ? std::array<long long, 4>{2, 1, 1, 1} : std::array<long long, 4>{1, -1, -1, 2};
  for (long i = 0; i < std::labs(K); ++i) {
    M = {step[0] * M[0] + step[1] * M[2], step[0] * M[1] + step[1] * M[3], step[2] * M[0] + step[3] * M[2],
         step[2] * M[1] + step[3] * M[3]};
  }
  return M;
}

bool separated(const std::array<I2, 4>& P, const std::array<I2, 4>& C, I2 axis) {
  long long pmin = LLONG_MAX, pmax = LLONG_MIN, cmin = LLONG_MAX, cmax = LLONG_MIN;
  for (const auto& v : P) {
    long long d = v[0] * axis[0] + v[1] * axis[1];
    pmin = std::min(pmin, d), pmax = std::max(pmax, d);
  }
  for (const auto& v : C) {
    long long d = v[0] * axis[0] + v[1] * axis[1];
    cmin = std::min(cmin, d), cmax = std::max(cmax, d);
  }
  return pmax <= cmin || cmax <= pmin;
}

// lifted one-step height map of a t-only map: t -> t + tau(t) (forward) or t - tau_inv(t)
double lift_step(const MapDescriptor& f, double t) {
  double m = std::floor(t);
  double r = t - m;
  if (f.family == Family::TransversalShear) return t + (f.direction == Direction::Forward ? 1.0 : -1.0);
  MapDescriptor fw = f;
  fw.direction = Direction::Forward;
  if (f.direction == Direction::Forward) return t + tau_pt(fw, 0.0, r);
  return t - tau_inverse(fw, MTPoint::raw(TorusPoint(0, 0), r));
}

double lift_n(const MapDescriptor& f, double t, int k) {
  for (int i = 0; i < k; ++i) t = lift_step(f, t);
  return t;
}

struct Piece {
  long K;
  double lo, hi;  // reduced image interval
};

// split a t-box at the integer crossings of the k-step lift
std::vector<Piece> t_pieces(const MapDescriptor& f, double a, double b, int k) {
  std::vector<double> cuts{a};
  double Ga = lift_n(f, a, k), Gb = lift_n(f, b, k);
  for (double m = std::floor(Ga) + 1; m < Gb; m += 1) {
    double lo = a, hi = b;
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      (lift_n(f, mid, k) < m ? lo : hi) = mid;
    }
    cuts.push_back(0.5 * (lo + hi));
  }
  cuts.push_back(b);
  std::vector<Piece> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] - cuts[i] < 1e-15) continue;
    double g0 = lift_n(f, cuts[i], k), g1 = lift_n(f, cuts[i + 1], k);
    long K = static_cast<long>(std::floor(lift_n(f, 0.5 * (cuts[i] + cuts[i + 1]), k)));
    out.push_back({K, g0 - static_cast<double>(K), g1 - static_cast<double>(K)});
  }
  return out;
}

int wrap(long long v, int n) {
  long long r = v % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

}  // namespace

std::vector<std::pair<int, int>> cat_stencil(long K) {
  auto M = cat_power(K);
  std::array<I2, 4> P{I2{0, 0}, I2{M[0], M[2]}, I2{M[0] + M[1], M[2] + M[3]}, I2{M[1], M[3]}};
  long long x0 = LLONG_MAX, x1 = LLONG_MIN, y0 = LLONG_MAX, y1 = LLONG_MIN;
  for (const auto& v : P) x0 = std::min(x0, v[0]), x1 = std::max(x1, v[0]), y0 = std::min(y0, v[1]), y1 = std::max(y1, v[1]);
  std::vector<I2> axes{I2{1, 0}, I2{0, 1}};
  for (int i = 0; i < 4; ++i) {
    I2 e{P[(i + 1) % 4][0] - P[i][0], P[(i + 1) % 4][1] - P[i][1]};
    axes.push_back({-e[1], e[0]});
  }
  std::vector<std::pair<int, int>> out;
  for (long long i = x0; i < x1; ++i)
    for (long long j = y0; j < y1; ++j) {
      std::array<I2, 4> C{I2{i, j}, I2{i + 1, j}, I2{i + 1, j + 1}, I2{i, j + 1}};
      bool sep = false;
      for (const auto& a : axes)
        if (separated(P, C, a)) {
          sep = true;
          break;
        }
      if (!sep) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  return out;
}

int BoxModel::box_of(const MTPoint& x) const {
  int ix = std::min(spec.nx - 1, static_cast<int>(x.p.x * spec.nx));
  int iy = std::min(spec.ny - 1, static_cast<int>(x.p.y * spec.ny));
  int it = std::min(spec.nt - 1, static_cast<int>(x.t * spec.nt));
  return index(ix, iy, it);
}

MTPoint BoxModel::point_in(int i, double a, double b, double c) const {
  int ix = i % spec.nx, iy = (i / spec.nx) % spec.ny, it = i / (spec.nx * spec.ny);
  return MTPoint(TorusPoint((ix + a) / spec.nx, (iy + b) / spec.ny), (it + c) / spec.nt);
}

BoxModel build_box_model(const MapDescriptor& f, const BoxSpec& s, Exec exec) {
  validate(f);
  if (s.nx < 1 || s.ny < 1 || s.nt < 1 || s.depth < 0 || s.samples < 1)
    throw LabError(ErrorKind::ConfigError, "box resolution must be positive", "mme");
  BoxModel m;
  m.f = f;
  m.spec = s;
  m.stencil = f.t_only() && s.nx == s.ny;
  const long N = static_cast<long>(m.size());
  std::vector<std::vector<std::uint32_t>> rows(static_cast<std::size_t>(N));

  if (m.stencil) {
    const int n = s.nx;
    // per t-box pieces, and stencils per level
    std::vector<std::vector<Piece>> pieces(static_cast<std::size_t>(s.nt));
    std::vector<long> levels;
    for (int it = 0; it < s.nt; ++it) {
      if (s.depth == 0) {
        pieces[static_cast<std::size_t>(it)] = {Piece{0, static_cast<double>(it) / s.nt, static_cast<double>(it + 1) / s.nt}};
      } else {
        pieces[static_cast<std::size_t>(it)] =
            t_pieces(f, static_cast<double>(it) / s.nt, static_cast<double>(it + 1) / s.nt, s.depth);
      }
      for (const auto& p : pieces[static_cast<std::size_t>(it)]) levels.push_back(p.K);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::vector<std::pair<int, int>>> stencils;
    std::vector<std::array<long long, 4>> mats;
    for (long K : levels) {
      stencils.push_back(cat_stencil(K));
      mats.push_back(cat_power(K));
    }
    auto level_of = [&](long K) { return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), K) - levels.begin()); };
    auto one = [&](long r) {
      int ix = static_cast<int>(r % n), iy = static_cast<int>((r / n) % n), it = static_cast<int>(r / (static_cast<long>(n) * n));
      auto& row = rows[static_cast<std::size_t>(r)];
      for (const auto& pc : pieces[static_cast<std::size_t>(it)]) {
        std::size_t L = level_of(pc.K);
        const auto& M = mats[L];
        int bx = wrap(M[0] * ix + M[1] * iy, n), by = wrap(M[2] * ix + M[3] * iy, n);
        int t0 = std::max(0, static_cast<int>(std::floor(pc.lo * s.nt + 1e-9)));
        int t1 = std::min(s.nt - 1, static_cast<int>(std::ceil(pc.hi * s.nt - 1e-9)) - 1);
        for (int jt = t0; jt <= t1; ++jt)
          for (const auto& o : stencils[L])
            row.push_back(static_cast<std::uint32_t>(m.index(wrap(bx + o.first, n), wrap(by + o.second, n), jt)));
      }
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 256)
      for (long r = 0; r < N; ++r) one(r);
    } else {
      for (long r = 0; r < N; ++r) one(r);
    }
  } else {
    // sampled (inner) cover: q lines along e_u per (e_s offset, t), q lambda^depth points on each
    const int q = s.samples;
    const int qu = q * static_cast<int>(std::ceil(std::pow(kLambda, s.depth)));
    const Vec2 eu = e_u(), es = e_s();
    const double hx = 1.0 / s.nx, hy = 1.0 / s.ny;
    double bmin = 1e300, bmax = -1e300;
    for (double cx : {0.0, hx})
      for (double cy : {0.0, hy}) {
        double b = Vec2(cx, cy).dot(es);
        bmin = std::min(bmin, b), bmax = std::max(bmax, b);
      }
    auto one = [&](long r) {
      auto& row = rows[static_cast<std::size_t>(r)];
      const MTPoint o = m.point_in(static_cast<int>(r), 0, 0, 0);
      for (int b = 0; b < q; ++b) {
        double beta = bmin + (bmax - bmin) * (b + 0.5) / q;
        // clip the line o + beta e_s + alpha e_u to the box
        double a0 = -1e300, a1 = 1e300;
        Vec2 base = beta * es;
        for (int ax = 0; ax < 2; ++ax) {
          double h = ax == 0 ? hx : hy, c = base[ax], d = eu[ax];
          double lo = (0 - c) / d, hi = (h - c) / d;
          if (lo > hi) std::swap(lo, hi);
          a0 = std::max(a0, lo), a1 = std::min(a1, hi);
        }
        if (!(a0 < a1)) continue;
        for (int c = 0; c < q; ++c)
          for (int a = 0; a < qu; ++a) {
            double al = a0 + (a1 - a0) * (a + 0.5) / qu;
            Vec2 v = base + al * eu;
            MTPoint x(TorusPoint(o.p.x + v[0], o.p.y + v[1]), o.t + (c + 0.5) / (q * static_cast<double>(s.nt)));
            row.push_back(static_cast<std::uint32_t>(m.box_of(apply_n(f, x, s.depth))));
          }
      }
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 64)
      for (long r = 0; r < N; ++r) one(r);
    } else {
      for (long r = 0; r < N; ++r) one(r);
    }
  }
  m.row_ptr.assign(static_cast<std::size_t>(N) + 1, 0);
  for (long r = 0; r < N; ++r) m.row_ptr[static_cast<std::size_t>(r) + 1] = m.row_ptr[static_cast<std::size_t>(r)] + static_cast<std::int64_t>(rows[static_cast<std::size_t>(r)].size());
  m.col.resize(static_cast<std::size_t>(m.row_ptr.back()));
  for (long r = 0; r < N; ++r) {
    std::copy(rows[static_cast<std::size_t>(r)].begin(), rows[static_cast<std::size_t>(r)].end(),
              m.col.begin() + m.row_ptr[static_cast<std::size_t>(r)]);
    std::vector<std::uint32_t>().swap(rows[static_cast<std::size_t>(r)]);
  }
  return m;
}

namespace {

std::vector<int> tarjan(const std::vector<std::int64_t>& rp, const std::vector<std::uint32_t>& col, int& ncomp) {
  const int n = static_cast<int>(rp.size()) - 1;
  std::vector<int> index(static_cast<std::size_t>(n), -1), low(static_cast<std::size_t>(n)), comp(static_cast<std::size_t>(n), -1);
  std::vector<char> on(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::vector<std::pair<int, std::int64_t>> call;
  int idx = 0;
  ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (index[static_cast<std::size_t>(s)] >= 0) continue;
    index[static_cast<std::size_t>(s)] = low[static_cast<std::size_t>(s)] = idx++;
    stack.push_back(s);
    on[static_cast<std::size_t>(s)] = 1;
    call.emplace_back(s, rp[static_cast<std::size_t>(s)]);
    while (!call.empty()) {
      int v = call.back().first;
      std::int64_t& e = call.back().second;
      if (e < rp[static_cast<std::size_t>(v) + 1]) {
        int w = static_cast<int>(col[static_cast<std::size_t>(e)]);
        ++e;
        if (index[static_cast<std::size_t>(w)] < 0) {
          index[static_cast<std::size_t>(w)] = low[static_cast<std::size_t>(w)] = idx++;
          stack.push_back(w);
          on[static_cast<std::size_t>(w)] = 1;
          call.emplace_back(w, rp[static_cast<std::size_t>(w)]);
        } else if (on[static_cast<std::size_t>(w)]) {
          low[static_cast<std::size_t>(v)] = std::min(low[static_cast<std::size_t>(v)], index[static_cast<std::size_t>(w)]);
        }
      } else {
        if (low[static_cast<std::size_t>(v)] == index[static_cast<std::size_t>(v)]) {
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on[static_cast<std::size_t>(w)] = 0;
            comp[static_cast<std::size_t>(w)] = ncomp;
          } while (w != v);
          ++ncomp;
        }
        call.pop_back();
        if (!call.empty()) {
          int u = call.back().first;
          low[static_cast<std::size_t>(u)] = std::min(low[static_cast<std::size_t>(u)], low[static_cast<std::size_t>(v)]);
        }
      }
    }
  }
  return comp;
}

struct SubMatrix {
  std::vector<int> nodes;
  std::vector<std::int64_t> rp;
  std::vector<int> col;  // local
};

SubMatrix restrict_to(const BoxModel& m, const std::vector<int>& nodes, std::vector<int>& loc, bool transpose) {
  SubMatrix S;
  S.nodes = nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) loc[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);
  std::vector<std::vector<int>> rows(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    int r = nodes[i];
    for (auto e = m.row_ptr[static_cast<std::size_t>(r)]; e < m.row_ptr[static_cast<std::size_t>(r) + 1]; ++e) {
      int j = loc[m.col[static_cast<std::size_t>(e)]];
      if (j < 0) continue;
      if (transpose)
        rows[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
      else
        rows[i].push_back(j);
    }
  }
  S.rp.assign(nodes.size() + 1, 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) S.rp[i + 1] = S.rp[i] + static_cast<std::int64_t>(rows[i].size());
  S.col.reserve(static_cast<std::size_t>(S.rp.back()));
  for (auto& r : rows) S.col.insert(S.col.end(), r.begin(), r.end());
  for (int v : nodes) loc[static_cast<std::size_t>(v)] = -1;
  return S;
}

struct PowerResult {
  double lo = 0, hi = 0;
  int it = 0;
  bool ok = false;
  std::vector<double> v;
};

// Collatz-Wielandt bracketing on M + I
PowerResult power(const SubMatrix& S, double tol, int max_iter, Exec exec) {
  const long n = static_cast<long>(S.nodes.size());
  PowerResult R;
  R.v.assign(static_cast<std::size_t>(n), 1.0);
  std::vector<double> y(static_cast<std::size_t>(n));
  for (R.it = 1; R.it <= max_iter; ++R.it) {
    auto row = [&](long i) {
      double acc = R.v[static_cast<std::size_t>(i)];
      for (auto e = S.rp[static_cast<std::size_t>(i)]; e < S.rp[static_cast<std::size_t>(i) + 1]; ++e) acc += R.v[static_cast<std::size_t>(S.col[static_cast<std::size_t>(e)])];
      y[static_cast<std::size_t>(i)] = acc;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) row(i);
    } else {
      for (long i = 0; i < n; ++i) row(i);
    }
    double lo = 1e300, hi = 0, mx = 0;
    for (long i = 0; i < n; ++i) {
      double q = y[static_cast<std::size_t>(i)] / R.v[static_cast<std::size_t>(i)];
      lo = std::min(lo, q), hi = std::max(hi, q), mx = std::max(mx, y[static_cast<std::size_t>(i)]);
    }
    R.lo = lo - 1.0, R.hi = hi - 1.0;
    for (long i = 0; i < n; ++i) R.v[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] / mx;
    if (hi - lo <= tol * hi) {
      R.ok = true;
      break;
    }
  }
  return R;
}

}  // namespace

void perron(BoxModel& m, double tol, int max_iter, Exec exec) {
  m.scc = tarjan(m.row_ptr, m.col, m.n_scc);
  const std::size_t N = m.size();
  std::vector<std::vector<int>> members(static_cast<std::size_t>(m.n_scc));
  for (std::size_t i = 0; i < N; ++i) members[static_cast<std::size_t>(m.scc[i])].push_back(static_cast<int>(i));
  std::vector<int> loc(N, -1);
  double best = -1;
  int best_c = -1;
  PowerResult best_r;
  // components in order of their smallest box
  std::vector<int> order(static_cast<std::size_t>(m.n_scc));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return members[static_cast<std::size_t>(a)][0] < members[static_cast<std::size_t>(b)][0]; });
  for (int c : order) {
    const auto& mem = members[static_cast<std::size_t>(c)];
    if (mem.size() == 1) {
      int v = mem[0];
      bool self = std::binary_search(m.col.begin() + m.row_ptr[static_cast<std::size_t>(v)], m.col.begin() + m.row_ptr[static_cast<std::size_t>(v) + 1],
                                     static_cast<std::uint32_t>(v));
      if (!self) continue;
      if (1.0 > best * (1 + 1e-9)) {
        best = 1.0;
        best_c = c;
        best_r = PowerResult{1.0, 1.0, 0, true, {1.0}};
      }
      continue;
    }
    SubMatrix S = restrict_to(m, mem, loc, false);
    PowerResult r = power(S, tol, max_iter, exec);
    if (!r.ok)
      throw LabError(ErrorKind::NotIrreducible, "Perron iteration did not settle on a recurrent component of " + std::to_string(mem.size()) + " boxes", "mme");
    double rho = 0.5 * (r.lo + r.hi);
    if (rho > best * (1 + 1e-9)) {
      best = rho;
      best_c = c;
      best_r = std::move(r);
    }
  }
  if (best_c < 0) throw LabError(ErrorKind::NotIrreducible, "transition matrix has no recurrent component", "mme");
  m.core = members[static_cast<std::size_t>(best_c)];
  m.rho = 0.5 * (best_r.lo + best_r.hi);
  m.cw_lo = best_r.lo;
  m.cw_hi = best_r.hi;
  m.iterations = best_r.it;
  m.v = best_r.v;
  if (m.core.size() == 1) {
    m.u = {1.0};
    return;
  }
  SubMatrix T = restrict_to(m, m.core, loc, true);
  PowerResult l = power(T, tol, max_iter, exec);
  if (!l.ok) throw LabError(ErrorKind::NotIrreducible, "left Perron iteration did not settle", "mme");
  double s = pairwise_sum(l.v);
  for (auto& x : l.v) x /= s;
  m.u = std::move(l.v);
}

double entropy_box(const MapDescriptor& f, const BoxSpec& s) {
  if (s.depth == 0) return 0.0;
  BoxModel m = build_box_model(f, s);
  perron(m);
  return std::log(m.rho) / s.depth;
}

std::vector<BoxSpec> default_box_ladder(const MapDescriptor& f) {
  std::vector<BoxSpec> r{BoxSpec{32, 32, 16, 1, 4}, BoxSpec{32, 32, 16, 2, 4}, BoxSpec{32, 32, 16, 3, 4}};
  if (f.t_only()) r.push_back(BoxSpec{64, 64, 32, 4, 4});
  return r;
}

BoxLadder box_ladder(const MapDescriptor& f, const std::vector<BoxSpec>& rungs) {
  BoxLadder L;
  L.rungs = rungs;
  for (const auto& r : rungs) {
    BoxModel m = build_box_model(f, r);
    perron(m);
    L.log_rho.push_back(std::log(m.rho));
    L.per_step.push_back(r.depth > 0 ? L.log_rho.back() / r.depth : 0.0);
  }
  for (std::size_t i = 1; i < rungs.size(); ++i)
    if (rungs[i].depth == rungs[i - 1].depth + 1) L.diffs.push_back(L.log_rho[i] - L.log_rho[i - 1]);
  const auto& d = L.diffs;
  if (d.size() >= 3) {
    double a = d[d.size() - 3], b = d[d.size() - 2], c = d.back();
    double den = c - 2 * b + a;
    L.extrapolated = std::abs(den) > 1e-14 ? c - (c - b) * (c - b) / den : c;
  } else if (!d.empty()) {
    L.extrapolated = d.back();
  } else if (!L.per_step.empty()) {
    L.extrapolated = L.per_step.back();
  }
  return L;
}

double ParryChain::entropy() const {
  std::vector<double> terms(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    double h = 0;
    for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
      double q = P[static_cast<std::size_t>(e)];
      if (q > 0) h -= q * std::log(q);
    }
    terms[i] = p[i] * h;
  }
  return pairwise_sum(terms);
}

std::vector<double> ParryChain::push(const std::vector<double>& q) const {
  std::vector<double> r(q.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i)
    for (auto e = row_ptr[i]; e < row_ptr[i + 1]; ++e) r[static_cast<std::size_t>(col[static_cast<std::size_t>(e)])] += q[i] * P[static_cast<std::size_t>(e)];
  return r;
}

ParryChain parry_chain(const BoxModel& m) {
  if (m.core.empty()) throw LabError(ErrorKind::NotIrreducible, "Perron data missing", "mme");
  ParryChain c;
  c.boxes = m.core;
  std::vector<int> loc(m.size(), -1);
  for (std::size_t i = 0; i < m.core.size(); ++i) loc[static_cast<std::size_t>(m.core[i])] = static_cast<int>(i);
  c.row_ptr.push_back(0);
  for (std::size_t i = 0; i < m.core.size(); ++i) {
    int r = m.core[i];
    for (auto e = m.row_ptr[static_cast<std::size_t>(r)]; e < m.row_ptr[static_cast<std::size_t>(r) + 1]; ++e) {
      int j = loc[m.col[static_cast<std::size_t>(e)]];
      if (j < 0) continue;
      c.col.push_back(j);
      c.P.push_back(m.v[static_cast<std::size_t>(j)] / (m.rho * m.v[i]));
    }
    c.row_ptr.push_back(static_cast<std::int64_t>(c.col.size()));
  }
  c.p.resize(m.core.size());
  for (std::size_t i = 0; i < m.core.size(); ++i) c.p[i] = m.u[i] * m.v[i];
  double s = pairwise_sum(c.p);
  for (auto& x : c.p) x /= s;
  return c;
}

MeasureSampler parry_sampler(const BoxModel& m, int cesaro) {
  ParryChain c = parry_chain(m);
  auto cdf = std::make_shared<std::vector<double>>(c.p.size());
  std::partial_sum(c.p.begin(), c.p.end(), cdf->begin());
  auto boxes = std::make_shared<std::vector<int>>(c.boxes);
  BoxModel shape;
  shape.spec = m.spec;
  MapDescriptor f = m.f;
  MeasureSampler s;
  s.name = cesaro > 0 ? "parry_cesaro" : "parry";
  s.draw = [cdf, boxes, shape, f, cesaro](std::uint64_t seed, std::size_t n) {
    std::vector<MTPoint> out(n);
    const long N = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < N; ++i) {
      Rng g = stream(seed, static_cast<std::uint64_t>(i));
      double u = u01(g) * cdf->back();
      auto k = static_cast<std::size_t>(std::upper_bound(cdf->begin(), cdf->end(), u) - cdf->begin());
      k = std::min(k, cdf->size() - 1);
      double a = u01(g), b = u01(g), t = u01(g);
      MTPoint x = shape.point_in((*boxes)[k], a, b, t);
      if (cesaro > 0) x = apply_n(f, x, static_cast<int>(u01(g) * cesaro));
      out[static_cast<std::size_t>(i)] = x;
    }
    return out;
  };
  return s;
}

std::vector<double> box_histogram(const std::vector<MTPoint>& xs, const BoxSpec& s) {
  BoxModel shape;
  shape.spec = s;
  std::vector<double> h(shape.size(), 0.0);
  for (const auto& x : xs) h[static_cast<std::size_t>(shape.box_of(x))] += 1.0;
  for (auto& v : h) v /= static_cast<double>(xs.size());
  return h;
}

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw LabError(ErrorKind::ConfigError, "histograms on different box grids", "mme");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = std::abs(a[i] - b[i]);
  return 0.5 * pairwise_sum(d);
}

double support_fraction(const std::vector<double>& h) {
  return static_cast<double>(std::count_if(h.begin(), h.end(), [](double v) { return v > 0; })) / static_cast<double>(h.size());
}

}  // namespace ml
