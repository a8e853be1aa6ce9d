#include "margulab/region.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>

namespace ml {

ColumnRegion ColumnRegion::rect(double w0, double w1, double s0, double s1, int ncols) {
  ColumnRegion r;
  for (int i = 0; i < ncols; ++i) {
    Column c;
    c.w0 = w0 + (w1 - w0) * i / ncols;
    c.w1 = w0 + (w1 - w0) * (i + 1) / ncols;
    c.iv.push_back({s0, s1, 1.0});
    r.cols.push_back(c);
  }
  return r;
}

void column_density(const LeafChart& c, double w, const std::vector<SInterval>& iv, int n, double* out) {
  std::fill(out, out + n + 1, 0.0);
  std::vector<double> ends;
  for (const auto& i : iv) {
    ends.push_back(i.a);
    ends.push_back(i.b);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  const std::size_t m = static_cast<std::size_t>(n) + 1;
  std::vector<double> H(ends.size() * m);
  for (std::size_t e = 0; e < ends.size(); ++e) c.heights(w, ends[e], n, &H[e * m]);
  auto idx = [&](double v) { return static_cast<std::size_t>(std::lower_bound(ends.begin(), ends.end(), v) - ends.begin()); };
  const double k = c.base_weight() / kLogLambda;
  for (const auto& i : iv) {
    if (!(i.b > i.a)) continue;
    const double* ha = &H[idx(i.a) * m];
    const double* hb = &H[idx(i.b) * m];
    for (std::size_t j = 0; j < m; ++j) out[j] += i.weight * k * std::pow(kLambda, ha[j]) * std::expm1((hb[j] - ha[j]) * kLogLambda);
  }
}

namespace {

struct Quad {
  const LeafChart& c;
  const std::vector<SInterval>& iv;
  int n;
  const QuadOptions& opt;
  std::atomic<long>& used;
  bool over = false;

  std::vector<double> eval(double w) {
    std::vector<double> d(static_cast<std::size_t>(n) + 1);
    if (used.fetch_add(1) >= opt.budget) over = true;
    column_density(c, w, iv, n, d.data());
    return d;
  }

  // integral over [u0,u1] given the midpoint value
  std::vector<double> refine(double u0, double u1, const std::vector<double>& mid, int depth) {
    double h = u1 - u0;
    std::vector<double> coarse(mid.size());
    for (std::size_t j = 0; j < mid.size(); ++j) coarse[j] = h * mid[j];
    if (over) return coarse;
    double um = 0.5 * (u0 + u1);
    auto l = eval(0.5 * (u0 + um));
    auto r = eval(0.5 * (um + u1));
    std::vector<double> fine(mid.size());
    for (std::size_t j = 0; j < mid.size(); ++j) fine[j] = 0.5 * h * (l[j] + r[j]);
    double top = std::abs(fine.back()), err = std::abs(fine.back() - coarse.back());
    if (err <= opt.rtol * top || depth >= opt.max_depth || over) {
      if (depth >= opt.max_depth && err > opt.rtol * top) over = true;
      return fine;
    }
    auto a = refine(u0, um, l, depth + 1);
    auto b = refine(um, u1, r, depth + 1);
    for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
    return a;
  }
};

}  // namespace

std::vector<double> ell_series(const LeafChart& c, const ColumnRegion& r, int n, const QuadOptions& opt) {
  const long N = static_cast<long>(r.cols.size());
  const std::size_t m = static_cast<std::size_t>(n) + 1;
  std::vector<std::vector<double>> per(r.cols.size(), std::vector<double>(m, 0.0));
  std::atomic<long> used{0};
  std::atomic<bool> over{false};
  auto one = [&](long i) {
    const Column& col = r.cols[static_cast<std::size_t>(i)];
    if (!(col.w1 > col.w0) || over.load()) return;
    auto& out = per[static_cast<std::size_t>(i)];
    double wm = 0.5 * (col.w0 + col.w1);
    if (c.column_independent()) {
      column_density(c, wm, col.iv, n, out.data());
      for (auto& v : out) v *= col.w1 - col.w0;
      return;
    }
    Quad q{c, col.iv, n, opt, used};
    out = q.refine(col.w0, col.w1, q.eval(wm), 0);
    if (q.over) over = true;
  };
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < N; ++i) one(i);
  } else {
    for (long i = 0; i < N; ++i) one(i);
  }
  if (over)
    throw LabError(ErrorKind::RefinementBudgetExceeded,
                   fmt::format("w-quadrature did not resolve l_{} within {} column evaluations", n, opt.budget), "margulis");
  std::vector<double> res(m);
  std::vector<double> tmp(r.cols.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < r.cols.size(); ++i) tmp[i] = per[i][j];
    res[j] = pairwise_sum(tmp);
  }
  return res;
}

}  // namespace ml
