#include "margulab/splitting.hpp"

#include <fmt/format.h>

#include <cmath>

namespace ml {

namespace {

Eigen::Matrix3d S(double t) {
  double l = std::pow(kLambda, t);
  return Eigen::Vector3d(1.0 / l, l, 1.0).asDiagonal();
}

Eigen::Matrix3d Sinv(double t) {
  double l = std::pow(kLambda, t);
  return Eigen::Vector3d(l, 1.0 / l, 1.0).asDiagonal();
}

Eigen::Vector3d to_raw(double t, const Eigen::Vector3d& o) { return Sinv(t) * o; }

Eigen::Matrix<double, 3, 2> orthonormalize(const Eigen::Matrix<double, 3, 2>& Q) {
  Eigen::Matrix<double, 3, 2> R;
  R.col(0) = Q.col(0).normalized();
  Eigen::Vector3d b = Q.col(1) - Q.col(1).dot(R.col(0)) * R.col(0);
  R.col(1) = b.normalized();
  return R;
}

const Eigen::Vector3d kSeed1(0.3, 0.5, 0.8);
const Eigen::Vector3d kSeed2(-0.6, 0.2, 0.7);

struct Orbit {
  std::vector<MTPoint> pts;  // index 0 <-> time -n
  int n;
  const MTPoint& at(int k) const { return pts[static_cast<std::size_t>(k + n)]; }
};

Orbit make_orbit(const MapDescriptor& f, const MTPoint& x, int n) {
  Orbit o;
  o.n = n;
  o.pts.resize(static_cast<std::size_t>(2 * n + 2));
  o.pts[static_cast<std::size_t>(n)] = x;
  MapDescriptor g = f.inverse();
  for (int k = 1; k <= n; ++k) o.pts[static_cast<std::size_t>(n - k)] = apply(g, o.pts[static_cast<std::size_t>(n - k + 1)]);
  for (int k = 1; k <= n + 1; ++k) o.pts[static_cast<std::size_t>(n + k)] = apply(f, o.pts[static_cast<std::size_t>(n + k - 1)]);
  return o;
}

struct Dirs {
  Eigen::Vector3d u, s, c;  // orthonormal coordinates
};

Dirs directions_at(const MapDescriptor& f, const Orbit& o, const std::vector<Mat3>& D, int at, int n) {
  // D[k + o.n] is the ortho differential at o.at(k)
  auto Dk = [&](int k) -> const Mat3& { return D[static_cast<std::size_t>(k + o.n)]; };
  (void)f;
  Eigen::Vector3d u = kSeed1.normalized();
  Eigen::Matrix<double, 3, 2> cu;
  cu.col(0) = kSeed1;
  cu.col(1) = kSeed2;
  cu = orthonormalize(cu);
  for (int k = at - n; k < at; ++k) {
    u = (Dk(k) * u).normalized();
    cu = orthonormalize(Dk(k) * cu);
  }
  Eigen::Vector3d s = kSeed2.normalized();
  Eigen::Matrix<double, 3, 2> cs;
  cs.col(0) = kSeed2;
  cs.col(1) = kSeed1;
  cs = orthonormalize(cs);
  for (int k = at + n - 1; k >= at; --k) {
    Mat3 Di = Dk(k).inverse();
    s = (Di * s).normalized();
    cs = orthonormalize(Di * cs);
  }
  Eigen::Vector3d ncu = cu.col(0).cross(cu.col(1));
  Eigen::Vector3d ncs = cs.col(0).cross(cs.col(1));
  Eigen::Vector3d c = ncu.cross(ncs).normalized();
  if (u[1] < 0) u = -u;
  if (s[0] < 0) s = -s;
  if (c[2] < 0) c = -c;
  return {u, s, c};
}

double wedge(const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return a.normalized().cross(b.normalized()).norm(); }

}  // namespace

Mat3 ortho_differential(const MapDescriptor& f, const MTPoint& x) {
  MTPoint y = apply(f, x);
  return S(y.t) * differential(f, x) * Sinv(x.t);
}

SplittingFrame compute_splitting(const MapDescriptor& f, const MTPoint& x, const SplittingOptions& opt) {
  int n = opt.n;
  if (n < 1) throw LabError(ErrorKind::NoConvergence, "compute_splitting: n must be >= 1", "splitting");
  Orbit o = make_orbit(f, x, n);
  std::vector<Mat3> D(o.pts.size() - 1);
  for (int k = -n; k <= n; ++k) {
    const MTPoint& a = o.at(k);
    const MTPoint& b = o.at(k + 1);
    D[static_cast<std::size_t>(k + n)] = S(b.t) * differential(f, a) * Sinv(a.t);
  }
  // frame at x uses orbit indices [-n, n]; frame at f(x) uses [-n+1, n+1]
  Dirs d0 = directions_at(f, o, D, 0, n);
  Dirs d1 = directions_at(f, o, D, 1, n);
  const Mat3& D0 = D[static_cast<std::size_t>(n)];
  double res = std::max({wedge(D0 * d0.u, d1.u), wedge(D0 * d0.s, d1.s), wedge(D0 * d0.c, d1.c)});

  SplittingFrame fr;
  fr.base = x;
  fr.residual = res;
  fr.e_u = AdaptedVector::of(to_raw(x.t, d0.u));
  fr.e_s = AdaptedVector::of(to_raw(x.t, d0.s));
  fr.e_c = AdaptedVector::of(to_raw(x.t, d0.c));
  auto ang = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return std::acos(std::min(1.0, std::abs(a.dot(b)))); };
  fr.min_angle = std::min({ang(d0.u, d0.s), ang(d0.u, d0.c), ang(d0.s, d0.c)});
  if (!(res <= opt.tol))
    throw LabError(ErrorKind::NoConvergence, fmt::format("invariance residual {:.3e} > tol {:.1e} after n={}", res, opt.tol, n),
                   "splitting");
  return fr;
}

std::string exponent_kind_name(ExponentKind k) {
  switch (k) {
    case ExponentKind::Stable: return "stable";
    case ExponentKind::Center: return "center";
    case ExponentKind::Unstable: return "unstable";
  }
  return "?";
}

double log_growth(const MapDescriptor& f, const MTPoint& x, ExponentKind k) {
  Mat3 D = differential(f, x);
  bool fwd = f.direction == Direction::Forward;
  Eigen::Vector3d v;
  if (k == ExponentKind::Center) {
    if (f.family == Family::TimeChange) return std::log(std::abs(D(2, 2)));
    v = Eigen::Vector3d(0, -f.epsilon * bump_d(x.t) / (kLambda - 1.0), 1.0);
  } else if (f.family == Family::TransversalShear || f.t_only()) {
    bool along_u = (k == ExponentKind::Unstable) == fwd;
    v = along_u ? Eigen::Vector3d(0, 1, 0) : Eigen::Vector3d(1, 0, 0);
  } else {
    SplittingFrame fr = compute_splitting(f, x);
    v = (k == ExponentKind::Unstable ? fr.e_u : fr.e_s).vec();
  }
  MTPoint y = apply(f, x);
  return std::log(metric_norm(y.t, D * v) / metric_norm(x.t, v));
}

namespace {

template <class Obs>
ExponentEstimate birkhoff(const MapDescriptor& f, const MeasureSampler& mu, const LyapunovOptions& opt, ExponentKind kind,
                          Obs obs) {
  std::vector<MTPoint> xs = mu.draw(opt.seed, static_cast<std::size_t>(opt.n_samples));
  Orientation ori = opt.use_sampler_orientation ? mu.orientation : opt.orientation;
  MapDescriptor back = f.inverse();
  std::vector<double> vals(xs.size());
  const long N = static_cast<long>(xs.size());
  auto one = [&](long i) {
    MTPoint y = xs[static_cast<std::size_t>(i)];
    std::vector<double> terms(static_cast<std::size_t>(opt.horizon));
    for (int k = 0; k < opt.horizon; ++k) {
      if (ori == Orientation::Backward) y = apply(back, y);
      terms[static_cast<std::size_t>(k)] = obs(y);
      if (ori == Orientation::Forward) y = apply(f, y);
    }
    vals[static_cast<std::size_t>(i)] = pairwise_sum(terms) / opt.horizon;
  };
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < N; ++i) one(i);
  } else {
    for (long i = 0; i < N; ++i) one(i);
  }
  MeanErr me = mean_stderr(vals);
  ExponentEstimate e;
  e.value = me.mean;
  e.stderr_ = me.stderr_;
  e.n_samples = opt.n_samples;
  e.horizon = opt.horizon;
  e.seed = opt.seed;
  e.kind = kind;
  return e;
}

}  // namespace

ExponentEstimate lyapunov(const MapDescriptor& f, const MeasureSampler& mu, ExponentKind k, const LyapunovOptions& opt) {
  return birkhoff(f, mu, opt, k, [&](const MTPoint& y) { return log_growth(f, y, k); });
}

ExponentEstimate log_det_average(const MapDescriptor& f, const MeasureSampler& mu, const LyapunovOptions& opt) {
  return birkhoff(f, mu, opt, ExponentKind::Center, [&](const MTPoint& y) {
    return std::log(std::abs(ortho_differential(f, y).determinant()));
  });
}

std::string exponent_csv_header() { return "family,epsilon,exponent_kind,value,stderr,horizon,n_samples,seed"; }

std::string exponent_csv_row(const MapDescriptor& f, const ExponentEstimate& e) {
  return fmt::format("{},{:.17g},{},{:.17g},{:.17g},{},{},{}", family_name(f.family), f.epsilon, exponent_kind_name(e.kind),
                     e.value, e.stderr_, e.horizon, e.n_samples, e.seed);
}

}  // namespace ml
