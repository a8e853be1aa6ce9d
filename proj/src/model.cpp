#include "margulab/model.hpp"

#include <cmath>

namespace ml {

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::OutOfChart: return "OutOfChart";
    case ErrorKind::NoIntersection: return "NoIntersection";
    case ErrorKind::DegenerateCell: return "DegenerateCell";
    case ErrorKind::RefinementBudgetExceeded: return "RefinementBudgetExceeded";
    case ErrorKind::CompactLeafConflict: return "CompactLeafConflict";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::CoverGap: return "CoverGap";
    case ErrorKind::ZeroMassCell: return "ZeroMassCell";
    case ErrorKind::UnboundedWc: return "UnboundedWc";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

const Vec2& e_u() {
  static const Vec2 v = Vec2(1.0, kLambda - 2.0).normalized();
  return v;
}
const Vec2& e_s() {
  static const Vec2 v = Vec2(-(kLambda - 2.0), 1.0).normalized();
  return v;
}

static inline double frac1(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

TorusPoint::TorusPoint(double x_, double y_) : x(frac1(x_)), y(frac1(y_)) {}

TorusPoint apply_A(const TorusPoint& p, long k) {
  double x = p.x, y = p.y;
  for (; k > 0; --k) {
    double nx = 2 * x + y, ny = x + y;
    x = frac1(nx);
    y = frac1(ny);
  }
  for (; k < 0; ++k) {
    double nx = x - y, ny = -x + 2 * y;
    x = frac1(nx);
    y = frac1(ny);
  }
  TorusPoint r;
  r.x = x;
  r.y = y;
  return r;
}

Vec2 torus_diff(const TorusPoint& a, const TorusPoint& b) {
  Vec2 d(b.x - a.x, b.y - a.y);
  d[0] -= std::round(d[0]);
  d[1] -= std::round(d[1]);
  return d;
}

long seam_floor(double t) {
  double f = std::floor(t);
  if (t - f > 1.0 - kSeamTol) f += 1.0;
  return static_cast<long>(f);
}

MTPoint::MTPoint(const TorusPoint& p_, double t_) {
  long k = seam_floor(t_);
  double r = t_ - static_cast<double>(k);
  t = r < 0 ? 0.0 : r;
  p = k == 0 ? p_ : apply_A(p_, k);
}

double metric_norm(double t, const Eigen::Vector3d& v) {
  double ls = std::pow(kLambda, t);
  double a = v[0] / ls, b = v[1] * ls;
  return std::sqrt(a * a + b * b + v[2] * v[2]);
}

double metric_norm(const MTPoint& x, const AdaptedVector& v) { return metric_norm(x.t, v.vec()); }

Eigen::Vector3d ortho(double t, const Eigen::Vector3d& v) {
  double ls = std::pow(kLambda, t);
  return {v[0] / ls, v[1] * ls, v[2]};
}

MTPoint flow(const MTPoint& x, double s) { return MTPoint(x.p, x.t + s); }

Eigen::Vector3d displacement(const MTPoint& from, const MTPoint& to) {
  double d = to.t - from.t;
  d -= std::round(d);
  MTPoint y = flow(to, -d);
  Vec2 dp = torus_diff(from.p, y.p);
  // y may land on the other side of the seam from `from`
  if (std::abs(y.t - from.t) > 0.5) {
    MTPoint z = y.t > from.t ? MTPoint::raw(apply_A(y.p, 1), y.t - 1.0) : MTPoint::raw(apply_A(y.p, -1), y.t + 1.0);
    dp = torus_diff(from.p, z.p);
  }
  return {dp.dot(e_s()), dp.dot(e_u()), d};
}

double distance(const MTPoint& a, const MTPoint& b) { return metric_norm(a.t, displacement(a, b)); }

MTPoint offset(const MTPoint& x, const Eigen::Vector3d& raw) {
  Vec2 q = x.p.vec() + raw[0] * e_s() + raw[1] * e_u();
  return MTPoint(TorusPoint(q[0], q[1]), x.t + raw[2]);
}

std::string family_name(Family f) { return f == Family::TimeChange ? "TimeChange" : "TransversalShear"; }
std::string shape_name(Shape s) {
  switch (s) {
    case Shape::Cos: return "cos";
    case Shape::BumpX: return "bump_x";
    case Shape::Bump: return "bump";
  }
  return "?";
}
std::string direction_name(Direction d) { return d == Direction::Forward ? "Forward" : "Inverse"; }

Family parse_family(const std::string& s) {
  if (s == "TimeChange") return Family::TimeChange;
  if (s == "TransversalShear") return Family::TransversalShear;
  throw LabError(ErrorKind::ConfigError, "family: unknown value '" + s + "'");
}
Shape parse_shape(const std::string& s) {
  if (s == "cos") return Shape::Cos;
  if (s == "bump_x") return Shape::BumpX;
  if (s == "bump") return Shape::Bump;
  throw LabError(ErrorKind::ConfigError, "shape: unknown value '" + s + "'");
}
Direction parse_direction(const std::string& s) {
  if (s == "Forward") return Direction::Forward;
  if (s == "Inverse") return Direction::Inverse;
  throw LabError(ErrorKind::ConfigError, "direction: unknown value '" + s + "'");
}

MapDescriptor MapDescriptor::inverse() const {
  MapDescriptor g = *this;
  g.direction = direction == Direction::Forward ? Direction::Inverse : Direction::Forward;
  return g;
}

bool MapDescriptor::t_only() const {
  if (epsilon == 0) return true;
  return family == Family::TimeChange && shape == Shape::Cos;
}

double bump(double t) {
  if (t <= 0 || t >= 1) return 0;
  double q = t * (1 - t);
  return std::exp(4.0 - 1.0 / q);
}

double bump_d(double t) {
  if (t <= 0 || t >= 1) return 0;
  double q = t * (1 - t);
  return bump(t) * (1 - 2 * t) / (q * q);
}

double tau_pt(const MapDescriptor& f, double px, double t) {
  switch (f.shape) {
    case Shape::Cos: return 1.0 + f.epsilon * std::cos(kTwoPi * t);
    case Shape::BumpX: return 1.0 + f.epsilon * bump(t) * std::sin(kTwoPi * px);
    case Shape::Bump: break;
  }
  throw LabError(ErrorKind::NotApplicable, "tau is defined for the TimeChange family only");
}

double tau_dt(const MapDescriptor& f, double px, double t) {
  switch (f.shape) {
    case Shape::Cos: return -kTwoPi * f.epsilon * std::sin(kTwoPi * t);
    case Shape::BumpX: return f.epsilon * bump_d(t) * std::sin(kTwoPi * px);
    case Shape::Bump: break;
  }
  throw LabError(ErrorKind::NotApplicable, "tau is defined for the TimeChange family only");
}

double tau(const MapDescriptor& f, const MTPoint& x) {
  if (f.family != Family::TimeChange)
    throw LabError(ErrorKind::NotApplicable, "tau is defined for the TimeChange family only");
  return tau_pt(f, x.p.x, x.t);
}

Eigen::Vector3d tau_grad(const MapDescriptor& f, const MTPoint& x) {
  if (f.family != Family::TimeChange)
    throw LabError(ErrorKind::NotApplicable, "tau is defined for the TimeChange family only");
  Eigen::Vector3d g(0, 0, tau_dt(f, x.p.x, x.t));
  if (f.shape == Shape::BumpX) {
    double dx = f.epsilon * bump(x.t) * kTwoPi * std::cos(kTwoPi * x.p.x);
    g[0] = dx * e_s()[0];
    g[1] = dx * e_u()[0];
  }
  return g;
}

void validate(const MapDescriptor& f) {
  if (!std::isfinite(f.epsilon) || f.epsilon < 0)
    throw LabError(ErrorKind::InvalidDescriptor, "epsilon: must be finite and >= 0");
  if (f.family == Family::TimeChange && f.shape == Shape::Bump)
    throw LabError(ErrorKind::InvalidDescriptor, "shape: 'bump' belongs to TransversalShear");
  if (f.family == Family::TransversalShear && f.shape != Shape::Bump)
    throw LabError(ErrorKind::InvalidDescriptor, "shape: TransversalShear requires 'bump'");
  if (f.family != Family::TimeChange) return;
  double tmin = 1e300, dmin = 1e300;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 512; ++j) {
      double px = (i + 0.5) / 64, t = j / 512.0;
      tmin = std::min(tmin, tau_pt(f, px, t));
      dmin = std::min(dmin, 1.0 + tau_dt(f, px, t));
    }
  if (tmin <= 0) throw LabError(ErrorKind::InvalidDescriptor, "epsilon: tau minimum " + std::to_string(tmin) + " <= 0");
  if (dmin <= 0)
    throw LabError(ErrorKind::InvalidDescriptor,
                   "epsilon: 1 + dtau/dt minimum " + std::to_string(dmin) + " <= 0 (map not invertible along the flow)");
}

static MTPoint forward(const MapDescriptor& f, const MTPoint& x) {
  if (f.family == Family::TimeChange) return flow(x, tau_pt(f, x.p.x, x.t));
  TorusPoint q = apply_A(x.p, 1);
  double d = f.epsilon * bump(x.t);
  return MTPoint::raw(TorusPoint(q.x + d * e_u()[0], q.y + d * e_u()[1]), x.t);
}

double tau_inverse(const MapDescriptor& f, const MTPoint& x) {
  if (f.family != Family::TimeChange)
    throw LabError(ErrorKind::NotApplicable, "tau is defined for the TimeChange family only");
  double lo = 1.0 - f.epsilon, hi = 1.0 + f.epsilon;
  double s = 1.0;
  for (int it = 0; it < 60; ++it) {
    MTPoint y = flow(x, -s);
    double r = s - tau_pt(f, y.p.x, y.t);
    if (r == 0) break;
    double d = 1.0 + tau_dt(f, y.p.x, y.t);
    double ns = s - r / d;
    if (ns < lo || ns > hi) ns = 0.5 * (s + (r > 0 ? lo : hi));
    if (std::abs(ns - s) < 1e-16) {
      s = ns;
      break;
    }
    s = ns;
  }
  return s;
}

static MTPoint backward(const MapDescriptor& f, const MTPoint& x) {
  if (f.family == Family::TimeChange) return flow(x, -tau_inverse(f, x));
  double d = f.epsilon * bump(x.t);
  TorusPoint q(x.p.x - d * e_u()[0], x.p.y - d * e_u()[1]);
  return MTPoint::raw(apply_A(q, -1), x.t);
}

MTPoint apply(const MapDescriptor& f, const MTPoint& x) {
  return f.direction == Direction::Forward ? forward(f, x) : backward(f, x);
}

MTPoint apply_n(const MapDescriptor& f, const MTPoint& x, int n) {
  MTPoint y = x;
  for (int i = 0; i < n; ++i) y = apply(f, y);
  return y;
}

static Mat3 forward_diff(const MapDescriptor& f, const MTPoint& x) {
  Mat3 D = Mat3::Zero();
  if (f.family == Family::TimeChange) {
    double T = x.t + tau_pt(f, x.p.x, x.t);
    long K = seam_floor(T);
    D(0, 0) = std::pow(kLambda, -static_cast<double>(K));
    D(1, 1) = std::pow(kLambda, static_cast<double>(K));
    D(2, 2) = 1.0;
    D.row(2) += tau_grad(f, x).transpose();
  } else {
    D(0, 0) = 1.0 / kLambda;
    D(1, 1) = kLambda;
    D(1, 2) = f.epsilon * bump_d(x.t);
    D(2, 2) = 1.0;
  }
  return D;
}

Mat3 differential(const MapDescriptor& f, const MTPoint& x) {
  if (f.direction == Direction::Forward) return forward_diff(f, x);
  MTPoint y = backward(f, x);
  return forward_diff(f, y).inverse();
}

}  // namespace ml
