#include "margulab/leafchart.hpp"

#include <cmath>

namespace ml {

BaseOrbit::BaseOrbit(const TorusPoint& p0) {
  q_.resize(2 * kRange + 1);
  q_[kRange] = p0;
  for (long k = 1; k <= kRange; ++k) {
    q_[static_cast<std::size_t>(kRange + k)] = apply_A(q_[static_cast<std::size_t>(kRange + k - 1)], 1);
    q_[static_cast<std::size_t>(kRange - k)] = apply_A(q_[static_cast<std::size_t>(kRange - k + 1)], -1);
  }
}

const TorusPoint& BaseOrbit::at(long K) const {
  if (K < -kRange || K > kRange) throw LabError(ErrorKind::OutOfChart, "chart level outside the cached base orbit");
  return q_[static_cast<std::size_t>(K + kRange)];
}

LeafChart::LeafChart(const MapDescriptor& g, const MTPoint& base) : g_(g), base_(base) {
  if (g.family != Family::TimeChange) {
    if (g.epsilon != 0)
      throw LabError(ErrorKind::NotApplicable, "leaf charts need a time change (shear with eps > 0 has tilted leaves)");
    // unperturbed shear is the time-one map of the flow
    g_ = MapDescriptor{Family::TimeChange, 0.0, Shape::Cos, g.direction};
  }
  orbit_ = std::make_shared<BaseOrbit>(base.p);
  bool fwd = g_.direction == Direction::Forward;
  sigma_ = fwd ? 1.0 : -1.0;
  mu_ = fwd ? kLambda : 1.0 / kLambda;
  e_ = fwd ? &e_u() : &e_s();
  ep_ = fwd ? &e_s() : &e_u();
  bw_ = std::pow(kLambda, sigma_ * base.t);
}

LeafChart LeafChart::with_perp(double perp) const {
  LeafChart c = *this;
  c.perp_ = perp;
  return c;
}

void LeafChart::locate(double w, double s, double& px, double& t) const {
  double H = base_.t + sigma_ * s;
  long K = seam_floor(H);
  t = H - static_cast<double>(K);
  if (column_independent()) {
    px = 0;
    return;
  }
  const TorusPoint& q = orbit_->at(K);
  double a = w * std::pow(mu_, static_cast<double>(K));
  double b = perp_ / std::pow(mu_, static_cast<double>(K));
  double x = q.x + a * (*e_)[0] + b * (*ep_)[0];
  px = x - std::floor(x);
}

MTPoint LeafChart::point(double w, double s) const {
  double H = base_.t + sigma_ * s;
  long K = seam_floor(H);
  const TorusPoint& q = orbit_->at(K);
  double a = w * std::pow(mu_, static_cast<double>(K));
  double b = perp_ / std::pow(mu_, static_cast<double>(K));
  Vec2 v = q.vec() + a * (*e_) + b * (*ep_);
  return MTPoint::raw(TorusPoint(v[0], v[1]), H - static_cast<double>(K));
}

double LeafChart::ret(double w, double s) const {
  double px, t;
  if (sigma_ > 0) {
    locate(w, s, px, t);
    return tau_pt(g_, px, t);
  }
  // r = tau(chart point at s + r)
  double lo = 1.0 - g_.epsilon, hi = 1.0 + g_.epsilon;
  double r = 1.0;
  for (int it = 0; it < 60; ++it) {
    locate(w, s + r, px, t);
    double h = r - tau_pt(g_, px, t);
    if (h == 0) break;
    double d = 1.0 + tau_dt(g_, px, t);
    double nr = r - h / d;
    if (nr < lo || nr > hi) nr = 0.5 * (r + (h > 0 ? lo : hi));
    bool done = std::abs(nr - r) < 1e-16;
    r = nr;
    if (done) break;
  }
  return r;
}

double LeafChart::ret_ds(double w, double s) const {
  double px, t;
  if (sigma_ > 0) {
    locate(w, s, px, t);
    return tau_dt(g_, px, t);
  }
  double r = ret(w, s);
  locate(w, s + r, px, t);
  double d = tau_dt(g_, px, t);
  return -d / (1.0 + d);
}

double LeafChart::back(double w, double s) const {
  double x = s - 1.0;
  for (int it = 0; it < 60; ++it) {
    double h = x + ret(w, x) - s;
    if (h == 0) break;
    double nx = x - h / (1.0 + ret_ds(w, x));
    bool done = std::abs(nx - x) < 1e-15 * (1.0 + std::abs(x));
    x = nx;
    if (done) break;
  }
  return x;
}

void LeafChart::heights(double w, double s, int n, double* out) const {
  out[0] = s;
  for (int k = 0; k < n; ++k) out[k + 1] = out[k] + ret(w, out[k]);
}

double LeafChart::height_n(double w, double s, int n) const {
  for (int k = 0; k < n; ++k) s += ret(w, s);
  return s;
}

double LeafChart::area(double w0, double w1, double s0, double s1) const {
  // lambda^s1 - lambda^s0 without cancellation
  double d = std::pow(kLambda, s0) * std::expm1((s1 - s0) * kLogLambda) / kLogLambda;
  return bw_ * (w1 - w0) * d;
}

double LeafChart::perp_length(double s) const {
  return std::abs(perp_) * std::pow(kLambda, -sigma_ * (base_.t + sigma_ * s));
}

double LeafChart::u_length(double dw, double s) const { return std::abs(dw) * bw_ * std::pow(kLambda, s); }

}  // namespace ml
