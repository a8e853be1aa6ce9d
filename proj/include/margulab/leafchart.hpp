#pragma once
// Chart (w, s) on the cu-leaf of g through a base point: the point
// flow(base + w e, sigma s), e the expanding eigendirection of g
// (e_u for Forward, e_s for Inverse), sigma = +1 / -1.
// For a time change every such leaf is g-invariant and g acts as
// (w, s) -> (w, s + r(w, s)).
#include <memory>
#include <vector>

#include "margulab/model.hpp"

namespace ml {

// A^K p0 for K in [-kRange, kRange], shared by charts that ride the same orbit
class BaseOrbit {
 public:
  static constexpr long kRange = 320;
  explicit BaseOrbit(const TorusPoint& p0);
  const TorusPoint& at(long K) const;
  const TorusPoint& p0() const { return at(0); }

 private:
  std::vector<TorusPoint> q_;
};

class LeafChart {
 public:
  LeafChart() : LeafChart(MapDescriptor{}, MTPoint()) {}
  LeafChart(const MapDescriptor& g, const MTPoint& base);
  // same orbit, shifted by `perp` along the other eigendirection (a stable slide for g)
  LeafChart with_perp(double perp) const;

  const MapDescriptor& map() const { return g_; }
  const MTPoint& base() const { return base_; }
  double t0() const { return base_.t; }
  double sigma() const { return sigma_; }
  double perp() const { return perp_; }
  const Vec2& dir() const { return *e_; }
  const Vec2& perp_dir() const { return *ep_; }
  // return time does not depend on w (and not on perp)
  bool column_independent() const { return g_.t_only(); }

  MTPoint point(double w, double s) const;
  // x-coordinate and reduced t at chart (w, s)
  void locate(double w, double s, double& px, double& t) const;
  double ret(double w, double s) const;   // r(w,s): g(point) sits at s + r
  double ret_ds(double w, double s) const;
  // s' with s' + r(w, s') = s
  double back(double w, double s) const;
  // heights S_0 = s, S_{k+1} = S_k + r(w, S_k), k = 0..n
  void heights(double w, double s, int n, double* out) const;
  double height_n(double w, double s, int n) const;

  // area element base_weight * lambda^s dw ds
  double base_weight() const { return bw_; }
  double area(double w0, double w1, double s0, double s1) const;
  // adapted length of the perp offset at chart height s
  double perp_length(double s) const;
  // adapted length of a w-step at height s
  double u_length(double dw, double s) const;

 private:
  MapDescriptor g_;
  MTPoint base_;
  std::shared_ptr<const BaseOrbit> orbit_;
  double perp_ = 0;
  double sigma_ = 1;
  double mu_ = kLambda;  // A e = mu e
  double bw_ = 1;
  const Vec2* e_;
  const Vec2* ep_;
};

}  // namespace ml
