#pragma once
// Leaves, holonomies and leaf volumes of the invariant foliations.
#include <string>
#include <utility>
#include <vector>

#include "margulab/leafchart.hpp"
#include "margulab/region.hpp"

namespace ml {

// rectangle [w0,w1] x [c0,c1] of a leaf chart
struct CuChart {
  LeafChart leaf;
  double w0 = 0, w1 = 0, c0 = 0, c1 = 0;
  int id = 0;
  bool contains(double w, double c, double slack = 1e-12) const {
    return w >= w0 - slack && w <= w1 + slack && c >= c0 - slack && c <= c1 + slack;
  }
};

// graph s = gamma(w) over a w-grid of a chart through x = chart(0, 0)
struct LeafCurve {
  LeafChart chart;
  std::vector<double> w, s;
  double residual = 0;
  std::vector<double> residual_history;
  double eval(double w) const;  // linear interpolation
  std::vector<MTPoint> points() const;
};

// unstable leaf of f through x, adapted half-width `half_width`, by backward pull
// and forward graph transform; throws NotApplicable (tilted leaves) and NoConvergence
LeafCurve u_leaf(const MapDescriptor& f, const MTPoint& x, double half_width, int iters = 40, double tol = 1e-10,
                 int nodes = 65, double arc_step = 1e-3);

// one graph-transform step: g is a graph over adapted u-arclength r at f^{-1}(x),
// the result is the image graph at x over the same r-grid
std::vector<double> graph_transform_step(const MapDescriptor& f, const MTPoint& x, const std::vector<double>& r,
                                         const std::vector<double>& g);

// lambda of a chart rectangle; throws OutOfChart
double leaf_volume(const CuChart& c, double w0, double w1, double s0, double s1);
// CSV "w,c,value": curve nodes with cumulative arclength, Jacobian cells with J
std::string curve_csv(const LeafCurve& c);
// adapted length of a leaf curve
double curve_length(const LeafCurve& c);

// greedy cover of chart points (w, s) by intrinsic rho-balls
int covering_number(const LeafChart& c, const std::vector<std::pair<double, double>>& pts, double rho);

struct CenterSegment {
  MTPoint start;
  double length = 0;  // adapted, = tau(start)
  std::vector<MTPoint> pts;
};
// [x, f(x)) along the center leaf
CenterSegment center_segment(const MapDescriptor& f, const MTPoint& x, int nodes = 64);

struct HolonomyOptions {
  int n = 50;
  double max_shift = 0.5;
};

// stable holonomy between two charts on the same base orbit (target = source.with_perp(delta)):
// w is preserved, the center shift is found by shooting S_n(target, c + d) = S_n(source, c)
class StableHolonomy {
 public:
  StableHolonomy(const CuChart& source, const CuChart& target, const HolonomyOptions& opt = {});
  double shift(double w, double c) const;
  std::pair<double, double> map(double w, double c) const { return {w, c + shift(w, c)}; }
  StableHolonomy inverse() const { return StableHolonomy(tgt_, src_, opt_); }
  const CuChart& source() const { return src_; }
  const CuChart& target() const { return tgt_; }
  // sup over a sample grid of the adapted length of the stable path
  double size(int nw = 5, int nc = 9) const;

 private:
  CuChart src_, tgt_;
  HolonomyOptions opt_;
};

struct JacobianField {
  std::vector<double> w_edges, c_edges;
  std::vector<double> J;  // row-major (c, w)
  double sup_dev = 0;     // max |J - 1|
  double at(std::size_t iw, std::size_t ic) const { return J[ic * (w_edges.size() - 1) + iw]; }
};

// density d(h_* lambda_src) / d lambda_tgt per cell of the source chart; throws DegenerateCell
JacobianField holonomy_jacobian(const StableHolonomy& h, int nw, int nc);
std::string jacobian_csv(const JacobianField& jf);
// same quantity on a tiny cell [c - eta/2, c + eta/2] at column w
double jacobian_at(const StableHolonomy& h, double w, double c, double eta = 1e-4);

inline double bound_E(double t) { return t > 0 ? std::expm1(t) : 0.0; }

struct VolumeComparison {
  double r_A = 0, C_A = 0;
  int n_cal = 0;
  std::vector<double> worst_ratio;  // n = 0..n_check
  bool holds = false;
};
// calibrate C_A on n <= n_cal over cu-balls of radius r centered at the given chart points,
// then verify lambda(f^n B) <= C_A lambda(f^n A) for n <= n_check
VolumeComparison volume_comparison(const LeafChart& c, const ColumnRegion& A, double r,
                                   const std::vector<std::pair<double, double>>& centers, int n_cal, int n_check);
ColumnRegion cu_ball(const LeafChart& c, double w, double s, double r);

// periodic points of A of period <= P (union of Fix(A^k))
struct PeriodicSet {
  int max_period = 0;
  std::vector<TorusPoint> pts;
};
PeriodicSet periodic_points(int max_period);
// the chart plaque (s extended by s_extra) passes within `tube` of a compact center leaf
bool near_compact_leaf(const CuChart& c, const PeriodicSet& P, double tube, double s_extra);
// first chart of the given shape whose base avoids the tubes; deterministic search
CuChart clean_chart(const MapDescriptor& g, double t0, double width, double c0, double c1, const PeriodicSet& P,
                    double tube, double s_extra, int start_index = 0, int id = 0);

}  // namespace ml
