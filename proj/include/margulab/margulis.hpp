#pragma once
// Margulis functional by power iteration of leaf volumes, and the conditional
// systems {m^cu}, {m^u} (and s/cs through the inverse map).
#include <limits>
#include <string>
#include <vector>

#include "margulab/foliation.hpp"
#include "margulab/region.hpp"

namespace ml {

// nonnegative step function with bounded support in one chart
struct CuTestFunction {
  CuChart chart;
  ColumnRegion region;
  bool continuous = false;
  bool positive() const;  // support has nonempty interior
  double sup() const;
};

CuTestFunction indicator(const CuChart& c, double w0, double w1, double s0, double s1, int ncols = 1);
// piecewise-constant values on an nw x nc grid over the chart, row-major (c, w)
CuTestFunction grid_function(const CuChart& c, int nw, int nc, const std::vector<double>& values);
// one full lap {(w, s) : gamma <= s < S_1(w, gamma)} over [w0, w1]
CuTestFunction lap(const CuChart& c, double w0, double w1, double gamma, int ncols = 1);

// ell_n(phi) = lambda(phi o f^{-n}), computed exactly in s
double ell(const CuTestFunction& phi, int n, const QuadOptions& q = {});

struct MargulisOptions {
  int n_max = 24;
  int window = 8;
  double tol = 0.02;  // allowed spread of l_{k+1}/l_k over the window, relative
  QuadOptions quad;
};

struct LeafFunctional {
  MapDescriptor f;
  std::vector<double> ref;     // l_k(phi_1), k = 0..n_max + 1
  std::vector<double> ratios;  // l_{k+1}(phi_1) / l_k(phi_1)
  int n_max = 0, window = 0;
  double dilation = 0;  // D-hat
  double spread = 0;
  double rate = 0;  // fitted geometric rate of |ratio_k - D|, 0 when exact
  QuadOptions quad;

  // Cesaro window average of l_k(phi)/l_k(phi_1)
  double operator()(const CuTestFunction& phi) const;
  double eval_series(const std::vector<double>& l) const;           // l has n_max + 2 entries
  double eval_shifted(const CuTestFunction& phi) const;              // Lambda(phi o f^{-1})
  double eval_shifted_series(const std::vector<double>& l) const;
  std::vector<double> series(const CuTestFunction& phi) const;      // l_k(phi), k = 0..n_max + 1
};

// throws NoConvergence when the window spread exceeds tol
LeafFunctional margulis_iterate(const CuTestFunction& phi1, const MargulisOptions& opt = {});

struct ChartHistogram {
  int id = 0;
  CuChart chart;
  int nw = 0, nc = 0;
  std::vector<double> mass;  // row-major (c, w) for cu/cs, length nw for u/s
  bool flagged = false;
  double total() const;
  std::vector<double> normalized() const;
};

struct MargulisSystem {
  std::string sigma;  // "cu", "u", "s" or "cs"
  MapDescriptor f;    // the map whose expanding leaves carry the system
  double dilation = 0;
  LeafFunctional functional;
  std::vector<ChartHistogram> charts;
  int period = 5;
  double tube = 1e-2;
  double s_invariance_residual = std::numeric_limits<double>::quiet_NaN();
  double u_dilation_residual = std::numeric_limits<double>::quiet_NaN();
};

// per-cell masses of a chart, row-major (c, w)
std::vector<double> cell_masses(const LeafFunctional& L, const CuChart& c, int nw, int nc);

// relative holonomy defect of the functional over a battery (coarse cells of the target chart)
double s_invariance_residual(const LeafFunctional& L, const std::vector<StableHolonomy>& battery, int nw = 4, int nc = 16);

MargulisSystem cu_conditionals(const LeafFunctional& L, const std::vector<CuChart>& charts, int nw, int nc,
                               const std::vector<StableHolonomy>& battery = {});

// m^u of the u-segment w in [w0, w1] at chart height c: Lambda of the center extension
double u_mass(const LeafFunctional& L, const LeafChart& chart, double w0, double w1, double c, int ncols = 1);
// the same for its image under f (which sits over the same columns)
double u_mass_image(const LeafFunctional& L, const LeafChart& chart, double w0, double w1, double c, int ncols = 1);

// u-histograms (nu cells over the chart w-range at c = c0); throws CompactLeafConflict for flagged charts;
// reports sup relative dilation defect over the cells in u_dilation_residual
MargulisSystem u_conditionals(const MargulisSystem& cu, int nu);

struct CsHolonomy {
  LeafChart chart;  // source leaf; the target is chart.with_perp(perp)
  double w0 = 0, w1 = 0;
  double perp = 0;
  double dc = 0;  // center displacement of the target segment
};
struct CsReport {
  double C = 0;          // D^-1 + 1 + D
  double worst = 1;      // max over battery of max(r, 1/r)
  std::vector<double> ratios;
  bool within = false;
};
// ratios m^u(A) / m^u(h A); time changes with p-independent roof only
CsReport cs_quasi_invariance_check(const LeafFunctional& L, const std::vector<CsHolonomy>& battery, double tol = 0.0);

// the whole pipeline for f^{-1}: the returned system has sigma = "cs" and its functional's dilation is D_s^{-1}
MargulisSystem stable_system(const MapDescriptor& f, const CuTestFunction& phi1_inverse, const std::vector<CuChart>& charts,
                             int nw, int nc, const MargulisOptions& opt = {});

// total variation between normalized per-chart histograms (max over charts)
double histogram_tv(const MargulisSystem& a, const MargulisSystem& b);

// JSON manifest + one CSV per chart
void save_checkpoint(const MargulisSystem& s, const std::string& dir);
// restores histograms and the functional series; charts are rebuilt from their stored bases
MargulisSystem load_checkpoint(const std::string& dir);

}  // namespace ml
