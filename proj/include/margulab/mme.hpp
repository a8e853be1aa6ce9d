#pragma once
// Measures of maximal entropy: entropy estimators, box-level Parry chains,
// quasi-product measures, unstable entropy, the twin map and the dichotomy report.
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "margulab/foliation.hpp"
#include "margulab/kernels.hpp"
#include "margulab/margulis.hpp"
#include "margulab/measure.hpp"
#include "margulab/splitting.hpp"

namespace ml {

// ---- curve growth

struct CurveGrowth {
  std::vector<double> log_length;  // k = 0..n
  double slope = 0;                // least squares over k in [n/2, n]
  int nodes = 0;
};
// adapted length of f^k(segment); the segment is a graph over its chart
CurveGrowth entropy_curve_growth(const MapDescriptor& f, const LeafCurve& seg, int n, double rtol = 1e-6,
                                 long budget = 1L << 22);

// ---- box model

struct BoxSpec {
  int nx = 32, ny = 32, nt = 16;
  int depth = 1;    // cover of f^depth; 0 is the identity
  int samples = 4;  // per axis, generic path only
};

struct BoxModel {
  MapDescriptor f;
  BoxSpec spec;
  bool stencil = false;  // exact outer cover (skew products) vs sampled
  std::vector<std::int64_t> row_ptr;
  std::vector<std::uint32_t> col;
  std::vector<int> scc;  // component id per box
  int n_scc = 0;
  std::vector<int> core;  // boxes of the recurrent core, ascending
  double rho = 0, cw_lo = 0, cw_hi = 0;
  int iterations = 0;
  std::vector<double> u, v;  // left / right Perron vectors over `core`, sum 1 / max 1

  std::size_t size() const { return static_cast<std::size_t>(spec.nx) * spec.ny * spec.nt; }
  std::size_t nnz() const { return col.size(); }
  int index(int ix, int iy, int it) const { return (it * spec.ny + iy) * spec.nx + ix; }
  int box_of(const MTPoint& x) const;
  // uniform point in box i
  MTPoint point_in(int i, double a, double b, double c) const;
};

// transitions only (no Perron data)
BoxModel build_box_model(const MapDescriptor& f, const BoxSpec& s, Exec exec = Exec::Parallel);
// Tarjan components, per-component spectral radius, Perron vectors on the core; throws NotIrreducible
void perron(BoxModel& m, double tol = 1e-12, int max_iter = 20000, Exec exec = Exec::Parallel);
// cells of the integer grid met (in interior) by A^K [0,1]^2, offsets from A^K (0,0)
std::vector<std::pair<int, int>> cat_stencil(long K);

// (1/depth) log rho of the cover
double entropy_box(const MapDescriptor& f, const BoxSpec& s);

struct BoxLadder {
  std::vector<BoxSpec> rungs;
  std::vector<double> log_rho;   // per rung
  std::vector<double> per_step;  // log_rho / depth
  std::vector<double> diffs;     // log rho_k - log rho_{k-1} (consecutive depths)
  double extrapolated = 0;       // Aitken on the last three diffs (last diff if fewer)
};
// the sampled path stops at depth 3 (cost grows like lambda^depth per box)
std::vector<BoxSpec> default_box_ladder(const MapDescriptor& f);
BoxLadder box_ladder(const MapDescriptor& f, const std::vector<BoxSpec>& rungs);

// ---- Parry chain

struct ParryChain {
  std::vector<int> boxes;  // = core
  std::vector<double> p;   // stationary law
  std::vector<std::int64_t> row_ptr;
  std::vector<int> col;  // local indices
  std::vector<double> P;
  double entropy() const;  // -sum p_i P_ij log P_ij
  std::vector<double> push(const std::vector<double>& q) const;
};
ParryChain parry_chain(const BoxModel& m);
// box drawn from p, point uniform in the box, then pushed by f^j, j uniform in [0, cesaro)
MeasureSampler parry_sampler(const BoxModel& m, int cesaro = 0);

// ---- quasi-product measures (slice-horizontal leaves)

struct ProductChart {
  LeafChart chart;                  // plaque of the first foliation
  double w0 = 0, w1 = 0;            // plaque width (raw, along chart.dir())
  double c0 = 0, c1 = 0;            // one lap in s
  double v0 = 0, v1 = 0;            // transverse segment (raw, along chart.perp_dir() at level 0)
};
struct Cover {
  std::vector<ProductChart> charts;
};
// m x m lattice of charts of g at t0 = 0, wide enough that the product sets cover M
Cover lattice_cover(const MapDescriptor& g, int m, double margin = 1.1);
// number of (chart, lap) product sets containing z
int cover_count(const Cover& c, const MTPoint& z);

struct QuasiProductMeasure {
  std::string tag;  // "cu*s" or "cs*u"
  MapDescriptor f;
  Cover cover;
  int n_profile = 0;
  std::vector<double> chart_mass;             // m_p(U_p)
  std::vector<std::vector<double>> profile;   // per chart, per s-cell: m^first(cell) * m^second(segment)
  int flagged_charts = 0;                     // charts meeting a compact-leaf tube
  MeasureSampler sampler;
  // samples of the local measure m_p (no partition of unity), for compatibility checks
  std::vector<MTPoint> local_draw(std::size_t chart, std::uint64_t seed, std::size_t n) const;
};
// first: cu (or cs) system; second: s (or u) system of the inverse direction. Throws CoverGap, NotApplicable
QuasiProductMeasure quasi_product(const MapDescriptor& f, const MargulisSystem& first, const MargulisSystem& second,
                                  const Cover& cover, int n_profile = 512);

// ---- histograms on boxes

std::vector<double> box_histogram(const std::vector<MTPoint>& xs, const BoxSpec& s);
double tv_distance(const std::vector<double>& a, const std::vector<double>& b);
double support_fraction(const std::vector<double>& h);

// ---- unstable entropy

struct UnstableEntropyOptions {
  std::size_t n_samples = 2000;
  int horizon = 20;     // Birkhoff window per sample
  int pullbacks = 20;   // depth of the subordinate partition
  int eta = 8;          // torus grid of the generating partition
  std::uint64_t seed = 1;
  Exec exec = Exec::Parallel;
};
struct EntropyEstimate {
  double value = 0, stderr_ = 0;
  std::size_t n = 0;
};
// -log of conditional mass ratios m(f^-1 xi(fx)) / m(xi(x)), Margulis masses from system_u;
// NotApplicable unless u-leaves are slice-horizontal; ZeroMassCell on underflow
EntropyEstimate unstable_entropy(const MapDescriptor& f, const MeasureSampler& mu, const MargulisSystem& system_u,
                                 const UnstableEntropyOptions& opt = {});
// u-interval [a0, a1] (raw, along e_u) of the partition element xi(x)
std::pair<double, double> xi_element(const MapDescriptor& f, const MTPoint& x, int pullbacks, int eta);

// ---- twin map

struct TwinOptions {
  int n = 400;
  double kappa = 0.01;
  double search_len = 2.0;
  int bisections = 200;
};
// (1/n) log of the center separation of f^n x and f^n flow(x, u), relative to u
double center_decay_rate(const MapDescriptor& f, const MTPoint& x, double u, int n);
// sup of the exponentially contracting center neighbourhood; throws UnboundedWc, NotApplicable
MTPoint twin_map(const MapDescriptor& f, const MTPoint& x, const TwinOptions& opt = {});
struct TwinSample {
  std::vector<MTPoint> source, image;  // image[i] = beta(source[i]) where defined
  double defined_fraction = 0;
};
TwinSample twin_sample(const MapDescriptor& f, const MeasureSampler& mu, std::uint64_t seed, std::size_t n,
                       const TwinOptions& opt = {});
MeasureSampler twin_sampler(const MapDescriptor& f, const MeasureSampler& mu, const TwinOptions& opt = {});

// ---- minimality

using SegmentParam = std::function<MTPoint(double)>;  // s in [0, 1]
SegmentParam segment_of(const LeafCurve& c);
SegmentParam straight_u_segment(const MTPoint& x, double half_width);
// fraction of boxes met by f^k(segment), k = 0..n
double minimality_diagnostic(const MapDescriptor& f, const SegmentParam& seg, double adapted_length, int n,
                             const BoxSpec& boxes, long max_points = 1L << 21);

// ---- candidates

MeasureSampler periodic_orbit_measure(const MapDescriptor& f, const MTPoint& x, int period);
// slices t with g(t) = t for t-only time changes (all of them at eps = 0: a sample is returned)
std::vector<double> invariant_slices(const MapDescriptor& f);

// ---- dichotomy

enum class Verdict { NonhyperbolicCase, TwoHyperbolicMMEs, Inconclusive };
std::string verdict_name(Verdict v);
Verdict parse_verdict(const std::string& s);
Verdict classify(double lc_cu, double se_cu, double lc_cs, double se_cs, double k = 3.0);

struct DichotomyConfig {
  std::uint64_t seed = 1;
  MargulisOptions margulis;
  double chart_width = 0.03;
  int n_charts = 3;
  int cu_nw = 4, cu_nc = 16;
  int nu = 8;
  int cover_m = 8;
  int n_profile = 512;
  std::size_t n_samples = 1000;
  int horizon = 200;
  int curve_n = 30;
  bool box_ladder = true;
  std::vector<BoxSpec> ladder;  // empty: default_box_ladder(f)
  BoxSpec hist_boxes{4, 4, 4, 1, 4};
  int minimality_n = 12;
  BoxSpec minimality_boxes{16, 16, 16, 1, 4};
  std::size_t hist_samples = 50000;
};

struct Systems {
  MargulisSystem cu, u, cs, s;
  bool full = false;  // u, cs, s built (slice-horizontal leaves)
};
// the u-functional behind build_systems (lap of a fixed chart; depth capped on tilted leaves)
LeafFunctional dilation_functional(const MapDescriptor& f, const DichotomyConfig& cfg);
Systems build_systems(const MapDescriptor& f, const DichotomyConfig& cfg);

struct DichotomyReport {
  int schema_version = 1;
  MapDescriptor f;
  std::uint64_t seed = 0;
  double dilation = 0;
  double h_curve = 0, h_box = 0, h_margulis = 0;
  ExponentEstimate lc_cu, lc_cs;
  Verdict verdict = Verdict::Inconclusive;
  bool restricted = false;  // exponents from volume forward/backward, no quasi-products
  double minimality_coverage = 0;
  double s_invariance_residual = 0, u_dilation_residual = 0;
  double hist_tv = 0, support_cu = 0, support_cs = 0;
  std::string to_json() const;
  static DichotomyReport from_json(const std::string& s);
};
DichotomyReport dichotomy_report(const MapDescriptor& f, const DichotomyConfig& cfg);

}  // namespace ml
