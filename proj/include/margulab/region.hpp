#pragma once
// Regions of a leaf chart described column by column, and the leaf volumes
// l_k(R) = lambda(f^k R) of their images.
#include <vector>

#include "margulab/kernels.hpp"
#include "margulab/leafchart.hpp"

namespace ml {

struct SInterval {
  double a = 0, b = 0, weight = 1;
};

// w in [w0, w1) times a union of weighted s-intervals (the same for every w in the column)
struct Column {
  double w0 = 0, w1 = 0;
  std::vector<SInterval> iv;
};

struct ColumnRegion {
  std::vector<Column> cols;
  static ColumnRegion rect(double w0, double w1, double s0, double s1, int ncols = 1);
};

struct QuadOptions {
  double rtol = 1e-6;
  long budget = 1L << 18;  // column evaluations
  int max_depth = 24;
  Exec exec = Exec::Parallel;
};

// l_k(R), k = 0..n. Exact in s; midpoint rule in w, refined adaptively unless
// the chart is column independent. Throws RefinementBudgetExceeded.
std::vector<double> ell_series(const LeafChart& c, const ColumnRegion& r, int n, const QuadOptions& opt = {});

// contribution of one column slice at abscissa w (per unit w), k = 0..n
void column_density(const LeafChart& c, double w, const std::vector<SInterval>& iv, int n, double* out);

}  // namespace ml
