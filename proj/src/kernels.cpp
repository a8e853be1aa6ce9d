#include "margulab/kernels.hpp"

#include <omp.h>

namespace ml {

static int g_workers = 0;

void set_workers(int n) {
  g_workers = n;
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
}

int workers() { return g_workers > 0 ? g_workers : omp_get_num_procs(); }

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

MeanErr mean_stderr(const std::vector<double>& v) {
  MeanErr r;
  r.n = v.size();
  if (v.empty()) return r;
  r.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  std::vector<double> d(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - r.mean) * (v[i] - r.mean);
  double var = pairwise_sum(d) / static_cast<double>(v.size() - 1);
  r.stderr_ = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

}  // namespace ml
