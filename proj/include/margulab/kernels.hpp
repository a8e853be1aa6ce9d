#pragma once
// Execution policy and deterministic reductions shared by the parallel kernels.
#include <cmath>
#include <cstddef>
#include <vector>

namespace ml {

enum class Exec { Serial, Parallel };

void set_workers(int n);  // 0 = all available
int workers();

// fixed-order pairwise summation: same bits for any thread count
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

struct MeanErr {
  double mean = 0, stderr_ = 0;
  std::size_t n = 0;
};
MeanErr mean_stderr(const std::vector<double>& v);

}  // namespace ml
