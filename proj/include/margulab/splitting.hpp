#pragma once
#include <cstdint>
#include <string>

#include "margulab/kernels.hpp"
#include "margulab/measure.hpp"
#include "margulab/model.hpp"

namespace ml {

struct SplittingFrame {
  AdaptedVector e_s, e_c, e_u;  // raw components, adapted norm 1
  MTPoint base;
  double residual = 0;
  double min_angle = 0;  // radians, adapted metric
};

struct SplittingOptions {
  int n = 60;
  double tol = 1e-6;
  double t_min = 0.1;
};

// Df in orthonormal coordinates of the adapted metric
Mat3 ortho_differential(const MapDescriptor& f, const MTPoint& x);

// power iteration forward (E^u, E^cu) and backward (E^s, E^cs); E^c = E^cu cap E^cs
SplittingFrame compute_splitting(const MapDescriptor& f, const MTPoint& x, const SplittingOptions& opt = {});

enum class ExponentKind { Stable, Center, Unstable };
std::string exponent_kind_name(ExponentKind k);

struct ExponentEstimate {
  double value = 0;
  double stderr_ = 0;
  int n_samples = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  ExponentKind kind = ExponentKind::Center;
};

// log ||Df|E^sigma(x)|| in the adapted metric; closed forms where the splitting is known
double log_growth(const MapDescriptor& f, const MTPoint& x, ExponentKind k);

struct LyapunovOptions {
  int horizon = 200;
  int n_samples = 1000;
  std::uint64_t seed = 1;
  Exec exec = Exec::Parallel;
  bool use_sampler_orientation = true;
  Orientation orientation = Orientation::Forward;  // used when use_sampler_orientation is false
};

ExponentEstimate lyapunov(const MapDescriptor& f, const MeasureSampler& mu, ExponentKind k, const LyapunovOptions& opt);
inline ExponentEstimate lyapunov_center(const MapDescriptor& f, const MeasureSampler& mu, const LyapunovOptions& opt) {
  return lyapunov(f, mu, ExponentKind::Center, opt);
}
// average log|det Df| over the same samples (volume-change check)
ExponentEstimate log_det_average(const MapDescriptor& f, const MeasureSampler& mu, const LyapunovOptions& opt);

// CSV: family,epsilon,exponent_kind,value,stderr,horizon,n_samples,seed
std::string exponent_csv_header();
std::string exponent_csv_row(const MapDescriptor& f, const ExponentEstimate& e);

}  // namespace ml
