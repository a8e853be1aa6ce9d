#pragma once
// A probability measure on M seen through a sampler, plus what the
// entropy and exponent estimators need to know about it.
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "margulab/model.hpp"

namespace ml {

// conditional of the measure along (slice-horizontal) u-leaves
enum class UConditional { Uniform, Atomic };
// orbit orientation used for Birkhoff averages of this measure
enum class Orientation { Forward, Backward };

struct MeasureSampler {
  std::string name;
  std::function<std::vector<MTPoint>(std::uint64_t seed, std::size_t n)> draw;
  UConditional ucond = UConditional::Uniform;
  Orientation orientation = Orientation::Forward;
};

MeasureSampler volume_sampler();
MeasureSampler slice_sampler(double t);                     // Lebesgue on {t = const}
MeasureSampler orbit_sampler(const std::vector<MTPoint>& orbit, const std::string& name);  // uniform on a finite set

}  // namespace ml
