#include "margulab/measure.hpp"

#include <random>

#include "margulab/rng.hpp"

namespace ml {

MeasureSampler volume_sampler() {
  MeasureSampler m;
  m.name = "volume";
  m.draw = [](std::uint64_t seed, std::size_t n) {
    Rng g(seed);
    std::vector<MTPoint> out(n);
    for (auto& x : out) {
      double a = u01(g), b = u01(g), c = u01(g);
      x = MTPoint(TorusPoint(a, b), c);
    }
    return out;
  };
  return m;
}

MeasureSampler slice_sampler(double t) {
  MeasureSampler m;
  m.name = "slice";
  m.draw = [t](std::uint64_t seed, std::size_t n) {
    Rng g(seed);
    std::vector<MTPoint> out(n);
    for (auto& x : out) {
      double a = u01(g), b = u01(g);
      x = MTPoint(TorusPoint(a, b), t);
    }
    return out;
  };
  return m;
}

MeasureSampler orbit_sampler(const std::vector<MTPoint>& orbit, const std::string& name) {
  MeasureSampler m;
  m.name = name;
  m.ucond = UConditional::Atomic;
  m.draw = [orbit](std::uint64_t seed, std::size_t n) {
    Rng g(seed);
    std::vector<MTPoint> out(n);
    for (auto& x : out) x = orbit[static_cast<std::size_t>(u01(g) * static_cast<double>(orbit.size())) % orbit.size()];
    return out;
  };
  return m;
}

}  // namespace ml
