#pragma once

#include <cstdint>
#include <random>

#include "affrig/metric.hpp"

namespace affrig {

// Seed for stream `index` of a master seed; independent of scheduling.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Portable generator: distributions are computed here rather than through
// <random>'s implementation-defined distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int index(int count) { return static_cast<int>(uniform() * count) % count; }
  double normal();
  Vec unit_vector(int n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace affrig
