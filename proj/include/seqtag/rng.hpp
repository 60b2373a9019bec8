#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "seqtag/array.hpp"

namespace seqtag {

using Rng = std::mt19937_64;

inline Array random_normal(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  Array out(std::move(shape), 0.0);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : out.values()) v = dist(rng);
  return out;
}

inline Array random_uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
  Array out(std::move(shape), 0.0);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : out.values()) v = dist(rng);
  return out;
}

/// Glorot-style uniform initialization for a fan_in x fan_out weight matrix.
inline Array glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return random_uniform({fan_in, fan_out}, -limit, limit, rng);
}

}  // namespace seqtag
