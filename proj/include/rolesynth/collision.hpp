#pragma once

// Probability that a batch of B uniformly drawn items (from N distinct
// images) contains at least one repeated image.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rolesynth/error.hpp"

namespace rolesynth {

struct CollisionSpec {
  std::uint64_t unique_images = 0;  // N
  std::uint64_t batch_size = 0;     // B

  void validate() const {
    if (batch_size < 1 || batch_size > unique_images) {
      throw ValidationError("collision spec requires 1 <= batch_size <= unique_images");
    }
  }
};

/// exact: 1 - prod_{k<B} (1 - k/N), accumulated in log space.
/// approximate: 1 - exp(-B(B-1) / 2N).
inline double collision_probability(const CollisionSpec& spec, bool exact) {
  spec.validate();
  const double n = static_cast<double>(spec.unique_images);
  const double b = static_cast<double>(spec.batch_size);
  if (!exact) return -std::expm1(-b * (b - 1.0) / (2.0 * n));
  double log_none = 0.0;
  for (std::uint64_t k = 1; k < spec.batch_size; ++k) {
    log_none += std::log1p(-static_cast<double>(k) / n);
  }
  return -std::expm1(log_none);
}

/// Fraction of `trials` simulated batches with a repeated image.
inline double simulate_collision_rate(const CollisionSpec& spec, std::uint64_t trials,
                                      std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> pick(0, spec.unique_images - 1);
  std::vector<std::uint32_t> stamp(spec.unique_images, 0);
  std::uint64_t hits = 0;
  for (std::uint64_t t = 1; t <= trials; ++t) {
    const auto mark = static_cast<std::uint32_t>(t);
    for (std::uint64_t k = 0; k < spec.batch_size; ++k) {
      auto& s = stamp[pick(rng)];
      if (s == mark) {
        ++hits;
        break;
      }
      s = mark;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace rolesynth
