#pragma once

// Stretching a learned positional-embedding table to a longer context: a
// frozen prefix followed by linear interpolation of the remaining rows.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>

#include "rolesynth/error.hpp"
#include "rolesynth/matrix.hpp"

namespace rolesynth {

template <std::floating_point T>
struct PositionalTable {
  Matrix<T> entries;  // n x d
  std::size_t keep_prefix = 20;
  std::size_t ratio_q = 1;

  std::size_t length() const { return entries.rows(); }
};

/// Stride factor q such that target = keep + q * (n - keep); throws when no
/// integer q >= 1 exists.
inline std::size_t interpolation_ratio(std::size_t n, std::size_t keep_prefix,
                                       std::size_t target_len) {
  if (n <= keep_prefix) throw ValidationError("table must be longer than the frozen prefix");
  const std::size_t tail = n - keep_prefix;
  if (target_len < n || (target_len - keep_prefix) % tail != 0) {
    throw ValidationError("target length " + std::to_string(target_len) +
                          " is not keep_prefix + q * (n - keep_prefix) for an integer q >= 1");
  }
  return (target_len - keep_prefix) / tail;
}

/// Rows [0, keep) are copied. Output row keep + i blends source rows keep + j
/// and keep + j + 1 with j = i / q and weight (i mod q) / q; the upper
/// neighbour past the last source row clamps to the last row.
template <std::floating_point T>
PositionalTable<T> extend_positional_table(const PositionalTable<T>& pe, std::size_t target_len) {
  const std::size_t n = pe.entries.rows();
  const std::size_t d = pe.entries.cols();
  const std::size_t keep = pe.keep_prefix;
  const std::size_t q = interpolation_ratio(n, keep, target_len);

  PositionalTable<T> out;
  out.keep_prefix = keep;
  out.ratio_q = q;
  out.entries = Matrix<T>(target_len, d);
  for (std::size_t r = 0; r < keep; ++r)
    for (std::size_t c = 0; c < d; ++c) out.entries(r, c) = pe.entries(r, c);

  for (std::size_t i = 0; i < target_len - keep; ++i) {
    const std::size_t j = i / q;
    const T lambda = static_cast<T>(i % q) / static_cast<T>(q);
    const std::size_t lo = keep + j;
    const std::size_t hi = std::min(lo + 1, n - 1);
    for (std::size_t c = 0; c < d; ++c) {
      // lerp is exact at lambda = 0 and stays within [a, b].
      out.entries(keep + i, c) = std::lerp(pe.entries(lo, c), pe.entries(hi, c), lambda);
    }
  }
  return out;
}

}  // namespace rolesynth
