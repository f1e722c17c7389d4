#pragma once

// Multi-positive contrastive loss over a B x B similarity matrix, where every
// caption of an image counts as a positive for that image.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "rolesynth/error.hpp"
#include "rolesynth/matrix.hpp"

namespace rolesynth {

/// s(i, j): similarity of image i and text j; tau: softmax temperature.
template <std::floating_point T>
struct SimilarityBatch {
  Matrix<T> s;
  T tau = T{1};

  void validate() const {
    if (!s.square() || s.rows() == 0) throw ValidationError("similarity matrix must be square and non-empty");
    if (!(tau > T{0}) || !std::isfinite(tau)) throw ValidationError("tau must be positive and finite");
    for (T v : s.data()) {
      if (!std::isfinite(v)) throw ValidationError("similarity entries must be finite");
    }
  }
};

/// m(i, j) = 1 when image i and text j come from the same source image.
using CorrespondenceMatrix = Matrix<std::uint8_t>;

namespace detail {

template <std::floating_point T>
T log_sum_exp(std::span<const T> x, T scale) {
  T hi = -std::numeric_limits<T>::infinity();
  for (T v : x) hi = std::max(hi, v * scale);
  T acc = 0;
  for (T v : x) acc += std::exp(v * scale - hi);
  return hi + std::log(acc);
}

template <std::floating_point T>
void check_inputs(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  batch.validate();
  if (m.rows() != batch.s.rows() || m.cols() != batch.s.cols()) {
    throw ValidationError("correspondence matrix dimensions do not match similarity matrix");
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (m(i, j) > 1) throw ValidationError("correspondence matrix must be binary");
      row += m(i, j);
      col += m(j, i);
    }
    if (row == 0) throw ValidationError("image " + std::to_string(i) + " has no positive caption");
    if (col == 0) throw ValidationError("text " + std::to_string(i) + " has no positive image");
  }
}

// Row-direction loss without input checks.
template <std::floating_point T>
T rowwise_loss(const Matrix<T>& s, T tau, const CorrespondenceMatrix& m) {
  const std::size_t b = s.rows();
  const T inv_tau = T{1} / tau;
  T total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const T lse = log_sum_exp(s.row(i), inv_tau);
    T positives = 0;
    T acc = 0;
    for (std::size_t j = 0; j < b; ++j) {
      if (!m(i, j)) continue;
      positives += 1;
      acc += lse - s(i, j) * inv_tau;
    }
    total += acc / positives;
  }
  return total / static_cast<T>(b);
}

// d(rowwise_loss)/ds accumulated into `grad` with weight `w`.
template <std::floating_point T>
void rowwise_gradient(const Matrix<T>& s, T tau, const CorrespondenceMatrix& m, T w,
                      Matrix<T>& grad, bool transpose_out) {
  const std::size_t b = s.rows();
  const T inv_tau = T{1} / tau;
  const T coeff = w / (static_cast<T>(b) * tau);
  for (std::size_t i = 0; i < b; ++i) {
    const T lse = log_sum_exp(s.row(i), inv_tau);
    T positives = 0;
    for (std::size_t j = 0; j < b; ++j) positives += m(i, j);
    for (std::size_t j = 0; j < b; ++j) {
      T p = std::exp(s(i, j) * inv_tau - lse);
      T g = coeff * (p - static_cast<T>(m(i, j)) / positives);
      if (transpose_out) grad(j, i) += g;
      else grad(i, j) += g;
    }
  }
}

}  // namespace detail

/// Image-to-text direction, log-sum-exp stabilized.
template <std::floating_point T>
T multipositive_loss_i2t(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  detail::check_inputs(batch, m);
  return detail::rowwise_loss(batch.s, batch.tau, m);
}

/// Text-to-image direction: the same form over columns.
template <std::floating_point T>
T multipositive_loss_t2i(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  detail::check_inputs(batch, m);
  return detail::rowwise_loss(batch.s.transposed(), batch.tau, m.transposed());
}

/// Symmetric objective 0.5 * (i2t + t2i).
template <std::floating_point T>
T multipositive_loss(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  detail::check_inputs(batch, m);
  return T{0.5} * (detail::rowwise_loss(batch.s, batch.tau, m) +
                   detail::rowwise_loss(batch.s.transposed(), batch.tau, m.transposed()));
}

/// Closed-form dL/ds of the symmetric objective:
///   0.5/(B tau) * [(P_row - M/rowsum) + (P_col - M/colsum)]
/// where P_row / P_col are the row- and column-wise softmaxes of s / tau.
template <std::floating_point T>
Matrix<T> loss_gradient(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  detail::check_inputs(batch, m);
  Matrix<T> grad(batch.s.rows(), batch.s.cols(), T{0});
  detail::rowwise_gradient(batch.s, batch.tau, m, T{0.5}, grad, false);
  detail::rowwise_gradient(batch.s.transposed(), batch.tau, m.transposed(), T{0.5}, grad, true);
  return grad;
}

/// Gradient of the image-to-text direction alone.
template <std::floating_point T>
Matrix<T> loss_gradient_i2t(const SimilarityBatch<T>& batch, const CorrespondenceMatrix& m) {
  detail::check_inputs(batch, m);
  Matrix<T> grad(batch.s.rows(), batch.s.cols(), T{0});
  detail::rowwise_gradient(batch.s, batch.tau, m, T{1}, grad, false);
  return grad;
}

}  // namespace rolesynth
