#pragma once

#include <span>
#include <vector>

#include "alignve/tensor.hpp"

// Differentiable primitives. Every function records a backward entry when
// any input is tracked on a tape and returns an untracked tensor otherwise.
namespace alignve {

// [p x q] * [q x r]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

// Elementwise, identical shapes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

// x[p x q] + bias[q] broadcast over rows.
template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// Subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// Row-wise softmax with per-row max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

// Per-row (x - mean) / sqrt(var + eps) * gamma + beta with the biased variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

// Sum of all entries as a scalar.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Row-major reinterpretation; gradients pass through unchanged.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Joins matrices with equal row counts along the feature axis, in order.
template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts);

// Flattens every part and joins them into one vector.
template <typename T>
Tensor<T> concat_flat(std::span<const Tensor<T>> parts);

// -log softmax(logits)[label] computed with max subtraction.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t label);

// Softmax over all entries of a vector (probabilities, no tape link).
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

template <typename T>
bool all_finite(const Tensor<T>& x);

}  // namespace alignve
