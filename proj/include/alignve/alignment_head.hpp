#pragma once

#include <vector>

#include "alignve/init.hpp"
#include "alignve/ops.hpp"
#include "alignve/param_store.hpp"

namespace alignve {

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kPooledSize = 150;

enum class PoolMode { average, max };

struct PoolShape {
  std::size_t rows = 10;
  std::size_t cols = 15;

  void validate() const;
  friend bool operator==(const PoolShape&, const PoolShape&) = default;
};

// Parses "HxW".
PoolShape parse_pool_shape(const std::string& text);
std::string to_string(const PoolShape& shape);

// Half-open bin [floor(i * in / out), ceil((i + 1) * in / out)).
struct Bin {
  std::size_t begin, end;
};
Bin adaptive_bin(std::size_t index, std::size_t in, std::size_t out);

// R[i][j] = P[i] . H[j]; the m x n relation matrix of premise regions and
// hypothesis tokens.
template <typename T>
Tensor<T> alignment_matrix(const Tensor<T>& premise, const Tensor<T>& hypothesis);

// Average backward spreads 1/|bin| over the bin; max backward routes to the
// first maximal element in row-major bin order.
template <typename T>
Tensor<T> adaptive_pool_2d(const Tensor<T>& x, std::size_t out_h, std::size_t out_w, PoolMode mode);

template <typename T>
struct ClassifierParams {
  const Tensor<T>* weight = nullptr;  // [2 * 150 x 3]
  const Tensor<T>* bias = nullptr;    // [3]

  static ClassifierParams from(const ParamSet<T>& set);
};

void append_classifier_specs(std::vector<ParamSpec>& specs);

// Concatenated average- and max-pooled alignment features, [300].
template <typename T>
Tensor<T> pooled_features(const Tensor<T>& alignment, const PoolShape& pool);

// Class logits V W_v + b_v, [3].
template <typename T>
Tensor<T> classify_logits(const Tensor<T>& alignment, const ClassifierParams<T>& params, const PoolShape& pool);

// Class probabilities softmax(V W_v + b_v).
template <typename T>
std::vector<T> classify(const Tensor<T>& alignment, const ClassifierParams<T>& params, const PoolShape& pool);

}  // namespace alignve
