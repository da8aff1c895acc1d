#include "alignve/alignment_head.hpp"

#include <array>
#include <charconv>

namespace alignve {

void PoolShape::validate() const {
  if (rows == 0 || cols == 0 || rows * cols != kPooledSize) {
    throw ConfigError("pool shape " + to_string(*this) + " must have exactly " + std::to_string(kPooledSize) +
                      " cells");
  }
}

PoolShape parse_pool_shape(const std::string& text) {
  const auto x = text.find_first_of("xX");
  PoolShape shape{0, 0};
  if (x != std::string::npos) {
    const char* begin = text.data();
    const auto r1 = std::from_chars(begin, begin + x, shape.rows);
    const auto r2 = std::from_chars(begin + x + 1, begin + text.size(), shape.cols);
    if (r1.ec == std::errc() && r1.ptr == begin + x && r2.ec == std::errc() && r2.ptr == begin + text.size()) {
      shape.validate();
      return shape;
    }
  }
  throw ConfigError("invalid pool shape '" + text + "', expected HxW");
}

std::string to_string(const PoolShape& shape) {
  return std::to_string(shape.rows) + "x" + std::to_string(shape.cols);
}

Bin adaptive_bin(std::size_t index, std::size_t in, std::size_t out) {
  return {index * in / out, ((index + 1) * in + out - 1) / out};
}

template <typename T>
Tensor<T> alignment_matrix(const Tensor<T>& premise, const Tensor<T>& hypothesis) {
  if (premise.rank() != 2 || hypothesis.rank() != 2 || premise.cols() != hypothesis.cols()) {
    throw ShapeError("alignment_matrix: dimension mismatch " + shape_str(premise.shape()) + " vs " +
                     shape_str(hypothesis.shape()));
  }
  return matmul(premise, transpose(hypothesis));
}

template <typename T>
Tensor<T> adaptive_pool_2d(const Tensor<T>& x, std::size_t out_h, std::size_t out_w, PoolMode mode) {
  if (x.rank() != 2) throw ShapeError("adaptive_pool_2d: expected a matrix, got " + shape_str(x.shape()));
  if (out_h == 0 || out_w == 0) throw ShapeError("adaptive_pool_2d: output size must be positive");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor<T> out({out_h, out_w});
  // Source element each max bin routes to.
  std::vector<std::size_t> argmax(mode == PoolMode::max ? out_h * out_w : 0);
  for (std::size_t i = 0; i < out_h; ++i) {
    const Bin rb = adaptive_bin(i, m, out_h);
    for (std::size_t j = 0; j < out_w; ++j) {
      const Bin cb = adaptive_bin(j, n, out_w);
      if (mode == PoolMode::average) {
        T total = 0;
        for (std::size_t r = rb.begin; r < rb.end; ++r)
          for (std::size_t c = cb.begin; c < cb.end; ++c) total += x(r, c);
        out(i, j) = total / static_cast<T>((rb.end - rb.begin) * (cb.end - cb.begin));
      } else {
        std::size_t best = rb.begin * n + cb.begin;
        for (std::size_t r = rb.begin; r < rb.end; ++r)
          for (std::size_t c = cb.begin; c < cb.end; ++c)
            if (x[r * n + c] > x[best]) best = r * n + c;
        argmax[i * out_w + j] = best;
        out(i, j) = x[best];
      }
    }
  }

  Tape<T>* tape = x.tape();
  if (!tape) return out;
  return tape->record(std::move(out), {&x},
                      [argmax = std::move(argmax), mode, m, n, out_h, out_w](std::span<const T> g, auto in) {
                        auto& dx = *in[0];
                        if (mode == PoolMode::max) {
                          for (std::size_t k = 0; k < argmax.size(); ++k) dx[argmax[k]] += g[k];
                          return;
                        }
                        for (std::size_t i = 0; i < out_h; ++i) {
                          const Bin rb = adaptive_bin(i, m, out_h);
                          for (std::size_t j = 0; j < out_w; ++j) {
                            const Bin cb = adaptive_bin(j, n, out_w);
                            const T share =
                                g[i * out_w + j] / static_cast<T>((rb.end - rb.begin) * (cb.end - cb.begin));
                            for (std::size_t r = rb.begin; r < rb.end; ++r)
                              for (std::size_t c = cb.begin; c < cb.end; ++c) dx[r * n + c] += share;
                          }
                        }
                      });
}

template <typename T>
ClassifierParams<T> ClassifierParams<T>::from(const ParamSet<T>& set) {
  return {&set.get("classifier.weight"), &set.get("classifier.bias")};
}

void append_classifier_specs(std::vector<ParamSpec>& specs) {
  specs.push_back({"classifier.weight", {2 * kPooledSize, kNumClasses}, Init::glorot_uniform});
  specs.push_back({"classifier.bias", {kNumClasses}, Init::zeros});
}

template <typename T>
Tensor<T> pooled_features(const Tensor<T>& alignment, const PoolShape& pool) {
  pool.validate();
  const std::array<Tensor<T>, 2> parts = {adaptive_pool_2d(alignment, pool.rows, pool.cols, PoolMode::average),
                                          adaptive_pool_2d(alignment, pool.rows, pool.cols, PoolMode::max)};
  return concat_flat<T>(parts);
}

template <typename T>
Tensor<T> classify_logits(const Tensor<T>& alignment, const ClassifierParams<T>& params, const PoolShape& pool) {
  const Tensor<T> features = pooled_features(alignment, pool);
  const Tensor<T> row = reshape(features, {1, features.size()});
  const Tensor<T> logits = add_row_bias(matmul(row, *params.weight), *params.bias);
  return reshape(logits, {logits.size()});
}

template <typename T>
std::vector<T> classify(const Tensor<T>& alignment, const ClassifierParams<T>& params, const PoolShape& pool) {
  const Tensor<T> logits = classify_logits(alignment.detach(), params, pool);
  return softmax<T>(logits.data());
}

#define ALIGNVE_INSTANTIATE_HEAD(T)                                                                          \
  template Tensor<T> alignment_matrix(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> adaptive_pool_2d(const Tensor<T>&, std::size_t, std::size_t, PoolMode);                \
  template struct ClassifierParams<T>;                                                                       \
  template Tensor<T> pooled_features(const Tensor<T>&, const PoolShape&);                                   \
  template Tensor<T> classify_logits(const Tensor<T>&, const ClassifierParams<T>&, const PoolShape&);       \
  template std::vector<T> classify(const Tensor<T>&, const ClassifierParams<T>&, const PoolShape&);

ALIGNVE_INSTANTIATE_HEAD(float)
ALIGNVE_INSTANTIATE_HEAD(double)

}  // namespace alignve
