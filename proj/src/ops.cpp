#include "alignve/ops.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace alignve {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
Tape<T>* find_tape(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs) {
    if (t->tape()) return t->tape();
  }
  return nullptr;
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
}

// c[p x r] += a[p x q] * b[q x r], k ascending for every (i, j).
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t p, std::size_t q, std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    T* crow = c + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const T aik = a[i * q + k];
      const T* brow = b + k * r;
      for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
  if (b.rows() != q) {
    throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor<T> out({p, r});
  gemm_nn(a.data().data(), b.data().data(), out.data().data(), p, q, r);

  Tape<T>* tape = find_tape({&a, &b});
  if (!tape) return out;
  std::vector<T> av = a.values(), bv = b.values();
  return tape->record(std::move(out), {&a, &b},
                      [av = std::move(av), bv = std::move(bv), p, q, r](std::span<const T> g, auto in) {
                        if (in[0]) {
                          // dA[i][k] += sum_j g[i][j] * B[k][j]
                          T* da = in[0]->data();
                          for (std::size_t i = 0; i < p; ++i) {
                            for (std::size_t k = 0; k < q; ++k) {
                              T acc = 0;
                              for (std::size_t j = 0; j < r; ++j) acc += g[i * r + j] * bv[k * r + j];
                              da[i * q + k] += acc;
                            }
                          }
                        }
                        if (in[1]) {
                          // dB[k][j] += sum_i A[i][k] * g[i][j]
                          T* db = in[1]->data();
                          for (std::size_t i = 0; i < p; ++i) {
                            for (std::size_t k = 0; k < q; ++k) {
                              const T aik = av[i * q + k];
                              for (std::size_t j = 0; j < r; ++j) db[k * r + j] += aik * g[i * r + j];
                            }
                          }
                        }
                      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t p = a.rows(), q = a.cols();
  Tensor<T> out({q, p});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out(j, i) = a(i, j);

  Tape<T>* tape = find_tape({&a});
  if (!tape) return out;
  return tape->record(std::move(out), {&a}, [p, q](std::span<const T> g, auto in) {
    T* da = in[0]->data();
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) da[i * q + j] += g[j * p + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.detach();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];

  Tape<T>* tape = find_tape({&a, &b});
  if (!tape) return out;
  return tape->record(std::move(out), {&a, &b}, [](std::span<const T> g, auto in) {
    for (auto* buf : in) {
      if (!buf) continue;
      for (std::size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.detach();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];

  Tape<T>* tape = find_tape({&a, &b});
  if (!tape) return out;
  return tape->record(std::move(out), {&a, &b}, [av = a.values(), bv = b.values()](std::span<const T> g, auto in) {
    if (in[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * bv[i];
    if (in[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * av[i];
  });
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_matrix(x, "add_row_bias");
  const std::size_t p = x.rows(), q = x.cols();
  if (bias.size() != q || bias.rank() != 1) {
    throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  Tensor<T> out = x.detach();
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out(i, j) += bias[j];

  Tape<T>* tape = find_tape({&x, &bias});
  if (!tape) return out;
  return tape->record(std::move(out), {&x, &bias}, [p, q](std::span<const T> g, auto in) {
    if (in[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
    if (in[1])
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) (*in[1])[j] += g[i * q + j];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out = x.detach();
  for (auto& v : out.data()) v *= factor;

  Tape<T>* tape = find_tape({&x});
  if (!tape) return out;
  return tape->record(std::move(out), {&x}, [factor](std::span<const T> g, auto in) {
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * factor;
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = x.detach();
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);

  Tape<T>* tape = find_tape({&x});
  if (!tape) return out;
  return tape->record(std::move(out), {&x}, [xv = x.values()](std::span<const T> g, auto in) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > T(0)) (*in[0])[i] += g[i];
  });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t p = x.rows(), q = x.cols();
  Tensor<T> out({p, q});
  for (std::size_t i = 0; i < p; ++i) {
    T mx = x(i, 0);
    for (std::size_t j = 1; j < q; ++j) mx = std::max(mx, x(i, j));
    T total = 0;
    for (std::size_t j = 0; j < q; ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < q; ++j) out(i, j) /= total;
  }

  Tape<T>* tape = find_tape({&x});
  if (!tape) return out;
  std::vector<T> y = out.values();
  return tape->record(std::move(out), {&x}, [y = std::move(y), p, q](std::span<const T> g, auto in) {
    // dx = y * (g - <g, y>) per row
    for (std::size_t i = 0; i < p; ++i) {
      T dot = 0;
      for (std::size_t j = 0; j < q; ++j) dot += g[i * q + j] * y[i * q + j];
      for (std::size_t j = 0; j < q; ++j) (*in[0])[i * q + j] += y[i * q + j] * (g[i * q + j] - dot);
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require_matrix(x, "layer_norm");
  if (!(eps > T(0))) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t p = x.rows(), q = x.cols();
  if (gamma.size() != q || beta.size() != q) {
    throw ShapeError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" + shape_str(beta.shape()) +
                     " do not match " + shape_str(x.shape()));
  }
  Tensor<T> out({p, q});
  std::vector<T> xhat(p * q), rstd(p);
  for (std::size_t i = 0; i < p; ++i) {
    T mean = 0;
    for (std::size_t j = 0; j < q; ++j) mean += x(i, j);
    mean /= T(q);
    T var = 0;
    for (std::size_t j = 0; j < q; ++j) {
      const T d = x(i, j) - mean;
      var += d * d;
    }
    var /= T(q);
    rstd[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < q; ++j) {
      xhat[i * q + j] = (x(i, j) - mean) * rstd[i];
      out(i, j) = xhat[i * q + j] * gamma[j] + beta[j];
    }
  }

  Tape<T>* tape = find_tape({&x, &gamma, &beta});
  if (!tape) return out;
  return tape->record(
      std::move(out), {&x, &gamma, &beta},
      [xhat = std::move(xhat), rstd = std::move(rstd), gv = gamma.values(), p, q](std::span<const T> g, auto in) {
        if (in[0]) {
          for (std::size_t i = 0; i < p; ++i) {
            T sum_d = 0, sum_dx = 0;
            for (std::size_t j = 0; j < q; ++j) {
              const T d = g[i * q + j] * gv[j];
              sum_d += d;
              sum_dx += d * xhat[i * q + j];
            }
            for (std::size_t j = 0; j < q; ++j) {
              const T d = g[i * q + j] * gv[j];
              (*in[0])[i * q + j] += rstd[i] / T(q) * (T(q) * d - sum_d - xhat[i * q + j] * sum_dx);
            }
          }
        }
        if (in[1])
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < q; ++j) (*in[1])[j] += g[i * q + j] * xhat[i * q + j];
        if (in[2])
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < q; ++j) (*in[2])[j] += g[i * q + j];
      });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total);

  Tape<T>* tape = find_tape({&x});
  if (!tape) return out;
  return tape->record(std::move(out), {&x}, [](std::span<const T> g, auto in) {
    for (auto& v : *in[0]) v += g[0];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  Tensor<T> out = x.reshaped(std::move(shape));
  Tape<T>* tape = find_tape({&x});
  if (!tape) return out;
  return tape->record(std::move(out), {&x}, [](std::span<const T> g, auto in) {
    for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
  });
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t p = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& part : parts) {
    require_matrix(part, "concat_cols");
    if (part.rows() != p) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(part.shape()));
    }
    widths.push_back(part.cols());
    total += part.cols();
  }
  Tensor<T> out({p, total});
  std::size_t offset = 0;
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < part.cols(); ++j) out(i, offset + j) = part(i, j);
    offset += part.cols();
  }

  std::vector<const Tensor<T>*> inputs;
  Tape<T>* tape = nullptr;
  for (const auto& part : parts) {
    inputs.push_back(&part);
    if (!tape && part.tape()) tape = part.tape();
  }
  if (!tape) return out;
  return tape->record(std::move(out), inputs, [widths, p, total](std::span<const T> g, auto in) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      if (in[k])
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) (*in[k])[i * widths[k] + j] += g[i * total + off + j];
      off += widths[k];
    }
  });
}

template <typename T>
Tensor<T> concat_flat(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_flat: no inputs");
  std::vector<T> data;
  std::vector<std::size_t> sizes;
  std::vector<const Tensor<T>*> inputs;
  Tape<T>* tape = nullptr;
  for (const auto& part : parts) {
    data.insert(data.end(), part.data().begin(), part.data().end());
    sizes.push_back(part.size());
    inputs.push_back(&part);
    if (!tape && part.tape()) tape = part.tape();
  }
  const std::size_t total = data.size();
  Tensor<T> out({total}, std::move(data));
  if (!tape) return out;
  return tape->record(std::move(out), inputs, [sizes](std::span<const T> g, auto in) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (in[k])
        for (std::size_t i = 0; i < sizes[k]; ++i) (*in[k])[i] += g[off + i];
      off += sizes[k];
    }
  });
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  std::vector<T> out(logits.size());
  if (logits.empty()) return out;
  const T mx = *std::max_element(logits.begin(), logits.end());
  T total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw DataError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
  const auto v = logits.data();
  const T mx = *std::max_element(v.begin(), v.end());
  T total = 0;
  for (T x : v) total += std::exp(x - mx);
  const T log_z = mx + std::log(total);
  Tensor<T> out = Tensor<T>::scalar(log_z - v[label]);

  Tape<T>* tape = find_tape({&logits});
  if (!tape) return out;
  return tape->record(std::move(out), {&logits}, [probs = softmax<T>(v), label](std::span<const T> g, auto in) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      (*in[0])[i] += g[0] * (probs[i] - (i == label ? T(1) : T(0)));
    }
  });
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
  return std::all_of(x.data().begin(), x.data().end(), [](T v) { return std::isfinite(v); });
}

#define ALIGNVE_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> concat_cols(std::span<const Tensor<T>>);                                \
  template Tensor<T> concat_flat(std::span<const Tensor<T>>);                                \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::size_t);                           \
  template std::vector<T> softmax(std::span<const T>);                                       \
  template bool all_finite(const Tensor<T>&);

ALIGNVE_INSTANTIATE_OPS(float)
ALIGNVE_INSTANTIATE_OPS(double)

}  // namespace alignve
