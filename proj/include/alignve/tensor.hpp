#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alignve/error.hpp"

namespace alignve {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
class Tape;

// Dense row-major array. A tensor produced by a recorded operation (or
// registered through Tape::variable) carries a link to its tape node; the
// tape must outlive every tensor that refers to it.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : data_(1, T(0)) {}

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_dims();
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    std::vector<T> data;
    const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& row : rows) {
      if (row.size() != cols) throw ShapeError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
  }

  static Tensor vector(std::initializer_list<T> values) {
    return Tensor({values.size()}, std::vector<T>(values));
  }

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  bool requires_grad() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  std::size_t node() const { return node_; }

  // Copy of the values without tape linkage.
  Tensor detach() const { return Tensor(shape_, data_); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

 private:
  friend class Tape<T>;

  void check_dims() const {
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
  Tape<T>* tape_ = nullptr;
  std::size_t node_ = 0;
};

template <typename T>
class Gradients;

// Record of primitive applications in creation order, which is a valid
// topological order because an entry can only consume earlier outputs.
template <typename T>
class Tape {
 public:
  using Buffer = std::vector<T>;
  // Receives the gradient of this entry's output and one accumulation buffer
  // per recorded input (nullptr when that input is untracked). Buffers are
  // zero-initialized on first use; implementations must add, not assign.
  using BackwardFn = std::function<void(std::span<const T> grad_out, std::span<Buffer* const> grad_in)>;

  static constexpr std::size_t kUntracked = std::numeric_limits<std::size_t>::max();

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf that requires a gradient.
  Tensor<T> variable(Tensor<T> value) {
    Node node;
    node.shape = value.shape();
    nodes_.push_back(std::move(node));
    value.tape_ = this;
    value.node_ = nodes_.size() - 1;
    return value;
  }

  // Links `output` to the tape when at least one input is tracked here.
  // Untracked inputs are recorded as constants.
  Tensor<T> record(Tensor<T> output, std::initializer_list<const Tensor<T>*> inputs, BackwardFn fn) {
    return record(std::move(output), std::span<const Tensor<T>* const>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }

  Tensor<T> record(Tensor<T> output, std::span<const Tensor<T>* const> inputs, BackwardFn fn) {
    Node node;
    node.shape = output.shape();
    node.leaf = false;
    node.backward = std::move(fn);
    for (const Tensor<T>* in : inputs) {
      if (in->tape_ == nullptr) {
        node.inputs.push_back(kUntracked);
      } else if (in->tape_ != this) {
        throw Error("operation mixes tensors from different tapes");
      } else {
        node.inputs.push_back(in->node_);
      }
    }
    nodes_.push_back(std::move(node));
    output.tape_ = this;
    output.node_ = nodes_.size() - 1;
    return output;
  }

  std::size_t size() const { return nodes_.size(); }

  Gradients<T> backward(const Tensor<T>& loss) const;

 private:
  friend class Gradients<T>;

  struct Node {
    Shape shape;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool leaf = true;
  };

  std::vector<Node> nodes_;
};

// Result of Tape::backward. Gradients are retained for leaves only; a leaf
// never reached from the loss reads back as zeros of its shape.
template <typename T>
class Gradients {
 public:
  Tensor<T> of(const Tensor<T>& t) const {
    check(t);
    const auto& buf = grads_[t.node()];
    if (buf.empty()) return Tensor<T>(t.shape());
    return Tensor<T>(t.shape(), buf);
  }

  // Adds this tensor's gradient into `out` (sized like the tensor).
  void accumulate_into(const Tensor<T>& t, std::span<T> out) const {
    check(t);
    const auto& buf = grads_[t.node()];
    if (buf.empty()) return;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += buf[i];
  }

 private:
  friend class Tape<T>;

  void check(const Tensor<T>& t) const {
    if (t.tape() != tape_) throw Error("tensor is not recorded on the differentiated tape");
    if (!tape_->nodes_[t.node()].leaf) throw Error("gradients are retained for leaf tensors only");
  }

  const Tape<T>* tape_ = nullptr;
  std::vector<std::vector<T>> grads_;
};

template <typename T>
Gradients<T> Tape<T>::backward(const Tensor<T>& loss) const {
  if (loss.tape() != this) throw Error("backward: loss is detached from this tape");
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));

  Gradients<T> result;
  result.tape_ = this;
  result.grads_.resize(nodes_.size());
  result.grads_[loss.node()].assign(1, T(1));

  std::vector<Buffer*> in_bufs;
  for (std::size_t k = loss.node() + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (node.leaf || result.grads_[k].empty()) continue;
    in_bufs.clear();
    for (std::size_t in : node.inputs) {
      if (in == kUntracked) {
        in_bufs.push_back(nullptr);
        continue;
      }
      auto& buf = result.grads_[in];
      if (buf.empty()) buf.assign(shape_size(nodes_[in].shape), T(0));
      in_bufs.push_back(&buf);
    }
    node.backward(result.grads_[k], in_bufs);
    // Interior gradients are not needed once propagated.
    std::vector<T>().swap(result.grads_[k]);
  }
  return result;
}

}  // namespace alignve
