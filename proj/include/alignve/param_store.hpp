#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "alignve/tensor.hpp"

namespace alignve {

template <typename T>
class ParamSet;

// Named trainable tensors, iterated in insertion order.
template <typename T>
class ParamStore {
 public:
  void add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, tensors_.size());
    names_.push_back(std::move(name));
    tensors_.push_back(value.detach());
  }

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  const std::string& name(std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  const Tensor<T>& at(std::size_t i) const { return tensors_[i]; }
  Tensor<T>& at(std::size_t i) { return tensors_[i]; }

  const Tensor<T>& get(std::string_view name) const { return tensors_[find(name)]; }
  Tensor<T>& get(std::string_view name) { return tensors_[find(name)]; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  // Registers every parameter as a leaf on `tape`, or returns plain copies
  // when `tape` is null.
  ParamSet<T> bind(Tape<T>* tape) const;

 private:
  std::size_t find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ShapeError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

// Parameters prepared for one forward pass; same order as the store.
template <typename T>
class ParamSet {
 public:
  const Tensor<T>& get(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ShapeError("unknown parameter '" + std::string(name) + "'");
    return tensors_[it->second];
  }

  std::size_t size() const { return tensors_.size(); }
  const Tensor<T>& at(std::size_t i) const { return tensors_[i]; }

  // Gradient buffers aligned with the store order.
  std::vector<std::vector<T>> gradients(const Gradients<T>& grads) const {
    std::vector<std::vector<T>> out;
    out.reserve(tensors_.size());
    for (const auto& t : tensors_) {
      out.emplace_back(t.size(), T(0));
      grads.accumulate_into(t, out.back());
    }
    return out;
  }

 private:
  friend class ParamStore<T>;
  std::vector<Tensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

template <typename T>
ParamSet<T> ParamStore<T>::bind(Tape<T>* tape) const {
  ParamSet<T> set;
  set.index_ = index_;
  set.tensors_.reserve(tensors_.size());
  for (const auto& t : tensors_) set.tensors_.push_back(tape ? tape->variable(t) : t);
  return set;
}

}  // namespace alignve
