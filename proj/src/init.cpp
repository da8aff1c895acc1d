#include "alignve/init.hpp"

#include <cmath>

namespace alignve {

ParamStore<float> initialize_params(const std::vector<ParamSpec>& specs, Rng& rng) {
  ParamStore<float> store;
  for (const auto& spec : specs) {
    Tensor<float> t(spec.shape);
    switch (spec.init) {
      case Init::zeros:
        break;
      case Init::ones:
        for (auto& v : t.data()) v = 1.0f;
        break;
      case Init::glorot_uniform: {
        if (spec.shape.size() != 2) throw ShapeError("glorot init needs a matrix: " + spec.name);
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
        for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-limit, limit));
        break;
      }
    }
    store.add(spec.name, std::move(t));
  }
  return store;
}

template <typename T>
void validate_params(const ParamStore<T>& store, const std::vector<ParamSpec>& specs) {
  if (store.size() != specs.size()) {
    throw ShapeError("parameter count " + std::to_string(store.size()) + " does not match configuration (" +
                     std::to_string(specs.size()) + ")");
  }
  for (const auto& spec : specs) {
    if (!store.contains(spec.name)) throw ShapeError("missing parameter '" + spec.name + "'");
    const auto& shape = store.get(spec.name).shape();
    if (shape != spec.shape) {
      throw ShapeError("parameter '" + spec.name + "' has shape " + shape_str(shape) + ", configuration expects " +
                       shape_str(spec.shape));
    }
  }
}

template void validate_params(const ParamStore<float>&, const std::vector<ParamSpec>&);
template void validate_params(const ParamStore<double>&, const std::vector<ParamSpec>&);

}  // namespace alignve
