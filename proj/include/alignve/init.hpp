#pragma once

#include <string>
#include <vector>

#include "alignve/param_store.hpp"
#include "alignve/rng.hpp"

namespace alignve {

enum class Init { glorot_uniform, zeros, ones };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init = Init::zeros;
};

// Draws every parameter in spec order from `rng`. Glorot limits use
// fan_in = shape[0], fan_out = shape[1].
ParamStore<float> initialize_params(const std::vector<ParamSpec>& specs, Rng& rng);

// Throws ShapeError naming the first parameter whose presence or shape
// differs from `specs`.
template <typename T>
void validate_params(const ParamStore<T>& store, const std::vector<ParamSpec>& specs);

}  // namespace alignve
