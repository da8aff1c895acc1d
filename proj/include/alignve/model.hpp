#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "alignve/alignment_head.hpp"
#include "alignve/attention_encoder.hpp"
#include "alignve/embeddings.hpp"
#include "alignve/features.hpp"
#include "alignve/gradcheck.hpp"
#include "alignve/rng.hpp"
#include "alignve/text_encoder.hpp"

namespace alignve {

enum Label : std::size_t { entailment = 0, neutral = 1, contradiction = 2 };

std::string_view label_name(std::size_t label);
// Throws DataError for anything but the three class names.
std::size_t parse_label(std::string_view name);

// Architecture description; everything needed to shape the parameters.
struct ModelConfig {
  EncoderConfig encoder;
  std::size_t premise_dim = 2048;  // d_p
  std::size_t embed_dim = 300;     // d_h
  PoolShape pool;
  std::size_t max_tokens = kDefaultMaxTokens;

  void validate() const;
  // Stable hash of the architecture fields, stored in checkpoints.
  std::uint64_t digest() const;
};

// Parameter layout: premise.*, hypothesis.*, classifier.* in that order.
std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg);
ParamStore<float> init_model_params(const ModelConfig& cfg, Rng& rng);

template <typename T>
struct ModelParams {
  AttEncParams<T> premise;
  AttEncParams<T> hypothesis;
  ClassifierParams<T> classifier;

  static ModelParams from(const ParamSet<T>& set, const ModelConfig& cfg);
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;     // [3]
  Tensor<T> alignment;  // [36 x n]
};

// Prepared 36 x d_p premise and tokenized hypothesis to class logits.
template <typename T>
ForwardResult<T> forward_prepared(const Tensor<T>& premise, const std::vector<std::string>& tokens,
                                  const EmbeddingTable& table, const ModelParams<T>& params, const ModelConfig& cfg);

struct Prediction {
  std::vector<float> probabilities;  // [3], sums to 1
  Tensor<float> alignment;
  std::vector<std::string> tokens;
  std::size_t label() const;
};

// End-to-end inference from raw premise features and hypothesis text.
Prediction forward(const PremiseFeatures& premise, std::string_view hypothesis, const EmbeddingTable& table,
                   const ParamStore<float>& params, const ModelConfig& cfg);

// Finite-difference check of the whole model in 64-bit: Glorot-initialised
// parameters, one random 36 x d_p premise, `tokens` random in-vocabulary
// words and a cross-entropy loss against a random label.
GradCheckReport model_gradient_check(const ModelConfig& cfg, std::size_t tokens, std::uint64_t seed,
                                     double h = 1e-5);

}  // namespace alignve
