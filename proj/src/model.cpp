#include "alignve/model.hpp"

#include <algorithm>
#include <sstream>

#include "alignve/visual_encoder.hpp"

namespace alignve {

std::string_view label_name(std::size_t label) {
  switch (label) {
    case entailment:
      return "entailment";
    case neutral:
      return "neutral";
    case contradiction:
      return "contradiction";
    default:
      throw DataError("label index " + std::to_string(label) + " out of range");
  }
}

std::size_t parse_label(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (label_name(i) == name) return i;
  }
  throw DataError("unknown label '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  encoder.validate();
  pool.validate();
  if (premise_dim == 0) throw ConfigError("premise feature dimension must be positive");
  if (embed_dim == 0 || embed_dim % 2 != 0) throw ConfigError("embedding dimension must be positive and even");
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
}

std::uint64_t ModelConfig::digest() const {
  std::ostringstream os;
  os << "d=" << encoder.d << ";heads=" << encoder.heads << ";layers=" << encoder.layers << ";eps=" << encoder.eps
     << ";scale=" << (encoder.scale == AttentionScale::per_head ? "per_head" : "pre_projection")
     << ";d_p=" << premise_dim << ";d_h=" << embed_dim << ";pool=" << to_string(pool) << ";max_tokens=" << max_tokens;
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<ParamSpec> model_param_specs(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> specs;
  append_attenc_specs(specs, "premise", cfg.premise_dim, cfg.encoder);
  append_attenc_specs(specs, "hypothesis", cfg.embed_dim, cfg.encoder);
  append_classifier_specs(specs);
  return specs;
}

ParamStore<float> init_model_params(const ModelConfig& cfg, Rng& rng) {
  return initialize_params(model_param_specs(cfg), rng);
}

template <typename T>
ModelParams<T> ModelParams<T>::from(const ParamSet<T>& set, const ModelConfig& cfg) {
  return {AttEncParams<T>::from(set, "premise", cfg.encoder), AttEncParams<T>::from(set, "hypothesis", cfg.encoder),
          ClassifierParams<T>::from(set)};
}

template <typename T>
ForwardResult<T> forward_prepared(const Tensor<T>& premise, const std::vector<std::string>& tokens,
                                  const EmbeddingTable& table, const ModelParams<T>& params, const ModelConfig& cfg) {
  if (table.dim() != cfg.embed_dim) {
    throw ShapeError("embedding table dim " + std::to_string(table.dim()) + " does not match configured " +
                     std::to_string(cfg.embed_dim));
  }
  const Tensor<T> p = encode_premise(premise, params.premise, cfg.encoder);
  const Tensor<T> h = encode_tokens(tokens, table, params.hypothesis, cfg.encoder);
  Tensor<T> alignment = alignment_matrix(p, h);
  Tensor<T> logits = classify_logits(alignment, params.classifier, cfg.pool);
  return {std::move(logits), std::move(alignment)};
}

std::size_t Prediction::label() const {
  return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) -
                                  probabilities.begin());
}

Prediction forward(const PremiseFeatures& premise, std::string_view hypothesis, const EmbeddingTable& table,
                   const ParamStore<float>& params, const ModelConfig& cfg) {
  Prediction pred;
  pred.tokens = tokenize(hypothesis, cfg.max_tokens);
  const Tensor<float> features = prepare_premise(premise, cfg.premise_dim);
  const ParamSet<float> set = params.bind(nullptr);
  const auto result = forward_prepared(features, pred.tokens, table, ModelParams<float>::from(set, cfg), cfg);
  pred.probabilities = softmax<float>(result.logits.data());
  pred.alignment = result.alignment;
  return pred;
}

GradCheckReport model_gradient_check(const ModelConfig& cfg, std::size_t tokens, std::uint64_t seed, double h) {
  cfg.validate();
  if (tokens == 0) throw ConfigError("gradient check needs at least one token");
  Rng rng(seed);
  ParamStore<double> params = init_model_params(cfg, rng).cast<double>();

  EmbeddingTable table(cfg.embed_dim);
  std::vector<std::string> words;
  std::vector<float> row(cfg.embed_dim);
  for (std::size_t j = 0; j < tokens; ++j) {
    for (auto& v : row) v = static_cast<float>(rng.normal());
    words.push_back("w" + std::to_string(j));
    table.insert(words.back(), row);
  }
  Tensor<double> premise({kPremiseRegions, cfg.premise_dim});
  for (auto& v : premise.data()) v = rng.normal();
  const std::size_t label = rng.below(kNumClasses);

  const ScalarFn loss = [&](const ParamSet<double>& set) {
    const auto result = forward_prepared(premise, words, table, ModelParams<double>::from(set, cfg), cfg);
    return cross_entropy(result.logits, label);
  };
  return finite_difference_report(loss, params, h);
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ForwardResult<float> forward_prepared(const Tensor<float>&, const std::vector<std::string>&,
                                               const EmbeddingTable&, const ModelParams<float>&, const ModelConfig&);
template ForwardResult<double> forward_prepared(const Tensor<double>&, const std::vector<std::string>&,
                                                const EmbeddingTable&, const ModelParams<double>&, const ModelConfig&);

}  // namespace alignve
