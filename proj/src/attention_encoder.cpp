#include "alignve/attention_encoder.hpp"

#include <cmath>

namespace alignve {

void EncoderConfig::validate() const {
  if (d == 0 || heads == 0 || layers == 0) throw ConfigError("encoder d, heads and layers must be positive");
  if (d % heads != 0) {
    throw ConfigError("encoder d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (!(eps > 0.0)) throw ConfigError("layer-norm eps must be positive");
}

namespace {

std::string layer_prefix(const std::string& prefix, std::size_t layer) {
  return prefix + ".layer" + std::to_string(layer);
}

}  // namespace

void append_attenc_specs(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t d_in,
                         const EncoderConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d, dk = cfg.head_dim();
  specs.push_back({prefix + ".input.weight", {d_in, d}, Init::glorot_uniform});
  specs.push_back({prefix + ".input.bias", {d}, Init::zeros});
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = layer_prefix(prefix, l);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string hp = lp + ".head" + std::to_string(h);
      specs.push_back({hp + ".query", {d, dk}, Init::glorot_uniform});
      specs.push_back({hp + ".key", {d, dk}, Init::glorot_uniform});
      specs.push_back({hp + ".value", {d, dk}, Init::glorot_uniform});
    }
    specs.push_back({lp + ".output", {d, d}, Init::glorot_uniform});
    specs.push_back({lp + ".ffn.weight", {d, d}, Init::glorot_uniform});
    specs.push_back({lp + ".ffn.bias", {d}, Init::zeros});
    specs.push_back({lp + ".norm1.gamma", {d}, Init::ones});
    specs.push_back({lp + ".norm1.beta", {d}, Init::zeros});
    specs.push_back({lp + ".norm2.gamma", {d}, Init::ones});
    specs.push_back({lp + ".norm2.beta", {d}, Init::zeros});
  }
}

template <typename T>
AttEncParams<T> AttEncParams<T>::from(const ParamSet<T>& set, const std::string& prefix, const EncoderConfig& cfg) {
  AttEncParams p;
  p.input_weight = &set.get(prefix + ".input.weight");
  p.input_bias = &set.get(prefix + ".input.bias");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = layer_prefix(prefix, l);
    AttEncLayerParams<T> layer;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string hp = lp + ".head" + std::to_string(h);
      layer.query.push_back(&set.get(hp + ".query"));
      layer.key.push_back(&set.get(hp + ".key"));
      layer.value.push_back(&set.get(hp + ".value"));
    }
    layer.output = &set.get(lp + ".output");
    layer.ffn_weight = &set.get(lp + ".ffn.weight");
    layer.ffn_bias = &set.get(lp + ".ffn.bias");
    layer.norm1_gamma = &set.get(lp + ".norm1.gamma");
    layer.norm1_beta = &set.get(lp + ".norm1.beta");
    layer.norm2_gamma = &set.get(lp + ".norm2.gamma");
    layer.norm2_beta = &set.get(lp + ".norm2.beta");
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename T>
Tensor<T> sdp_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, T divisor) {
  if (!(divisor > T(0))) throw ConfigError("attention scale must be positive");
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.cols() != k.cols() || k.rows() != v.rows()) {
    throw ShapeError("sdp_attention: incompatible shapes Q" + shape_str(q.shape()) + " K" + shape_str(k.shape()) +
                     " V" + shape_str(v.shape()));
  }
  const Tensor<T> scores = scale(matmul(q, transpose(k)), T(1) / divisor);
  return matmul(softmax_rows(scores), v);
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttEncLayerParams<T>& layer, T divisor) {
  if (layer.query.empty()) throw ShapeError("multi_head_attention: no heads");
  if (x.rank() != 2 || x.cols() != layer.query[0]->rows()) {
    throw ShapeError("multi_head_attention: input " + shape_str(x.shape()) + " does not match projection " +
                     shape_str(layer.query[0]->shape()));
  }
  std::vector<Tensor<T>> heads;
  heads.reserve(layer.query.size());
  for (std::size_t h = 0; h < layer.query.size(); ++h) {
    heads.push_back(sdp_attention(matmul(x, *layer.query[h]), matmul(x, *layer.key[h]), matmul(x, *layer.value[h]),
                                  divisor));
  }
  return matmul(concat_cols<T>(heads), *layer.output);
}

template <typename T>
Tensor<T> attenc_forward(const Tensor<T>& input, const AttEncParams<T>& params, const EncoderConfig& cfg) {
  cfg.validate();
  if (input.rank() != 2 || input.cols() != params.input_weight->rows()) {
    throw ShapeError("attenc_forward: input " + shape_str(input.shape()) + " does not match input projection " +
                     shape_str(params.input_weight->shape()));
  }
  const double divisor = cfg.scale == AttentionScale::per_head ? static_cast<double>(cfg.head_dim())
                                                               : static_cast<double>(input.cols());
  const T att_divisor = static_cast<T>(std::sqrt(divisor));
  const T eps = static_cast<T>(cfg.eps);

  Tensor<T> x = add_row_bias(matmul(input, *params.input_weight), *params.input_bias);
  for (const auto& layer : params.layers) {
    const Tensor<T> att = multi_head_attention(x, layer, att_divisor);
    const Tensor<T> inner = layer_norm(add(att, x), *layer.norm1_gamma, *layer.norm1_beta, eps);
    const Tensor<T> ffn = relu(add_row_bias(matmul(inner, *layer.ffn_weight), *layer.ffn_bias));
    x = layer_norm(add(ffn, att), *layer.norm2_gamma, *layer.norm2_beta, eps);
  }
  if (!all_finite(x)) throw NumericalError("attention encoder produced non-finite output");
  return x;
}

template struct AttEncParams<float>;
template struct AttEncParams<double>;
template Tensor<float> sdp_attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, float);
template Tensor<double> sdp_attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, double);
template Tensor<float> multi_head_attention(const Tensor<float>&, const AttEncLayerParams<float>&, float);
template Tensor<double> multi_head_attention(const Tensor<double>&, const AttEncLayerParams<double>&, double);
template Tensor<float> attenc_forward(const Tensor<float>&, const AttEncParams<float>&, const EncoderConfig&);
template Tensor<double> attenc_forward(const Tensor<double>&, const AttEncParams<double>&, const EncoderConfig&);

}  // namespace alignve
