#pragma once

#include <string>
#include <vector>

#include "alignve/init.hpp"
#include "alignve/ops.hpp"
#include "alignve/param_store.hpp"

namespace alignve {

// Divisor applied to Q K^T. `per_head` uses sqrt(d / heads); `pre_projection`
// uses sqrt of the encoder's input feature dimension.
enum class AttentionScale { per_head, pre_projection };

struct EncoderConfig {
  std::size_t d = 300;
  std::size_t heads = 6;
  std::size_t layers = 2;
  double eps = 1e-5;
  AttentionScale scale = AttentionScale::per_head;

  std::size_t head_dim() const { return d / heads; }
  void validate() const;
};

// Non-owning view of one encoder layer's tensors inside a ParamSet.
template <typename T>
struct AttEncLayerParams {
  std::vector<const Tensor<T>*> query;
  std::vector<const Tensor<T>*> key;
  std::vector<const Tensor<T>*> value;
  const Tensor<T>* output = nullptr;
  const Tensor<T>* ffn_weight = nullptr;
  const Tensor<T>* ffn_bias = nullptr;
  const Tensor<T>* norm1_gamma = nullptr;
  const Tensor<T>* norm1_beta = nullptr;
  const Tensor<T>* norm2_gamma = nullptr;
  const Tensor<T>* norm2_beta = nullptr;
};

template <typename T>
struct AttEncParams {
  const Tensor<T>* input_weight = nullptr;
  const Tensor<T>* input_bias = nullptr;
  std::vector<AttEncLayerParams<T>> layers;

  // Resolves `<prefix>.*` entries; `set` must outlive the result.
  static AttEncParams from(const ParamSet<T>& set, const std::string& prefix, const EncoderConfig& cfg);
};

// Shapes and initializers of one encoder under `prefix`, in draw order.
void append_attenc_specs(std::vector<ParamSpec>& specs, const std::string& prefix, std::size_t d_in,
                         const EncoderConfig& cfg);

// softmax_rows(Q K^T / divisor) V
template <typename T>
Tensor<T> sdp_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, T divisor);

// concat(head_1 .. head_h) W^O, head_i = sdp_attention(X Wq_i, X Wk_i, X Wv_i).
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttEncLayerParams<T>& layer, T divisor);

// Projects the input to d once, then applies each layer as
//   F_att = MHA(X);  X <- LN2(ReLU(LN1(F_att + X) W_f + b_f) + F_att)
template <typename T>
Tensor<T> attenc_forward(const Tensor<T>& input, const AttEncParams<T>& params, const EncoderConfig& cfg);

}  // namespace alignve
