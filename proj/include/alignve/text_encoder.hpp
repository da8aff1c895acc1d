#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "alignve/attention_encoder.hpp"
#include "alignve/embeddings.hpp"

namespace alignve {

inline constexpr std::size_t kDefaultMaxTokens = 64;

// Lowercases, splits on whitespace, and peels leading/trailing ASCII
// punctuation off each word into single-character tokens. Keeps at most
// `max_len` tokens. Throws DataError for blank text.
std::vector<std::string> tokenize(std::string_view text, std::size_t max_len = kDefaultMaxTokens);

// Row j is the table vector of token j; unknown tokens map to zeros. The
// result is never tape-linked, so no gradient reaches the table.
template <typename T>
Tensor<T> embed(const std::vector<std::string>& tokens, const EmbeddingTable& table);

// PE[pos][2i] = sin(pos / 10000^(2i/d)), PE[pos][2i+1] = cos(same).
template <typename T>
Tensor<T> positional_encoding(std::size_t n, std::size_t d);

template <typename T>
Tensor<T> encode_tokens(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                        const AttEncParams<T>& params, const EncoderConfig& cfg);

template <typename T>
Tensor<T> encode_hypothesis(std::string_view text, const EmbeddingTable& table, const AttEncParams<T>& params,
                            const EncoderConfig& cfg, std::size_t max_len = kDefaultMaxTokens);

}  // namespace alignve
