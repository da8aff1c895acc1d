#include "alignve/text_encoder.hpp"

#include <cctype>
#include <cmath>

namespace alignve {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be positive");
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size() && tokens.size() < max_len) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (i == j) break;

    std::string word(text.substr(i, j - i));
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::size_t lo = 0, hi = word.size();
    while (lo < hi && is_punct(word[lo])) ++lo;
    while (hi > lo && is_punct(word[hi - 1])) --hi;

    for (std::size_t k = 0; k < lo; ++k) tokens.emplace_back(1, word[k]);
    if (hi > lo) tokens.push_back(word.substr(lo, hi - lo));
    for (std::size_t k = hi; k < word.size(); ++k) tokens.emplace_back(1, word[k]);
    i = j;
  }
  if (tokens.empty()) throw DataError("empty hypothesis");
  if (tokens.size() > max_len) tokens.resize(max_len);
  return tokens;
}

template <typename T>
Tensor<T> embed(const std::vector<std::string>& tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw DataError("embed: no tokens");
  if (table.dim() == 0) throw ConfigError("embed: empty embedding table");
  const std::size_t d = table.dim();
  Tensor<T> out({tokens.size(), d});
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const auto idx = table.index(tokens[j]);
    if (!idx) continue;
    const auto row = table.row(*idx);
    for (std::size_t k = 0; k < d; ++k) out(j, k) = static_cast<T>(row[k]);
  }
  return out;
}

template <typename T>
Tensor<T> positional_encoding(std::size_t n, std::size_t d) {
  if (d == 0 || d % 2 != 0) throw ConfigError("positional encoding needs an even dimension, got " + std::to_string(d));
  Tensor<T> pe({n, d});
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
      pe(pos, 2 * i) = static_cast<T>(std::sin(angle));
      pe(pos, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
Tensor<T> encode_tokens(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                        const AttEncParams<T>& params, const EncoderConfig& cfg) {
  const Tensor<T> embedded = embed<T>(tokens, table);
  const Tensor<T> with_position = add(embedded, positional_encoding<T>(tokens.size(), table.dim()));
  return attenc_forward(with_position, params, cfg);
}

template <typename T>
Tensor<T> encode_hypothesis(std::string_view text, const EmbeddingTable& table, const AttEncParams<T>& params,
                            const EncoderConfig& cfg, std::size_t max_len) {
  return encode_tokens(tokenize(text, max_len), table, params, cfg);
}

#define ALIGNVE_INSTANTIATE_TEXT(T)                                                                          \
  template Tensor<T> embed<T>(const std::vector<std::string>&, const EmbeddingTable&);                      \
  template Tensor<T> positional_encoding<T>(std::size_t, std::size_t);                                      \
  template Tensor<T> encode_tokens(const std::vector<std::string>&, const EmbeddingTable&,                  \
                                   const AttEncParams<T>&, const EncoderConfig&);                           \
  template Tensor<T> encode_hypothesis(std::string_view, const EmbeddingTable&, const AttEncParams<T>&,     \
                                       const EncoderConfig&, std::size_t);

ALIGNVE_INSTANTIATE_TEXT(float)
ALIGNVE_INSTANTIATE_TEXT(double)

}  // namespace alignve
