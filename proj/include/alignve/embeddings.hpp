#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace alignve {

// Frozen word-vector table. Never part of a ParamStore, so no optimizer can
// reach it; the only mutation path is building it before use.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  // Returns false (and keeps the existing row) when `token` is already present.
  bool insert(const std::string& token, std::span<const float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  std::optional<std::size_t> index(const std::string& token) const;
  std::span<const float> row(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  const std::string& token(std::size_t i) const { return tokens_[i]; }
  std::span<const float> raw() const { return vectors_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;
  std::vector<float> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// GloVe text layout: `token v1 ... vd` per line, single-space separated.
// The dimension comes from the first line. Duplicate tokens keep the first
// occurrence and add a warning.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path);
EmbeddingLoadResult parse_embeddings(const std::string& text);

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

}  // namespace alignve
