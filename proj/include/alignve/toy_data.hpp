#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alignve/embeddings.hpp"
#include "alignve/tensor.hpp"

namespace alignve {

// Synthetic entailment data with a known answer. Every example picks a
// concept c (unit length, living in the first embed_dim coordinates of the
// premise space) and writes several premise rows as c + noise; the remaining
// rows are pure noise. Each hypothesis token is a synonym whose embedding is
// c + noise (entailment), -c + noise (contradiction) or +-c' + noise for an
// orthogonal concept c' (neutral).
struct ToyConfig {
  std::size_t per_class = 100;
  std::size_t premise_dim = 32;
  std::size_t embed_dim = 16;
  double noise = 0.1;
  std::size_t concepts = 2;  // orthonormal concept families
  std::size_t synonyms = 3;  // words per concept and per antonym
  std::size_t regions = 36;
  std::size_t min_concept_rows = 8;
  std::size_t max_concept_rows = 12;
  std::size_t max_hypothesis_tokens = 3;
  bool roi = false;  // write RoI files with scores and boxes instead of 6x6 grids
  std::uint64_t seed = 12345;

  void validate() const;
};

struct ToyDatasetFiles {
  std::filesystem::path embeddings;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;
};

// Writes embeddings.txt, features/<id>.avef and train/val/test.jsonl with an
// 80/10/10 split inside every class.
ToyDatasetFiles generate_toy_dataset(const ToyConfig& cfg, const std::filesystem::path& out_dir);

// Reference classifier over raw inputs: for every premise row, the mean dot
// product of premise[i, :d_h] with the token embeddings; the row of largest
// magnitude decides (above +threshold entailment, below -threshold
// contradiction, otherwise neutral). Unknown tokens are skipped.
std::size_t toy_oracle_label(const Tensor<float>& premise, const std::vector<std::string>& tokens,
                             const EmbeddingTable& table, double threshold = 0.5);

}  // namespace alignve
