#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "alignve/tensor.hpp"

namespace alignve {

struct ManifestEntry {
  std::string id;
  std::filesystem::path feature_file;  // resolved against the manifest directory
  std::string hypothesis;
  std::size_t label = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> warnings;
};

// JSON lines, one {"id", "feature_file", "hypothesis", "label"} object per
// line. Relative feature paths are resolved against the manifest's
// directory. Rejects unknown labels, duplicate ids and missing files; an
// empty manifest loads with a warning.
Manifest read_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir, bool check_files = true);

// Writes feature paths relative to the manifest directory when possible.
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// One training/evaluation pair with the premise already reduced to 36 x d_p.
struct Example {
  std::string id;
  Tensor<float> premise;
  std::vector<std::string> tokens;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Example> examples;
  std::vector<std::string> warnings;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  std::array<std::size_t, 3> class_histogram() const;
};

// Reads the manifest and every referenced feature file, preparing premises
// for `premise_dim` and tokenizing hypotheses to at most `max_tokens`.
Dataset load_dataset(const std::filesystem::path& manifest, std::size_t premise_dim, std::size_t max_tokens);

}  // namespace alignve
