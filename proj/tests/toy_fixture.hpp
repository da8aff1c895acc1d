#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "alignve/dataset.hpp"
#include "alignve/embeddings.hpp"
#include "alignve/toy_data.hpp"
#include "alignve/trainer.hpp"

namespace fixture {

struct ToySplits {
  alignve::EmbeddingTable table;
  alignve::Dataset train, val, test;
  alignve::ToyDatasetFiles files;
};

// Removes this process's scratch directories at exit.
struct ScratchRegistry {
  std::vector<std::filesystem::path> dirs;
  ~ScratchRegistry() {
    std::error_code ec;
    for (const auto& d : dirs) std::filesystem::remove_all(d, ec);
  }
};
inline ScratchRegistry scratch_registry;

inline std::filesystem::path scratch_dir(const std::string& name) {
  // Per-process, since ctest may run cases of one suite concurrently.
  const auto dir =
      std::filesystem::temp_directory_path() / ("alignve_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  scratch_registry.dirs.push_back(dir);
  return dir;
}

inline ToySplits load_toy(const alignve::ToyConfig& cfg, const std::filesystem::path& dir,
                          std::size_t max_tokens = 64) {
  ToySplits s;
  s.files = alignve::generate_toy_dataset(cfg, dir);
  s.table = alignve::load_embeddings(s.files.embeddings).table;
  s.train = alignve::load_dataset(s.files.train, cfg.premise_dim, max_tokens);
  s.val = alignve::load_dataset(s.files.val, cfg.premise_dim, max_tokens);
  s.test = alignve::load_dataset(s.files.test, cfg.premise_dim, max_tokens);
  return s;
}

// The small architecture the toy task is tuned for.
inline alignve::TrainConfig toy_train_config(const alignve::ToyConfig& toy) {
  alignve::TrainConfig cfg;
  cfg.model.encoder = {.d = 16, .heads = 2, .layers = 1};
  cfg.model.premise_dim = toy.premise_dim;
  cfg.model.embed_dim = toy.embed_dim;
  cfg.lr = 1e-3;
  cfg.batch_size = 64;
  cfg.max_epochs = 50;
  return cfg;
}

}  // namespace fixture
