#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "alignve/toy_data.hpp"
#include "alignve/trainer.hpp"

namespace alignve {

// Everything a run needs: training hyperparameters, model shape and the
// data locations. Relative paths in a config file resolve against the file.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path embeddings;
  std::filesystem::path train_manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path out_dir = "run";
  ToyConfig toy;
};

// Unknown keys and wrongly typed values are ConfigErrors.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig read_run_config(const std::filesystem::path& path);
// Pretty-printed JSON with absolute paths; parse_run_config reads it back.
std::string dump_run_config(const RunConfig& cfg);

std::string_view to_string(AttentionScale scale);
AttentionScale parse_attention_scale(std::string_view name);

// Worker count from ALIGNVE_THREADS (default 1).
std::size_t threads_from_env();

// Exit codes: 0 success, 1 usage, 2 data/config/shape error, 3 numerical
// failure (non-finite loss or a failed gradient check).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace alignve
