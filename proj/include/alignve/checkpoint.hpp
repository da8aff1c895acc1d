#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "alignve/trainer.hpp"

namespace alignve {

// AVCK container, little-endian:
//   "AVCK" u32 version=1 u64 config_digest
//   u32 count, then per parameter: u32 name_len, name (UTF-8), u32 rank,
//     rank x u32 dims, f32 data
//   optimizer: u8 kind (0 sgd, 1 adam), u64 step, u32 count, entries as above
//     named "velocity/<param>" or "adam_m/<param>", "adam_v/<param>"
//   scheduler: f64 best_val_loss, u32 epochs_since_improvement, f64 current_lr
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg);

// Validates every parameter against `cfg` (ShapeError on mismatch) and the
// stored digest (ConfigError), and rejects malformed bytes with DataError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& cfg);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const ModelConfig& cfg);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg);

}  // namespace alignve
