#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace alignve {

// Backbone feature map, channel-last: values[(y * width + x) * channels + c].
struct GridFeatures {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;
};

// Detector regions: one feature row, one score and optionally one pixel box
// (x1, y1, x2, y2) per region.
struct RoiFeatures {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> scores;
  std::vector<float> boxes;  // empty, or count * 4
  std::vector<float> values;

  bool has_boxes() const { return !boxes.empty(); }
};

using PremiseFeatures = std::variant<GridFeatures, RoiFeatures>;

std::size_t feature_dim(const PremiseFeatures& f);

// AVEF container, little-endian:
//   "AVEF" u32 version=1 u8 kind(0 grid, 1 roi)
//   grid: u32 H, u32 W, u32 C, H*W*C f32
//   roi:  u32 k, u32 C, u8 has_boxes, k f32 scores, [k*4 f32 boxes], k*C f32
std::vector<std::uint8_t> encode_features(const PremiseFeatures& f);
PremiseFeatures decode_features(std::span<const std::uint8_t> bytes);

PremiseFeatures read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const PremiseFeatures& f);

}  // namespace alignve
