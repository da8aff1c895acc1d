#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alignve/model.hpp"

namespace alignve {

// Piecewise-linear jet map: blue (0, 0, 0.5) at t=0 to red (0.5, 0, 0) at
// t=1. t is clamped into [0, 1].
std::array<double, 3> jet_color(double t);

// 8-bit RGB raster, row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}
  void set(std::size_t x, std::size_t y, const std::array<double, 3>& rgb);
};

// Binary P6 with maxval 255.
std::vector<std::uint8_t> encode_ppm(const Image& img);
Image decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

// Min-max normalisation to [0, 1]; a constant column maps to 0.5 everywhere.
std::vector<double> normalize_column(std::span<const float> column);

inline constexpr std::size_t kHeatmapSize = 240;

// 36 intensities laid out 6x6 row-major, bilinearly upsampled.
std::vector<double> grid_intensity(std::span<const double> t, std::size_t size = kHeatmapSize);
Image grid_heatmap(std::span<const double> t, std::size_t size = kHeatmapSize);

// Boxes of the ranked regions painted over black, later ranks on top.
// `t` holds one intensity per prepared premise row; padded rows are skipped.
Image roi_heatmap(std::span<const double> t, const RoiFeatures& rois);

// One 10x10 cell per region, left to right.
Image strip_heatmap(std::span<const double> t);

// Replaces anything outside [A-Za-z0-9_-] with '_'.
std::string sanitize_token(std::string_view token);

struct HeatmapOutput {
  std::vector<std::filesystem::path> images;  // one per hypothesis token
  std::filesystem::path csv;
  std::vector<std::string> warnings;
  Prediction prediction;
};

// Runs the model and writes <id>_tok<j>_<token>.ppm for every token plus
// <id>_alignment.csv holding the raw 36 x n alignment matrix.
HeatmapOutput render_heatmaps(const PremiseFeatures& premise, std::string_view id, std::string_view hypothesis,
                              const EmbeddingTable& table, const ParamStore<float>& params, const ModelConfig& cfg,
                              const std::filesystem::path& out_dir);

}  // namespace alignve
