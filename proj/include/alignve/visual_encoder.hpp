#pragma once

#include <vector>

#include "alignve/attention_encoder.hpp"
#include "alignve/features.hpp"

namespace alignve {

inline constexpr std::size_t kPremiseGrid = 6;
inline constexpr std::size_t kPremiseRegions = kPremiseGrid * kPremiseGrid;

// Half-pixel bilinear resampling of a channel-last map. Output cell i samples
// source coordinate (i + 0.5) * in / out - 0.5, clamped to [0, in - 1].
GridFeatures bilinear_resize(const GridFeatures& map, std::size_t out_h, std::size_t out_w);

// Resizes to 6x6 and flattens the cells row-major into 36 rows.
Tensor<float> prepare_grid_features(const GridFeatures& map, std::size_t d_p);

// Indices of the `m` highest-scoring regions, descending score with ties in
// ascending index order. Shorter than `m` when fewer regions exist.
std::vector<std::size_t> select_top_regions(std::span<const float> scores, std::size_t m = kPremiseRegions);

// Top-36 rows in rank order, zero-padded up to 36.
Tensor<float> prepare_roi_features(const RoiFeatures& rois, std::size_t d_p);

Tensor<float> prepare_premise(const PremiseFeatures& f, std::size_t d_p);

// Applies the premise encoder to prepared 36 x d_p features; no positional
// information is added on this path.
template <typename T>
Tensor<T> encode_premise(const Tensor<T>& features, const AttEncParams<T>& params, const EncoderConfig& cfg);

}  // namespace alignve
