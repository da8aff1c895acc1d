#include "alignve/visual_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace alignve {

namespace {

struct Tap {
  std::size_t lo, hi;
  double w;  // weight of `hi`
};

Tap source_tap(std::size_t out_index, std::size_t in_size, std::size_t out_size) {
  double s = (static_cast<double>(out_index) + 0.5) * static_cast<double>(in_size) / static_cast<double>(out_size) - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
  const auto lo = static_cast<std::size_t>(std::floor(s));
  const std::size_t hi = std::min(lo + 1, in_size - 1);
  return {lo, hi, s - static_cast<double>(lo)};
}

}  // namespace

GridFeatures bilinear_resize(const GridFeatures& map, std::size_t out_h, std::size_t out_w) {
  if (map.height == 0 || map.width == 0 || map.channels == 0 || out_h == 0 || out_w == 0) {
    throw ShapeError("bilinear_resize: dimensions must be positive");
  }
  if (map.values.size() != map.height * map.width * map.channels) throw ShapeError("bilinear_resize: size mismatch");
  const std::size_t c = map.channels;
  GridFeatures out{out_h, out_w, c, std::vector<float>(out_h * out_w * c)};
  auto at = [&](std::size_t y, std::size_t x, std::size_t k) {
    return static_cast<double>(map.values[(y * map.width + x) * c + k]);
  };
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const Tap ty = source_tap(oy, map.height, out_h);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const Tap tx = source_tap(ox, map.width, out_w);
      float* dst = &out.values[(oy * out_w + ox) * c];
      for (std::size_t k = 0; k < c; ++k) {
        const double top = (1.0 - tx.w) * at(ty.lo, tx.lo, k) + tx.w * at(ty.lo, tx.hi, k);
        const double bottom = (1.0 - tx.w) * at(ty.hi, tx.lo, k) + tx.w * at(ty.hi, tx.hi, k);
        dst[k] = static_cast<float>((1.0 - ty.w) * top + ty.w * bottom);
      }
    }
  }
  return out;
}

Tensor<float> prepare_grid_features(const GridFeatures& map, std::size_t d_p) {
  if (map.channels != d_p) {
    throw ShapeError("grid features have " + std::to_string(map.channels) + " channels, expected " +
                     std::to_string(d_p));
  }
  GridFeatures resized = bilinear_resize(map, kPremiseGrid, kPremiseGrid);
  // Channel-last 6x6xC is already 36 row-major cells of C values.
  return Tensor<float>({kPremiseRegions, d_p}, std::move(resized.values));
}

std::vector<std::size_t> select_top_regions(std::span<const float> scores, std::size_t m) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (order.size() > m) order.resize(m);
  return order;
}

Tensor<float> prepare_roi_features(const RoiFeatures& rois, std::size_t d_p) {
  if (rois.dim != d_p) {
    throw ShapeError("roi features have dim " + std::to_string(rois.dim) + ", expected " + std::to_string(d_p));
  }
  if (rois.scores.size() != rois.count || rois.values.size() != rois.count * rois.dim) {
    throw ShapeError("roi features: scores/values do not match count " + std::to_string(rois.count));
  }
  Tensor<float> out({kPremiseRegions, d_p});
  const auto selected = select_top_regions(rois.scores);
  for (std::size_t r = 0; r < selected.size(); ++r) {
    std::copy_n(rois.values.begin() + static_cast<std::ptrdiff_t>(selected[r] * d_p), d_p,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * d_p));
  }
  return out;
}

Tensor<float> prepare_premise(const PremiseFeatures& f, std::size_t d_p) {
  if (const auto* g = std::get_if<GridFeatures>(&f)) return prepare_grid_features(*g, d_p);
  return prepare_roi_features(std::get<RoiFeatures>(f), d_p);
}

template <typename T>
Tensor<T> encode_premise(const Tensor<T>& features, const AttEncParams<T>& params, const EncoderConfig& cfg) {
  if (features.rank() != 2 || features.rows() != kPremiseRegions) {
    throw ShapeError("encode_premise: expected 36 regions, got " + shape_str(features.shape()));
  }
  return attenc_forward(features, params, cfg);
}

template Tensor<float> encode_premise(const Tensor<float>&, const AttEncParams<float>&, const EncoderConfig&);
template Tensor<double> encode_premise(const Tensor<double>&, const AttEncParams<double>&, const EncoderConfig&);

}  // namespace alignve
