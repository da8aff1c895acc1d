#include "alignve/features.hpp"

#include <cmath>

#include "alignve/binary_io.hpp"

namespace alignve {

namespace {

constexpr std::string_view kMagic = "AVEF";
constexpr std::uint32_t kVersion = 1;

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v == 0 || v > 0xFFFFFFFFu) throw DataError(std::string("feature ") + what + " out of range");
  return static_cast<std::uint32_t>(v);
}

void require_finite(const ByteReader& r, std::span<const float> vs, const char* what) {
  for (float v : vs) {
    if (!std::isfinite(v)) r.fail(std::string("non-finite ") + what);
  }
}

// Element count a * b * c, saturated so that overflow reads as truncation.
std::uint64_t product(std::uint64_t a, std::uint64_t b, std::uint64_t c = 1) {
  std::uint64_t ab = 0, abc = 0;
  if (__builtin_mul_overflow(a, b, &ab) || __builtin_mul_overflow(ab, c, &abc)) return UINT64_MAX;
  return abc;
}

}  // namespace

std::size_t feature_dim(const PremiseFeatures& f) {
  if (const auto* g = std::get_if<GridFeatures>(&f)) return g->channels;
  return std::get<RoiFeatures>(f).dim;
}

std::vector<std::uint8_t> encode_features(const PremiseFeatures& f) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  if (const auto* g = std::get_if<GridFeatures>(&f)) {
    if (g->values.size() != g->height * g->width * g->channels) throw DataError("grid feature size mismatch");
    w.u8(0);
    w.u32(checked_u32(g->height, "height"));
    w.u32(checked_u32(g->width, "width"));
    w.u32(checked_u32(g->channels, "channels"));
    w.f32s(g->values);
  } else {
    const auto& roi = std::get<RoiFeatures>(f);
    if (roi.scores.size() != roi.count || roi.values.size() != roi.count * roi.dim ||
        (roi.has_boxes() && roi.boxes.size() != roi.count * 4)) {
      throw DataError("roi feature size mismatch");
    }
    w.u8(1);
    w.u32(checked_u32(roi.count, "count"));
    w.u32(checked_u32(roi.dim, "dim"));
    w.u8(roi.has_boxes() ? 1 : 0);
    w.f32s(roi.scores);
    if (roi.has_boxes()) w.f32s(roi.boxes);
    w.f32s(roi.values);
  }
  return w.take();
}

PremiseFeatures decode_features(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "feature file");
  if (r.remaining() < 4 || r.bytes(4) != kMagic) r.fail("bad magic (expected AVEF)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind == 0) {
    GridFeatures g;
    g.height = r.u32();
    g.width = r.u32();
    g.channels = r.u32();
    if (g.height == 0 || g.width == 0 || g.channels == 0) r.fail("zero grid dimension");
    g.values = r.f32s(product(g.height, g.width, g.channels));
    require_finite(r, g.values, "feature value");
    r.expect_end();
    return g;
  }
  if (kind == 1) {
    RoiFeatures roi;
    roi.count = r.u32();
    roi.dim = r.u32();
    const std::uint8_t has_boxes = r.u8();
    if (roi.count == 0 || roi.dim == 0) r.fail("zero roi dimension");
    if (has_boxes > 1) r.fail("invalid has_boxes flag");
    roi.scores = r.f32s(roi.count);
    require_finite(r, roi.scores, "score");
    if (has_boxes) {
      roi.boxes = r.f32s(product(roi.count, 4));
      require_finite(r, roi.boxes, "box coordinate");
    }
    roi.values = r.f32s(product(roi.count, roi.dim));
    require_finite(r, roi.values, "feature value");
    r.expect_end();
    return roi;
  }
  r.fail("unknown kind " + std::to_string(kind));
}

PremiseFeatures read_feature_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_features(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_feature_file(const std::filesystem::path& path, const PremiseFeatures& f) {
  write_file_bytes(path, encode_features(f));
}

}  // namespace alignve
