#include "alignve/viz.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "alignve/binary_io.hpp"
#include "alignve/visual_encoder.hpp"

namespace alignve {

namespace fs = std::filesystem;

std::array<double, 3> jet_color(double t) {
  if (std::isnan(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0);
  auto ramp = [t](double centre) { return std::clamp(1.5 - std::abs(4.0 * t - centre), 0.0, 1.0); };
  return {ramp(3.0), ramp(2.0), ramp(1.0)};
}

void Image::set(std::size_t x, std::size_t y, const std::array<double, 3>& rgb) {
  std::uint8_t* px = &pixels[(y * width + x) * 3];
  for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != img.width * img.height * 3) {
    throw ShapeError("ppm: image dimensions do not match pixel data");
  }
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto fail = [](const std::string& msg) -> void { throw DataError("ppm: " + msg); };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&] {
    skip_space();
    const char* first = reinterpret_cast<const char*>(bytes.data()) + pos;
    const char* last = reinterpret_cast<const char*>(bytes.data()) + bytes.size();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr == first) fail("malformed header");
    pos += static_cast<std::size_t>(ptr - first);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail("bad magic (expected P6)");
  pos = 2;
  const std::size_t w = number(), h = number(), maxval = number();
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) fail("invalid dimensions");
  if (maxval != 255) fail("only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("malformed header");
  ++pos;
  if (bytes.size() - pos != w * h * 3) fail("pixel data length does not match header");
  Image img(w, h);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(), img.pixels.begin());
  return img;
}

void write_ppm(const fs::path& path, const Image& img) { write_file_bytes(path, encode_ppm(img)); }

Image read_ppm(const fs::path& path) {
  try {
    return decode_ppm(read_file_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<double> normalize_column(std::span<const float> column) {
  if (column.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> t(column.size(), 0.5);
  if (!(hi > lo)) return t;
  for (std::size_t i = 0; i < column.size(); ++i) t[i] = (column[i] - lo) / (hi - lo);
  return t;
}

std::vector<double> grid_intensity(std::span<const double> t, std::size_t size) {
  if (t.size() != kPremiseRegions) throw ShapeError("grid heatmap needs 36 intensities");
  GridFeatures cells{kPremiseGrid, kPremiseGrid, 1, std::vector<float>(t.begin(), t.end())};
  const GridFeatures up = bilinear_resize(cells, size, size);
  return std::vector<double>(up.values.begin(), up.values.end());
}

Image grid_heatmap(std::span<const double> t, std::size_t size) {
  const auto up = grid_intensity(t, size);
  Image img(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) img.set(x, y, jet_color(up[y * size + x]));
  }
  return img;
}

Image roi_heatmap(std::span<const double> t, const RoiFeatures& rois) {
  if (!rois.has_boxes() || rois.boxes.size() != rois.count * 4) throw ShapeError("roi heatmap needs one box per region");
  const auto selected = select_top_regions(rois.scores);
  if (t.size() < selected.size()) throw ShapeError("roi heatmap: fewer intensities than ranked regions");

  // Paint in ascending RoI index; each box carries the intensity of its rank.
  std::vector<std::pair<std::size_t, std::size_t>> order;  // (roi index, rank)
  double max_x = 1.0, max_y = 1.0;
  for (std::size_t r = 0; r < selected.size(); ++r) {
    order.emplace_back(selected[r], r);
    const float* b = &rois.boxes[selected[r] * 4];
    if (std::isfinite(b[2])) max_x = std::max(max_x, static_cast<double>(b[2]));
    if (std::isfinite(b[3])) max_y = std::max(max_y, static_cast<double>(b[3]));
  }
  std::sort(order.begin(), order.end());
  constexpr double kMaxCanvas = 8192.0;
  Image img(static_cast<std::size_t>(std::ceil(std::min(max_x, kMaxCanvas))),
            static_cast<std::size_t>(std::ceil(std::min(max_y, kMaxCanvas))));
  auto clamp_px = [](double v, std::size_t limit) {
    if (!(v > 0.0)) return std::size_t{0};
    return std::min(limit, static_cast<std::size_t>(v));
  };
  for (const auto& [idx, rank] : order) {
    const float* b = &rois.boxes[idx * 4];
    const std::size_t x0 = clamp_px(std::floor(b[0]), img.width), y0 = clamp_px(std::floor(b[1]), img.height);
    const std::size_t x1 = clamp_px(std::ceil(b[2]), img.width), y1 = clamp_px(std::ceil(b[3]), img.height);
    const auto rgb = jet_color(t[rank]);
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = x0; x < x1; ++x) img.set(x, y, rgb);
    }
  }
  return img;
}

Image strip_heatmap(std::span<const double> t) {
  constexpr std::size_t kCell = 10;
  if (t.empty()) throw ShapeError("strip heatmap needs at least one intensity");
  Image img(t.size() * kCell, kCell);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto rgb = jet_color(t[i]);
    for (std::size_t y = 0; y < kCell; ++y) {
      for (std::size_t x = 0; x < kCell; ++x) img.set(i * kCell + x, y, rgb);
    }
  }
  return img;
}

std::string sanitize_token(std::string_view token) {
  std::string out(token);
  for (char& c : out) {
    const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!keep) c = '_';
  }
  return out;
}

namespace {

void write_alignment_csv(const fs::path& path, const Tensor<float>& alignment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  for (std::size_t i = 0; i < alignment.rows(); ++i) {
    for (std::size_t j = 0; j < alignment.cols(); ++j) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), alignment(i, j));
      if (j) out.put(',');
      out.write(buf, ptr - buf);
    }
    out.put('\n');
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

HeatmapOutput render_heatmaps(const PremiseFeatures& premise, std::string_view id, std::string_view hypothesis,
                              const EmbeddingTable& table, const ParamStore<float>& params, const ModelConfig& cfg,
                              const fs::path& out_dir) {
  HeatmapOutput out;
  out.prediction = forward(premise, hypothesis, table, params, cfg);
  const Tensor<float>& R = out.prediction.alignment;
  fs::create_directories(out_dir);

  const auto* rois = std::get_if<RoiFeatures>(&premise);
  if (rois && !rois->has_boxes()) {
    out.warnings.push_back("RoI features for '" + std::string(id) + "' carry no boxes; writing 36x1 strips");
  }
  const std::string stem = sanitize_token(id);
  std::vector<float> column(R.rows());
  for (std::size_t j = 0; j < R.cols(); ++j) {
    for (std::size_t i = 0; i < R.rows(); ++i) column[i] = R(i, j);
    const auto t = normalize_column(column);
    Image img;
    if (!rois) {
      img = grid_heatmap(t);
    } else if (rois->has_boxes()) {
      img = roi_heatmap(t, *rois);
    } else {
      img = strip_heatmap(t);
    }
    const fs::path path =
        out_dir / (stem + "_tok" + std::to_string(j) + "_" + sanitize_token(out.prediction.tokens[j]) + ".ppm");
    write_ppm(path, img);
    out.images.push_back(path);
  }
  out.csv = out_dir / (stem + "_alignment.csv");
  write_alignment_csv(out.csv, R);
  return out;
}

}  // namespace alignve
