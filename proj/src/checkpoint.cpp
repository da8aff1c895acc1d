#include "alignve/checkpoint.hpp"

#include <cmath>

#include "alignve/binary_io.hpp"

namespace alignve {

namespace {

constexpr std::string_view kMagic = "AVCK";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxName = 4096;

void write_entry(ByteWriter& w, const std::string& name, const Shape& shape, std::span<const float> data) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
  w.f32s(data);
}

struct Entry {
  std::string name;
  Tensor<float> value;
};

Entry read_entry(ByteReader& r) {
  Entry e;
  const std::uint32_t name_len = r.u32();
  if (name_len == 0 || name_len > kMaxName) r.fail("invalid entry name length");
  e.name = std::string(r.bytes(name_len));
  const std::uint32_t rank = r.u32();
  if (rank > kMaxRank) r.fail("invalid rank for '" + e.name + "'");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = r.u32();
    if (d == 0) r.fail("zero dimension for '" + e.name + "'");
    if (__builtin_mul_overflow(count, static_cast<std::uint64_t>(d), &count)) r.truncated();
  }
  std::vector<float> data = r.f32s(count);
  for (float v : data) {
    if (!std::isfinite(v)) r.fail("non-finite value in '" + e.name + "'");
  }
  e.value = Tensor<float>(std::move(shape), std::move(data));
  return e;
}

std::vector<Entry> read_entries(ByteReader& r) {
  const std::uint32_t count = r.u32();
  // Every entry needs at least 9 bytes, which bounds a corrupt count.
  if (count > r.remaining() / 9) r.truncated();
  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) entries.push_back(read_entry(r));
  return entries;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt, const ModelConfig& cfg) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(cfg.digest());
  const auto& params = ckpt.params;
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_entry(w, params.name(i), params.at(i).shape(), params.at(i).data());
  }

  const auto& opt = ckpt.optimizer;
  const bool adam = opt.kind == OptimizerKind::adam;
  w.u8(static_cast<std::uint8_t>(opt.kind));
  w.u64(opt.step);
  const std::size_t groups = adam ? 2 : 1;
  if (opt.first.size() != params.size() || (adam && opt.second.size() != params.size())) {
    throw ShapeError("optimizer state does not match parameters");
  }
  w.u32(static_cast<std::uint32_t>(params.size() * groups));
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& buffers = g == 0 ? opt.first : opt.second;
    const std::string prefix = adam ? (g == 0 ? "adam_m/" : "adam_v/") : "velocity/";
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (buffers[i].size() != params.at(i).size()) throw ShapeError("optimizer buffer size mismatch");
      write_entry(w, prefix + params.name(i), params.at(i).shape(), buffers[i]);
    }
  }

  w.f64(ckpt.scheduler.best_val_loss);
  w.u32(static_cast<std::uint32_t>(ckpt.scheduler.epochs_since_improvement));
  w.f64(ckpt.scheduler.current_lr);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& cfg) {
  ByteReader r(bytes, "checkpoint");
  if (r.remaining() < 4 || r.bytes(4) != kMagic) r.fail("bad magic (expected AVCK)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::uint64_t digest = r.u64();

  Checkpoint ckpt;
  for (auto& e : read_entries(r)) {
    try {
      ckpt.params.add(e.name, std::move(e.value));
    } catch (const ConfigError&) {
      r.fail("duplicate parameter '" + e.name + "'");
    }
  }

  const std::uint8_t kind = r.u8();
  if (kind > 1) r.fail("unknown optimizer kind " + std::to_string(kind));
  ckpt.optimizer.kind = static_cast<OptimizerKind>(kind);
  ckpt.optimizer.step = r.u64();
  const bool adam = ckpt.optimizer.kind == OptimizerKind::adam;
  auto opt_entries = read_entries(r);
  const std::size_t groups = adam ? 2 : 1;
  if (opt_entries.size() != ckpt.params.size() * groups) r.fail("optimizer entry count mismatch");
  for (std::size_t g = 0; g < groups; ++g) {
    auto& buffers = g == 0 ? ckpt.optimizer.first : ckpt.optimizer.second;
    const std::string prefix = adam ? (g == 0 ? "adam_m/" : "adam_v/") : "velocity/";
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      auto& e = opt_entries[g * ckpt.params.size() + i];
      if (e.name != prefix + ckpt.params.name(i) || e.value.shape() != ckpt.params.at(i).shape()) {
        r.fail("optimizer entry '" + e.name + "' does not match parameter '" + ckpt.params.name(i) + "'");
      }
      buffers.push_back(e.value.values());
    }
  }

  ckpt.scheduler.best_val_loss = r.f64();
  ckpt.scheduler.epochs_since_improvement = r.u32();
  ckpt.scheduler.current_lr = r.f64();
  if (std::isnan(ckpt.scheduler.best_val_loss) || !(ckpt.scheduler.current_lr > 0.0) ||
      !std::isfinite(ckpt.scheduler.current_lr)) {
    r.fail("invalid scheduler state");
  }
  r.expect_end();

  validate_params(ckpt.params, model_param_specs(cfg));
  if (digest != cfg.digest()) throw ConfigError("checkpoint was written for a different model configuration");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, const ModelConfig& cfg) {
  write_file_bytes(path, encode_checkpoint(ckpt, cfg));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_checkpoint(bytes, cfg);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace alignve
