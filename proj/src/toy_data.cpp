#include "alignve/toy_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "alignve/dataset.hpp"
#include "alignve/features.hpp"
#include "alignve/model.hpp"
#include "alignve/rng.hpp"
#include "alignve/visual_encoder.hpp"

namespace alignve {

namespace fs = std::filesystem;

void ToyConfig::validate() const {
  if (per_class == 0) throw ConfigError("toy per_class must be positive");
  if (embed_dim == 0 || embed_dim % 2 != 0) throw ConfigError("toy embed_dim must be positive and even");
  if (premise_dim < embed_dim) throw ConfigError("toy premise_dim must be at least embed_dim");
  if (concepts < 2 || concepts > embed_dim) throw ConfigError("toy concepts must lie in [2, embed_dim]");
  if (synonyms == 0) throw ConfigError("toy synonyms must be positive");
  if (max_hypothesis_tokens == 0) throw ConfigError("toy max_hypothesis_tokens must be positive");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("toy noise must be non-negative");
  if (!roi && regions != kPremiseRegions) throw ConfigError("grid toy data needs exactly 36 regions");
  if (regions == 0) throw ConfigError("toy regions must be positive");
  if (min_concept_rows == 0 || min_concept_rows > max_concept_rows || max_concept_rows > std::min(regions, kPremiseRegions)) {
    throw ConfigError("invalid toy concept row range");
  }
}

namespace {

// Orthonormal rows via Gram-Schmidt on Gaussian draws.
std::vector<std::vector<double>> orthonormal_concepts(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& b : basis) {
      double dot = 0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * b[i];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::string toy_word(bool antonym, std::size_t k, std::size_t s) {
  return (antonym ? "not" : "concept") + std::to_string(k) + "_" + std::to_string(s);
}

}  // namespace

ToyDatasetFiles generate_toy_dataset(const ToyConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t dh = cfg.embed_dim, dp = cfg.premise_dim;
  const auto concepts = orthonormal_concepts(cfg.concepts, dh, rng);

  EmbeddingTable table(dh);
  std::vector<float> vec(dh);
  auto noisy = [&](const std::vector<double>& base, double sign) {
    for (std::size_t i = 0; i < dh; ++i) {
      vec[i] = static_cast<float>(sign * base[i] + cfg.noise * rng.normal());
    }
    return std::span<const float>(vec);
  };
  for (std::size_t k = 0; k < cfg.concepts; ++k) {
    for (std::size_t s = 0; s < cfg.synonyms; ++s) table.insert(toy_word(false, k, s), noisy(concepts[k], 1.0));
    for (std::size_t s = 0; s < cfg.synonyms; ++s) table.insert(toy_word(true, k, s), noisy(concepts[k], -1.0));
  }

  fs::create_directories(out_dir / "features");
  ToyDatasetFiles files{out_dir / "embeddings.txt", out_dir / "train.jsonl", out_dir / "val.jsonl",
                        out_dir / "test.jsonl"};
  write_embeddings(files.embeddings, table);

  const std::size_t total = cfg.per_class * kNumClasses;
  const std::size_t extra_rois = cfg.roi ? 4 : 0;
  std::vector<std::vector<ManifestEntry>> by_class(kNumClasses);
  for (std::size_t n = 0; n < total; ++n) {
    const std::size_t label = n % kNumClasses;
    const std::size_t k = rng.below(cfg.concepts);

    // Premise rows: noise everywhere, concept added to a random subset.
    const std::size_t rows = cfg.regions + extra_rois;
    std::vector<float> values(rows * dp);
    for (auto& v : values) v = static_cast<float>(cfg.noise * rng.normal());
    std::vector<std::size_t> positions(cfg.regions);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(positions));
    const std::size_t concept_rows =
        cfg.min_concept_rows + rng.below(cfg.max_concept_rows - cfg.min_concept_rows + 1);
    for (std::size_t r = 0; r < concept_rows; ++r) {
      for (std::size_t i = 0; i < dh; ++i) values[positions[r] * dp + i] += static_cast<float>(concepts[k][i]);
    }

    // Hypothesis: synonyms of c, -c, or +-c' for neutral.
    std::size_t family = k;
    bool antonym = label == contradiction;
    if (label == neutral) {
      family = rng.below(cfg.concepts - 1);
      if (family >= k) ++family;
      antonym = rng.below(2) == 1;
    }
    std::string text;
    const std::size_t n_tokens = 1 + rng.below(cfg.max_hypothesis_tokens);
    for (std::size_t j = 0; j < n_tokens; ++j) {
      text += (j ? " " : "") + toy_word(antonym, family, rng.below(cfg.synonyms));
    }

    char id[32];
    std::snprintf(id, sizeof(id), "toy-%05zu", n);
    const fs::path feature_path = out_dir / "features" / (std::string(id) + ".avef");
    if (cfg.roi) {
      RoiFeatures roi;
      roi.count = rows;
      roi.dim = dp;
      roi.values = std::move(values);
      for (std::size_t r = 0; r < rows; ++r) {
        // Trailing extra regions score lowest and are dropped by top-36 selection.
        roi.scores.push_back(static_cast<float>(r < cfg.regions ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.4)));
        const double x1 = std::floor(rng.uniform(0.0, 200.0)), y1 = std::floor(rng.uniform(0.0, 200.0));
        const double w = std::floor(rng.uniform(20.0, 60.0)), h = std::floor(rng.uniform(20.0, 60.0));
        roi.boxes.insert(roi.boxes.end(), {static_cast<float>(x1), static_cast<float>(y1),
                                           static_cast<float>(std::min(240.0, x1 + w)),
                                           static_cast<float>(std::min(240.0, y1 + h))});
      }
      write_feature_file(feature_path, roi);
    } else {
      write_feature_file(feature_path, GridFeatures{kPremiseGrid, kPremiseGrid, dp, std::move(values)});
    }
    by_class[label].push_back({id, feature_path, text, label});
  }

  std::vector<ManifestEntry> train, val, test;
  for (const auto& entries : by_class) {
    const std::size_t n_train = entries.size() * 8 / 10;
    const std::size_t n_val = entries.size() / 10;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      auto& split = i < n_train ? train : (i < n_train + n_val ? val : test);
      split.push_back(entries[i]);
    }
  }
  auto by_id = [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; };
  for (auto* split : {&train, &val, &test}) std::sort(split->begin(), split->end(), by_id);
  write_manifest(files.train, train);
  write_manifest(files.val, val);
  write_manifest(files.test, test);
  return files;
}

std::size_t toy_oracle_label(const Tensor<float>& premise, const std::vector<std::string>& tokens,
                             const EmbeddingTable& table, double threshold) {
  const std::size_t dh = table.dim();
  if (premise.rank() != 2 || premise.cols() < dh) throw ShapeError("toy oracle: premise narrower than embeddings");
  std::vector<std::span<const float>> rows;
  for (const auto& tok : tokens) {
    if (const auto idx = table.index(tok)) rows.push_back(table.row(*idx));
  }
  double best = 0.0;
  if (rows.empty()) return neutral;
  for (std::size_t r = 0; r < premise.rows(); ++r) {
    double mean = 0.0;
    for (const auto& e : rows) {
      for (std::size_t i = 0; i < dh; ++i) mean += static_cast<double>(premise(r, i)) * e[i];
    }
    mean /= static_cast<double>(rows.size());
    if (std::abs(mean) > std::abs(best)) best = mean;
  }
  if (best > threshold) return entailment;
  if (best < -threshold) return contradiction;
  return neutral;
}

}  // namespace alignve
