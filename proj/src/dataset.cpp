#include "alignve/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "alignve/features.hpp"
#include "alignve/model.hpp"
#include "alignve/visual_encoder.hpp"

namespace alignve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string required_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw DataError("manifest line " + std::to_string(line) + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

Manifest parse_manifest(const std::string& text, const fs::path& base_dir, bool check_files) {
  Manifest manifest;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!obj.is_object()) throw DataError("manifest line " + std::to_string(line_no) + ": expected an object");

    ManifestEntry entry;
    entry.id = required_string(obj, "id", line_no);
    const std::string feature = required_string(obj, "feature_file", line_no);
    entry.hypothesis = required_string(obj, "hypothesis", line_no);
    const std::string label = required_string(obj, "label", line_no);
    try {
      entry.label = parse_label(label);
    } catch (const DataError&) {
      throw DataError("manifest line " + std::to_string(line_no) + ": unknown label '" + label + "'");
    }
    if (entry.id.empty()) throw DataError("manifest line " + std::to_string(line_no) + ": empty id");
    if (!ids.insert(entry.id).second) {
      throw DataError("manifest line " + std::to_string(line_no) + ": duplicate id '" + entry.id + "'");
    }
    const fs::path fp(feature);
    entry.feature_file = fp.is_absolute() ? fp : base_dir / fp;
    if (check_files && !fs::is_regular_file(entry.feature_file)) {
      throw DataError("manifest line " + std::to_string(line_no) + ": missing feature file " +
                      entry.feature_file.string());
    }
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.entries.empty()) manifest.warnings.push_back("manifest has no entries");
  return manifest;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str(), path.parent_path());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  for (const auto& e : entries) {
    fs::path rel = e.feature_file;
    if (!base.empty() && rel.is_absolute() == fs::path(base).is_absolute()) {
      const fs::path candidate = rel.lexically_relative(base);
      if (!candidate.empty() && *candidate.begin() != "..") rel = candidate;
    }
    json obj = {{"id", e.id},
                {"feature_file", rel.generic_string()},
                {"hypothesis", e.hypothesis},
                {"label", std::string(label_name(e.label))}};
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

std::array<std::size_t, 3> Dataset::class_histogram() const {
  std::array<std::size_t, 3> h{};
  for (const auto& ex : examples) ++h.at(ex.label);
  return h;
}

Dataset load_dataset(const fs::path& manifest_path, std::size_t premise_dim, std::size_t max_tokens) {
  Manifest manifest = read_manifest(manifest_path);
  Dataset ds;
  ds.warnings = std::move(manifest.warnings);
  ds.examples.reserve(manifest.entries.size());
  for (auto& entry : manifest.entries) {
    Example ex;
    ex.id = entry.id;
    ex.premise = prepare_premise(read_feature_file(entry.feature_file), premise_dim);
    try {
      ex.tokens = tokenize(entry.hypothesis, max_tokens);
    } catch (const DataError& e) {
      throw DataError(manifest_path.string() + ": example '" + entry.id + "': " + e.what());
    }
    ex.label = entry.label;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace alignve
