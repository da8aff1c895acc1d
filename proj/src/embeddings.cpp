#include "alignve/embeddings.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "alignve/error.hpp"

namespace alignve {

bool EmbeddingTable::insert(const std::string& token, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw ShapeError("embedding for '" + token + "' has " + std::to_string(vector.size()) + " values, table dim is " +
                     std::to_string(dim_));
  }
  if (index_.count(token)) return false;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  vectors_.insert(vectors_.end(), vector.begin(), vector.end());
  return true;
}

std::optional<std::size_t> EmbeddingTable::index(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    if (c < 0x80) {
      len = 1;
    } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
      len = 4;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
    }
    i += len;
  }
  return true;
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw DataError("embeddings line " + std::to_string(line) + ": " + what);
}

}  // namespace

EmbeddingLoadResult parse_embeddings(const std::string& text) {
  EmbeddingLoadResult result;
  bool have_dim = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<float> values;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!valid_utf8(line)) fail(line_no, "invalid UTF-8");

    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0) fail(line_no, "expected 'token v1 ... vd'");
    const std::string token(line.substr(0, sp));

    values.clear();
    std::string_view rest = line.substr(sp + 1);
    while (!rest.empty()) {
      const std::size_t next = rest.find(' ');
      const std::string_view field = rest.substr(0, next);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
        fail(line_no, "non-numeric field '" + std::string(field.substr(0, 32)) + "'");
      }
      values.push_back(v);
      if (next == std::string_view::npos) break;
      rest.remove_prefix(next + 1);
      if (rest.empty()) fail(line_no, "trailing separator");
    }
    if (values.empty()) fail(line_no, "no vector values");

    if (!have_dim) {
      result.table = EmbeddingTable(values.size());
      have_dim = true;
    } else if (values.size() != result.table.dim()) {
      fail(line_no, "inconsistent dimension " + std::to_string(values.size()) + " (expected " +
                        std::to_string(result.table.dim()) + ")");
    }
    if (!result.table.insert(token, values)) {
      result.warnings.push_back("line " + std::to_string(line_no) + ": duplicate token '" + token +
                                "', keeping first occurrence");
    }
  }
  if (!have_dim) throw DataError("embeddings file contains no entries");
  return result;
}

EmbeddingLoadResult load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embeddings file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_embeddings(buf.str());
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings file " + path.string());
  char num[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.token(i);
    for (float v : table.row(i)) {
      // Shortest representation that round-trips exactly.
      const auto [ptr, ec] = std::to_chars(num, num + sizeof(num), v);
      out << ' ' << std::string_view(num, static_cast<std::size_t>(ptr - num));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing embeddings file " + path.string());
}

}  // namespace alignve
