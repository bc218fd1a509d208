#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pentarag/core.hpp"

namespace pentarag {

struct JsonlReadStats {
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;  // "path:line: reason" for skipped lines
};

/// Calls `on_record` for each non-blank line. A line that fails to parse, or
/// whose handler throws, raises kMalformedInput naming the file and line,
/// unless `lenient` is set, in which case the line is skipped and reported.
JsonlReadStats read_jsonl(std::istream& in, const std::string& source_name, bool lenient,
                          const std::function<void(const Json&)>& on_record);

JsonlReadStats read_jsonl_file(const std::filesystem::path& path, bool lenient,
                               const std::function<void(const Json&)>& on_record);

/// Reads a whole JSONL file of T (via from_json). Strict.
template <typename T>
std::vector<T> load_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  read_jsonl_file(path, false, [&](const Json& j) { out.push_back(j.get<T>()); });
  return out;
}

/// One compact JSON document per line.
template <typename Range>
void write_jsonl(std::ostream& out, const Range& records) {
  for (const auto& r : records) {
    out << Json(r).dump() << '\n';
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pentarag
