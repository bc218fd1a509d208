#include "pentarag/jsonl.hpp"

#include <fstream>
#include <istream>
#include <sstream>

namespace pentarag {

JsonlReadStats read_jsonl(std::istream& in, const std::string& source_name, bool lenient,
                          const std::function<void(const Json&)>& on_record) {
  JsonlReadStats stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    std::string reason;
    try {
      on_record(Json::parse(line));
      ++stats.parsed;
      continue;
    } catch (const Json::exception& e) {
      reason = e.what();
    } catch (const Error& e) {
      reason = e.what();
    }
    std::string where = source_name + ":" + std::to_string(line_no) + ": " + reason;
    if (!lenient) throw Error(ErrorCode::kMalformedInput, where);
    ++stats.skipped;
    stats.warnings.push_back(std::move(where));
  }
  return stats;
}

JsonlReadStats read_jsonl_file(const std::filesystem::path& path, bool lenient,
                               const std::function<void(const Json&)>& on_record) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return read_jsonl(in, path.string(), lenient, on_record);
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace pentarag
