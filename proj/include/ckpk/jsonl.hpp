#pragma once

// Flat JSONL artifacts. Every line carries "schema_version" and a "record"
// kind next to the fields of the serialized type.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ckpk/core.hpp"
#include "ckpk/json_util.hpp"

namespace ckpk::jsonl {

namespace kind {
inline constexpr std::string_view topic_source = "topic_source";
inline constexpr std::string_view context_window = "context_window";
inline constexpr std::string_view generation_record = "generation_record";
inline constexpr std::string_view evaluation_report = "evaluation_report";
inline constexpr std::string_view aggregate_row = "aggregate_row";
inline constexpr std::string_view ablation_row = "ablation_row";
inline constexpr std::string_view calibration_summary = "calibration_summary";
inline constexpr std::string_view case_study_item = "case_study_item";
}  // namespace kind

struct Line {
  std::string kind;
  json body;  // without the envelope fields
};

template <typename T>
std::string encode(std::string_view kind, const T& value) {
  json j = value;
  j["schema_version"] = kSchemaVersion;
  j["record"] = std::string(kind);
  return j.dump();
}

inline Line parse_line(std::string_view text, std::string_view where) {
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(Errc::schema, std::string(where) + ": not a JSON object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    fail(Errc::schema, std::string(where) + ": missing schema_version");
  }
  if (j["schema_version"].get<int>() != kSchemaVersion) {
    fail(Errc::schema, std::string(where) + ": unsupported schema_version " + j["schema_version"].dump());
  }
  if (!j.contains("record") || !j["record"].is_string()) fail(Errc::schema, std::string(where) + ": missing record kind");
  Line line{j["record"].get<std::string>(), std::move(j)};
  line.body.erase("schema_version");
  line.body.erase("record");
  return line;
}

/// Reads every line of a JSONL file. With `tolerate_torn_tail`, an
/// unparseable final line (an interrupted append) is dropped.
inline std::vector<Line> read_file(const std::filesystem::path& path, bool tolerate_torn_tail = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::vector<std::string> raw;
  std::string s;
  while (std::getline(in, s)) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (!text::is_blank(s)) raw.push_back(std::move(s));
  }
  std::vector<Line> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto where = path.string() + ":" + std::to_string(i + 1);
    if (tolerate_torn_tail && i + 1 == raw.size()) {
      try {
        out.push_back(parse_line(raw[i], where));
      } catch (const Error&) {
      }
      continue;
    }
    out.push_back(parse_line(raw[i], where));
  }
  return out;
}

template <typename T>
T decode(const Line& line, std::string_view expected_kind) {
  if (line.kind != expected_kind) {
    fail(Errc::schema, "expected record kind '" + std::string(expected_kind) + "', found '" + line.kind + "'");
  }
  return line.body.get<T>();
}

template <typename T>
std::vector<T> read_all(const std::filesystem::path& path, std::string_view kind) {
  std::vector<T> out;
  for (const auto& line : read_file(path)) out.push_back(decode<T>(line, kind));
  return out;
}

/// Writes the whole file via a temporary and a rename.
inline void write_file(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write " + tmp.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) fail(Errc::io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write " + tmp.string());
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Append-only log used for resumable runs; each append is flushed.
class AppendLog {
 public:
  explicit AppendLog(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) fail(Errc::io, "cannot append to " + path.string());
  }
  void append(const std::string& line) {
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace ckpk::jsonl
