#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "elvckit/audio.hpp"
#include "elvckit/error.hpp"

namespace elvc {

/// One corpus row: `utterance_id TAB speaker_id TAB audio_path TAB parallel_id|- TAB boundaries_path|-`.
/// parallel_id names the utterance_id of the NL counterpart of an EL recording.
struct UtteranceManifest {
  std::string utterance_id;
  std::string speaker_id;
  std::filesystem::path audio_path;
  std::optional<std::string> parallel_id;
  std::optional<std::filesystem::path> boundaries_path;

  bool operator==(const UtteranceManifest&) const = default;
};

struct WordSegment {
  std::int64_t start_sample = 0;
  std::int64_t end_sample = 0;
  std::string label;

  bool operator==(const WordSegment&) const = default;
};

struct WordBoundaries {
  std::vector<WordSegment> segments;

  std::size_t size() const { return segments.size(); }
  bool operator==(const WordBoundaries&) const = default;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

inline void validate(const WordBoundaries& wb) {
  std::int64_t prev_end = 0;
  for (const auto& s : wb.segments) {
    require(s.start_sample >= 0 && s.start_sample < s.end_sample, ErrorKind::InvalidInput,
            "word segment '" + s.label + "' needs 0 <= start < end");
    require(s.start_sample >= prev_end, ErrorKind::InvalidInput, "word segments must be sorted and non-overlapping");
    prev_end = s.end_sample;
  }
}

inline WordBoundaries read_boundaries(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open boundaries file " + path.string());
  WordBoundaries wb;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 3) fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    try {
      wb.segments.push_back({std::stoll(f[0]), std::stoll(f[1]), f[2]});
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(lineno) + ": bad sample index");
    }
  }
  validate(wb);
  return wb;
}

inline void write_boundaries(const WordBoundaries& wb, const std::filesystem::path& path) {
  detail::atomic_write(path, [&](std::ostream& out) {
    for (const auto& s : wb.segments) out << s.start_sample << '\t' << s.end_sample << '\t' << s.label << '\n';
  });
}

/// Parses a manifest; relative paths resolve against the manifest's directory. With `check_files`,
/// every referenced audio/boundaries file must exist (MissingFile otherwise).
inline std::vector<UtteranceManifest> load_manifest(const std::filesystem::path& path, bool check_files = false) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<UtteranceManifest> rows;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_tabs(line);
    const auto where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 5) fail(ErrorKind::InvalidManifest, where + ": expected 5 tab-separated fields");
    if (f[0].empty() || f[1].empty() || f[2].empty()) fail(ErrorKind::InvalidManifest, where + ": empty field");
    if (!seen.insert(f[0]).second) fail(ErrorKind::InvalidManifest, where + ": duplicate utterance_id " + f[0]);
    UtteranceManifest row;
    row.utterance_id = f[0];
    row.speaker_id = f[1];
    row.audio_path = detail::resolve(base, f[2]);
    if (f[3] != "-") row.parallel_id = f[3];
    if (f[4] != "-") row.boundaries_path = detail::resolve(base, f[4]);
    if (check_files) {
      if (!std::filesystem::exists(row.audio_path)) fail(ErrorKind::MissingFile, where + ": " + row.audio_path.string());
      if (row.boundaries_path && !std::filesystem::exists(*row.boundaries_path))
        fail(ErrorKind::MissingFile, where + ": " + row.boundaries_path->string());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_manifest(const std::vector<UtteranceManifest>& rows, const std::filesystem::path& path) {
  detail::atomic_write(path, [&](std::ostream& out) {
    for (const auto& r : rows) {
      out << r.utterance_id << '\t' << r.speaker_id << '\t' << r.audio_path.string() << '\t'
          << r.parallel_id.value_or("-") << '\t' << (r.boundaries_path ? r.boundaries_path->string() : "-") << '\n';
    }
  });
}

/// Stage-2 rows must name their NL counterpart and carry word boundaries.
inline void require_stage2_ready(const UtteranceManifest& row) {
  require(row.parallel_id.has_value(), ErrorKind::InvalidManifest, row.utterance_id + ": EL row lacks parallel_id");
  require(row.boundaries_path.has_value(), ErrorKind::BoundaryMismatch, row.utterance_id + ": EL row lacks boundaries_path");
}

}  // namespace elvc
