#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "elvckit/audio.hpp"
#include "elvckit/feature_sequence.hpp"
#include "elvckit/manifest.hpp"

namespace elvc {

/// Monotonic (source frame, target frame) pairs with the summed frame distance along them.
struct AlignmentPath {
  std::vector<std::pair<int, int>> pairs;
  double total_cost = 0.0;

  std::size_t size() const { return pairs.size(); }
  bool operator==(const AlignmentPath&) const = default;
};

/// Mean squared difference over dimensions.
inline double frame_distance(std::span<const float> x, std::span<const float> y) {
  require(x.size() == y.size(), ErrorKind::InvalidInput, "frame_distance: dimension mismatch");
  require(!x.empty(), ErrorKind::InvalidInput, "frame_distance: empty frames");
  double acc = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double diff = static_cast<double>(x[d]) - static_cast<double>(y[d]);
    acc += diff * diff;
  }
  return acc / static_cast<double>(x.size());
}

inline std::span<const float> row_span(const FeatureMatrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// DTW over an m x n grid with steps {(1,0),(0,1),(1,1)}, unit weights. `dist(i, j)` supplies the local cost.
/// Ties prefer the diagonal, then the source advance, then the target advance.
template <typename Distance>
AlignmentPath dtw_grid(int m, int n, Distance&& dist) {
  require(m > 0 && n > 0, ErrorKind::InvalidInput, "dtw needs non-empty sequences");
  const auto cols = static_cast<std::size_t>(n);
  std::vector<double> acc(static_cast<std::size_t>(m) * cols);
  auto at = [&](int i, int j) -> double& { return acc[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)]; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double best = 0.0;
      if (i > 0 || j > 0) {
        const double diag = (i > 0 && j > 0) ? at(i - 1, j - 1) : inf;
        const double up = i > 0 ? at(i - 1, j) : inf;
        const double left = j > 0 ? at(i, j - 1) : inf;
        best = std::min({diag, up, left});
      }
      at(i, j) = best + dist(i, j);
    }
  }

  AlignmentPath path;
  path.total_cost = at(m - 1, n - 1);
  int i = m - 1, j = n - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

inline AlignmentPath dtw(const FeatureSequence& source, const FeatureSequence& target) {
  require(source.frames() > 0 && target.frames() > 0, ErrorKind::InvalidInput, "dtw needs non-empty sequences");
  require(source.domain == target.domain, ErrorKind::InvalidInput, "dtw: feature domains differ");
  require(source.dims() == target.dims(), ErrorKind::InvalidInput, "dtw: feature dims differ");
  return dtw_grid(static_cast<int>(source.frames()), static_cast<int>(target.frames()), [&](int i, int j) {
    return frame_distance(row_span(source.data, i), row_span(target.data, j));
  });
}

/// Word segment -> [first, last) frame range; floor at the start, ceil at the end, clamped to `frames`.
inline std::pair<int, int> segment_frames(const WordSegment& seg, int hop, Eigen::Index frames) {
  const auto first = seg.start_sample / hop;
  const auto last = std::min<std::int64_t>((seg.end_sample + hop - 1) / hop, frames);
  require(first < frames, ErrorKind::InvalidInput,
          "word '" + seg.label + "' starts beyond the feature sequence (" + std::to_string(frames) + " frames)");
  return {static_cast<int>(first), static_cast<int>(std::max(last, first + 1))};
}

namespace detail {

inline FeatureSequence slice_frames(const FeatureSequence& seq, int first, int last) {
  FeatureSequence out;
  out.domain = seq.domain;
  out.hop_size = seq.hop_size;
  out.sample_rate = seq.sample_rate;
  out.utterance_id = seq.utterance_id;
  out.data = seq.data.middleRows(first, last - first);
  return out;
}

}  // namespace detail

/// Word-by-word DTW: each labelled segment pair is aligned independently and the segment paths are
/// concatenated in global indices. Frames outside every word are not part of the path.
inline AlignmentPath segment_align(const FeatureSequence& source, const FeatureSequence& target,
                                   const WordBoundaries& sb, const WordBoundaries& tb) {
  if (sb.size() != tb.size())
    fail(ErrorKind::BoundaryMismatch, "segment counts differ: " + std::to_string(sb.size()) + " vs " +
                                          std::to_string(tb.size()));
  require(!sb.segments.empty(), ErrorKind::BoundaryMismatch, "no word segments");
  AlignmentPath out;
  for (std::size_t s = 0; s < sb.size(); ++s) {
    auto [s0, s1] = segment_frames(sb.segments[s], source.hop_size, source.frames());
    auto [t0, t1] = segment_frames(tb.segments[s], target.hop_size, target.frames());
    auto part = dtw(detail::slice_frames(source, s0, s1), detail::slice_frames(target, t0, t1));
    for (auto [i, j] : part.pairs) out.pairs.emplace_back(i + s0, j + t0);
    out.total_cost += part.total_cost;
  }
  return out;
}

/// Row k = source[i_k] followed by target[j_k].
inline FeatureMatrix apply_alignment(const AlignmentPath& path, const FeatureSequence& source,
                                     const FeatureSequence& target) {
  FeatureMatrix out(static_cast<Eigen::Index>(path.size()), source.dims() + target.dims());
  for (std::size_t k = 0; k < path.size(); ++k) {
    auto [i, j] = path.pairs[k];
    require(i >= 0 && i < source.frames() && j >= 0 && j < target.frames(), ErrorKind::InvalidInput,
            "alignment index out of range at step " + std::to_string(k));
    const auto row = static_cast<Eigen::Index>(k);
    out.row(row).head(source.dims()) = source.data.row(i);
    out.row(row).tail(target.dims()) = target.data.row(j);
  }
  return out;
}

/// The two halves of apply_alignment as frame sequences of equal length.
inline std::pair<FeatureSequence, FeatureSequence> warp_pair(const AlignmentPath& path, const FeatureSequence& source,
                                                             const FeatureSequence& target) {
  auto joined = apply_alignment(path, source, target);
  FeatureSequence s = source, t = target;
  s.data = joined.leftCols(source.dims());
  t.data = joined.rightCols(target.dims());
  return {std::move(s), std::move(t)};
}

inline void write_path(const AlignmentPath& path, const std::string& feature, const std::filesystem::path& file) {
  detail::atomic_write(file, [&](std::ostream& out) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, path.total_cost);
    out << "# elvckit alignment v1\n";
    out << "feature\t" << feature << '\n';
    out << "total_cost\t" << std::string(buf, res.ptr) << '\n';
    for (auto [i, j] : path.pairs) out << i << '\t' << j << '\n';
  });
}

struct PathFile {
  AlignmentPath path;
  std::string feature;
};

inline PathFile read_path(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorKind::MissingFile, "cannot open alignment " + file.string());
  PathFile pf;
  std::string line;
  bool have_cost = false;
  while (std::getline(in, line)) {
    line = detail::strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_tabs(line);
    if (f.size() != 2) fail(ErrorKind::CorruptFile, file.string() + ": malformed line '" + line + "'");
    if (f[0] == "feature") {
      pf.feature = f[1];
    } else if (f[0] == "total_cost") {
      auto res = std::from_chars(f[1].data(), f[1].data() + f[1].size(), pf.path.total_cost);
      if (res.ec != std::errc{}) fail(ErrorKind::CorruptFile, file.string() + ": bad total_cost");
      have_cost = true;
    } else {
      try {
        pf.path.pairs.emplace_back(std::stoi(f[0]), std::stoi(f[1]));
      } catch (const std::logic_error&) {
        fail(ErrorKind::CorruptFile, file.string() + ": bad index line '" + line + "'");
      }
    }
  }
  if (!have_cost) fail(ErrorKind::CorruptFile, file.string() + ": missing total_cost");
  return pf;
}

}  // namespace elvc
