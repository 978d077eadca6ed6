#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "elvckit/dtw.hpp"
#include "elvckit/f0.hpp"
#include "elvckit/features.hpp"
#include "elvckit/manifest.hpp"
#include "elvckit/parallel.hpp"

namespace elvc {

inline constexpr double kMcdScale = 10.0 / std::numbers::ln10;

/// Frame MCD in dB over cepstral columns 1.. (column 0, the energy term, is excluded).
inline double frame_mcd(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t d = 1; d < a.size(); ++d) {
    const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
    acc += diff * diff;
  }
  return kMcdScale * std::sqrt(2.0 * acc);
}

struct McdResult {
  double mcd_db = 0.0;
  AlignmentPath path;  // frame pairs of the internal DTW alignment
};

/// Mel-cepstral distortion averaged over the DTW path that minimises the summed frame MCD.
inline McdResult mcd_aligned(const FeatureSequence& converted, const FeatureSequence& reference) {
  require(converted.domain == FeatureDomain::MCC && reference.domain == FeatureDomain::MCC, ErrorKind::DomainMismatch,
          "mcd needs MCC sequences");
  require(converted.frames() > 0 && reference.frames() > 0, ErrorKind::InvalidInput, "mcd needs non-empty sequences");
  require(converted.dims() == reference.dims() && converted.dims() >= 2, ErrorKind::InvalidInput,
          "mcd sequences must share at least two cepstral columns");
  McdResult r;
  r.path = dtw_grid(static_cast<int>(converted.frames()), static_cast<int>(reference.frames()), [&](int i, int j) {
    return frame_mcd(row_span(converted.data, i), row_span(reference.data, j));
  });
  r.mcd_db = r.path.total_cost / static_cast<double>(r.path.size());
  return r;
}

inline double mcd(const FeatureSequence& converted, const FeatureSequence& reference) {
  return mcd_aligned(converted, reference).mcd_db;
}

namespace detail {

/// Co-voiced (converted, reference) F0 pairs, along `path` when given, else frame by frame.
inline std::vector<std::pair<double, double>> covoiced(const F0Track& conv, const F0Track& ref, const AlignmentPath* path) {
  std::vector<std::pair<double, double>> out;
  auto take = [&](std::size_t i, std::size_t j) {
    if (i < conv.size() && j < ref.size() && conv.values[i] > 0.0 && ref.values[j] > 0.0)
      out.emplace_back(conv.values[i], ref.values[j]);
  };
  if (path) {
    for (auto [i, j] : path->pairs) take(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  } else {
    for (std::size_t i = 0; i < std::min(conv.size(), ref.size()); ++i) take(i, i);
  }
  return out;
}

}  // namespace detail

/// RMSE in Hz over co-voiced frame pairs; std::nullopt when no pair is voiced on both sides.
inline std::optional<double> f0_rmse(const F0Track& conv, const F0Track& ref, const AlignmentPath* path = nullptr) {
  require(conv.size() > 0 && ref.size() > 0, ErrorKind::InvalidInput, "f0_rmse needs non-empty tracks");
  auto pairs = detail::covoiced(conv, ref, path);
  if (pairs.empty()) return std::nullopt;
  double acc = 0.0;
  for (auto [a, b] : pairs) acc += (a - b) * (a - b);
  return std::sqrt(acc / static_cast<double>(pairs.size()));
}

/// Pearson correlation over co-voiced pairs; std::nullopt with fewer than 2 pairs or zero variance.
inline std::optional<double> f0_corr(const F0Track& conv, const F0Track& ref, const AlignmentPath* path = nullptr) {
  require(conv.size() > 0 && ref.size() > 0, ErrorKind::InvalidInput, "f0_corr needs non-empty tracks");
  auto pairs = detail::covoiced(conv, ref, path);
  if (pairs.size() < 2) return std::nullopt;
  double ma = 0.0, mb = 0.0;
  for (auto [a, b] : pairs) {
    ma += a;
    mb += b;
  }
  ma /= static_cast<double>(pairs.size());
  mb /= static_cast<double>(pairs.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (auto [a, b] : pairs) {
    sab += (a - ma) * (b - mb);
    saa += (a - ma) * (a - ma);
    sbb += (b - mb) * (b - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct UtteranceScore {
  std::string utterance_id;
  double mcd_db = 0.0;
  std::optional<double> f0_rmse_hz;
  std::optional<double> f0_corr;
  std::size_t n_frames = 0;
};

struct EvalReport {
  std::vector<UtteranceScore> per_utterance;
  double mcd_db = 0.0;
  std::optional<double> f0_rmse_hz;
  std::optional<double> f0_corr;
  std::size_t n_frames_compared = 0;
};

struct EvalConfig {
  StftConfig stft{400, 320};
  int n_mels = 80;
  int n_mcc = 24;
  F0Config f0{};
  int jobs = 1;
};

/// Scores one utterance from its MCC and F0 tracks; F0 pairs follow the MCC alignment.
inline UtteranceScore score_utterance(const std::string& id, const FeatureSequence& conv_mcc, const F0Track& conv_f0,
                                      const FeatureSequence& ref_mcc, const F0Track& ref_f0) {
  auto m = mcd_aligned(conv_mcc, ref_mcc);
  return {id, m.mcd_db, f0_rmse(conv_f0, ref_f0, &m.path), f0_corr(conv_f0, ref_f0, &m.path), m.path.size()};
}

inline UtteranceScore score_audio(const std::string& id, const AudioBuffer& converted, const AudioBuffer& reference,
                                  const EvalConfig& cfg) {
  F0Config f0 = cfg.f0;
  f0.hop_size = cfg.stft.hop_size;
  return score_utterance(id, extract_mcc(converted, cfg.stft, cfg.n_mcc, cfg.n_mels), estimate_f0(converted, f0),
                         extract_mcc(reference, cfg.stft, cfg.n_mcc, cfg.n_mels), estimate_f0(reference, f0));
}

/// Corpus means: MCD over all rows, F0 metrics over rows where they are defined.
inline EvalReport summarize(std::vector<UtteranceScore> rows) {
  EvalReport r;
  r.per_utterance = std::move(rows);
  double rmse = 0.0, corr = 0.0;
  std::size_t n_rmse = 0, n_corr = 0;
  for (const auto& u : r.per_utterance) {
    r.mcd_db += u.mcd_db;
    r.n_frames_compared += u.n_frames;
    if (u.f0_rmse_hz) {
      rmse += *u.f0_rmse_hz;
      ++n_rmse;
    }
    if (u.f0_corr) {
      corr += *u.f0_corr;
      ++n_corr;
    }
  }
  if (!r.per_utterance.empty()) r.mcd_db /= static_cast<double>(r.per_utterance.size());
  if (n_rmse) r.f0_rmse_hz = rmse / static_cast<double>(n_rmse);
  if (n_corr) r.f0_corr = corr / static_cast<double>(n_corr);
  return r;
}

struct ConvertedAudio {
  std::string utterance_id;
  std::string parallel_id;  // utterance_id of the NL reference
  AudioBuffer audio;
};

/// Pairs each converted utterance with its reference through parallel_id and scores all three metrics.
inline EvalReport evaluate_system(const std::vector<ConvertedAudio>& converted, const std::vector<UtteranceManifest>& references,
                                  const EvalConfig& cfg) {
  std::map<std::string, const UtteranceManifest*> by_id;
  for (const auto& r : references) by_id[r.utterance_id] = &r;
  for (const auto& c : converted)
    if (!by_id.count(c.parallel_id))
      fail(ErrorKind::MissingPair, c.utterance_id + ": no reference utterance '" + c.parallel_id + "'");
  std::vector<UtteranceScore> rows(converted.size());
  parallel_for(converted.size(), cfg.jobs, [&](std::size_t i) {
    auto ref = read_wav(by_id.at(converted[i].parallel_id)->audio_path);
    rows[i] = score_audio(converted[i].utterance_id, converted[i].audio, ref, cfg);
  });
  return summarize(std::move(rows));
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : std::string("NA"); }

}  // namespace detail

inline constexpr const char* kReportHeader = "utterance_id\tmcd\tf0_rmse\tf0_corr\tn_frames";

inline std::string report_row(const UtteranceScore& u) {
  return u.utterance_id + '\t' + detail::fmt_num(u.mcd_db) + '\t' + detail::fmt_opt(u.f0_rmse_hz) + '\t' +
         detail::fmt_opt(u.f0_corr) + '\t' + std::to_string(u.n_frames);
}

/// Header, one row per utterance, then `MEAN` with the corpus means and the total compared frames.
inline void write_report(const EvalReport& r, const std::filesystem::path& path) {
  detail::atomic_write(path, [&](std::ostream& out) {
    out << kReportHeader << '\n';
    for (const auto& u : r.per_utterance) out << report_row(u) << '\n';
    out << report_row({"MEAN", r.mcd_db, r.f0_rmse_hz, r.f0_corr, r.n_frames_compared}) << '\n';
  });
}

inline EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, "cannot open report " + path.string());
  std::string line;
  if (!std::getline(in, line) || detail::strip_cr(line) != kReportHeader)
    fail(ErrorKind::CorruptFile, path.string() + ": unexpected report header");
  auto parse_opt = [&](const std::string& s) -> std::optional<double> {
    if (s == "NA") return std::nullopt;
    return std::stod(s);
  };
  EvalReport r;
  while (std::getline(in, line)) {
    auto f = detail::split_tabs(detail::strip_cr(line));
    if (f.size() != 5) fail(ErrorKind::CorruptFile, path.string() + ": malformed row");
    UtteranceScore u{f[0], std::stod(f[1]), parse_opt(f[2]), parse_opt(f[3]), static_cast<std::size_t>(std::stoull(f[4]))};
    if (u.utterance_id == "MEAN") {
      r.mcd_db = u.mcd_db;
      r.f0_rmse_hz = u.f0_rmse_hz;
      r.f0_corr = u.f0_corr;
      r.n_frames_compared = u.n_frames;
    } else {
      r.per_utterance.push_back(std::move(u));
    }
  }
  return r;
}

}  // namespace elvc
