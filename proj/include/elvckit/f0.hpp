#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "elvckit/audio.hpp"

namespace elvc {

/// Per-frame F0 in Hz; 0 marks an unvoiced frame.
struct F0Track {
  std::vector<double> values;
  int hop_size = 320;
  int sample_rate = 16000;

  std::size_t size() const { return values.size(); }
};

struct F0Config {
  int hop_size = 320;
  double f0_floor = 70.0;
  double f0_ceiling = 400.0;
  double voicing_threshold = 0.3;
  int window_size = 640;
  // A local correlation peak at a shorter lag wins when it reaches this fraction of the global maximum.
  double octave_ratio = 0.9;
};

namespace detail {

inline double normalized_xcorr(const std::vector<double>& x, std::size_t lag) {
  const std::size_t n = x.size() - lag;
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xy += x[i] * x[i + lag];
    xx += x[i] * x[i];
    yy += x[i + lag] * x[i + lag];
  }
  const double denom = std::sqrt(xx * yy);
  return denom > 0.0 ? xy / denom : 0.0;
}

}  // namespace detail

/// Normalised cross-correlation pitch tracker with parabolic peak refinement.
/// Frames share the STFT grid: floor(len / hop) frames, frame k centred on k*hop + hop/2.
/// Each analysis window is clamped inside the signal instead of padded.
inline F0Track estimate_f0(const AudioBuffer& audio, const F0Config& cfg) {
  validate_audio(audio);
  const double sr = audio.sample_rate;
  require(cfg.hop_size > 0, ErrorKind::InvalidInput, "hop_size must be positive");
  require(cfg.f0_floor > 0.0 && cfg.f0_floor < cfg.f0_ceiling && cfg.f0_ceiling <= sr / 2.0, ErrorKind::InvalidInput,
          "F0 range must satisfy 0 < floor < ceiling <= sample_rate/2");
  require(cfg.window_size >= 2.0 * sr / cfg.f0_floor, ErrorKind::InvalidInput,
          "F0 window must span at least two periods of f0_floor");

  const auto len = audio.size();
  const auto hop = static_cast<std::size_t>(cfg.hop_size);
  const auto min_lag = static_cast<std::size_t>(std::max(2.0, std::floor(sr / cfg.f0_ceiling)));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sr / cfg.f0_floor));

  F0Track track;
  track.hop_size = cfg.hop_size;
  track.sample_rate = audio.sample_rate;
  track.values.assign(len / hop, 0.0);

  const std::size_t win = std::min<std::size_t>(static_cast<std::size_t>(cfg.window_size), len);
  if (max_lag + 2 >= win) return track;  // signal too short to hold the lag range
  std::vector<double> frame(win);
  std::vector<double> r(max_lag + 2, 0.0);

  for (std::size_t k = 0; k < track.values.size(); ++k) {
    const auto centre = static_cast<std::ptrdiff_t>(k * hop + hop / 2);
    auto start = std::clamp<std::ptrdiff_t>(centre - static_cast<std::ptrdiff_t>(win / 2), 0,
                                            static_cast<std::ptrdiff_t>(len - win));
    double mean = 0.0;
    for (std::size_t i = 0; i < win; ++i) mean += audio.samples[static_cast<std::size_t>(start) + i];
    mean /= static_cast<double>(win);
    double energy = 0.0;
    for (std::size_t i = 0; i < win; ++i) {
      frame[i] = audio.samples[static_cast<std::size_t>(start) + i] - mean;
      energy += frame[i] * frame[i];
    }
    if (energy < 1e-10 * static_cast<double>(win)) continue;

    for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) r[lag] = detail::normalized_xcorr(frame, lag);

    std::size_t best = min_lag;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag)
      if (r[lag] > r[best]) best = lag;
    if (r[best] < cfg.voicing_threshold) continue;
    for (std::size_t lag = min_lag; lag < best; ++lag) {
      if (r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] >= cfg.octave_ratio * r[best]) {
        best = lag;
        break;
      }
    }
    const double a = r[best - 1], b = r[best], c = r[best + 1];
    const double curvature = a - 2.0 * b + c;
    double offset = curvature < 0.0 ? 0.5 * (a - c) / curvature : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const double f0 = sr / (static_cast<double>(best) + offset);
    track.values[k] = std::clamp(f0, cfg.f0_floor, cfg.f0_ceiling);
  }
  return track;
}

inline F0Track estimate_f0(const AudioBuffer& audio, int hop_size, double f0_floor = 70.0, double f0_ceiling = 400.0) {
  F0Config cfg;
  cfg.hop_size = hop_size;
  cfg.f0_floor = f0_floor;
  cfg.f0_ceiling = f0_ceiling;
  return estimate_f0(audio, cfg);
}

}  // namespace elvc
