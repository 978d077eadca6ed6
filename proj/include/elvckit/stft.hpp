#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "elvckit/audio.hpp"

namespace elvc {

using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class WindowKind { hann };

struct StftConfig {
  int frame_size = 400;
  int hop_size = 320;
  WindowKind window = WindowKind::hann;

  int n_bins() const { return frame_size / 2 + 1; }
  // Reflection padding split so that frame k is centred on k*hop + hop/2.
  int pad_left() const { return (frame_size - hop_size) / 2; }
  int pad_right() const { return frame_size - hop_size - pad_left(); }

  bool operator==(const StftConfig&) const = default;
};

inline void validate(const StftConfig& cfg) {
  require(cfg.frame_size > 0 && cfg.hop_size > 0 && cfg.hop_size <= cfg.frame_size, ErrorKind::InvalidInput,
          "StftConfig requires 0 < hop_size <= frame_size");
}

struct Spectrogram {
  ComplexMatrix bins;  // frames x (frame_size/2 + 1)
  StftConfig config;
  int sample_rate = 16000;

  Eigen::Index frames() const { return bins.rows(); }
  RealMatrix magnitude() const { return bins.cwiseAbs(); }
  RealMatrix power() const { return bins.cwiseAbs2(); }
};

/// Periodic Hann window.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

inline std::vector<double> make_window(const StftConfig& cfg) { return hann_window(cfg.frame_size); }

/// Mirror index into [0, n) without repeating the edge sample; handles any overshoot.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

inline std::vector<double> pad_reflect(const std::vector<double>& x, int left, int right) {
  std::vector<double> out(x.size() + static_cast<std::size_t>(left + right));
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = x[reflect_index(static_cast<std::ptrdiff_t>(k) - left, x.size())];
  return out;
}

inline std::size_t frame_count(std::size_t padded_length, const StftConfig& cfg) {
  if (padded_length < static_cast<std::size_t>(cfg.frame_size)) return 0;
  return (padded_length - static_cast<std::size_t>(cfg.frame_size)) / static_cast<std::size_t>(cfg.hop_size) + 1;
}

/// STFT of an already padded signal: no further padding is applied.
inline ComplexMatrix stft_unpadded(const std::vector<double>& padded, const StftConfig& cfg) {
  const auto n_frames = frame_count(padded.size(), cfg);
  const auto window = make_window(cfg);
  const int n_bins = cfg.n_bins();
  ComplexMatrix out(static_cast<Eigen::Index>(n_frames), n_bins);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(cfg.frame_size));
  std::vector<std::complex<double>> spec;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t start = f * static_cast<std::size_t>(cfg.hop_size);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = padded[start + i] * window[i];
    fft.fwd(spec, frame);
    for (int b = 0; b < n_bins; ++b) out(static_cast<Eigen::Index>(f), b) = spec[static_cast<std::size_t>(b)];
  }
  return out;
}

/// Least-squares inverse of stft_unpadded: the signal whose STFT is closest (Frobenius) to `bins`.
/// Samples not covered by any non-zero window weight are set to 0.
inline std::vector<double> istft_unpadded(const ComplexMatrix& bins, const StftConfig& cfg, std::size_t padded_length) {
  const auto window = make_window(cfg);
  const auto n = static_cast<std::size_t>(cfg.frame_size);
  std::vector<double> acc(padded_length, 0.0), wsum(padded_length, 0.0);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(n);
  std::vector<double> frame;
  for (Eigen::Index f = 0; f < bins.rows(); ++f) {
    for (std::size_t b = 0; b < n; ++b) {
      if (b <= n / 2)
        full[b] = bins(f, static_cast<Eigen::Index>(b));
      else
        full[b] = std::conj(bins(f, static_cast<Eigen::Index>(n - b)));
    }
    fft.inv(frame, full);
    const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg.hop_size);
    for (std::size_t i = 0; i < n && start + i < padded_length; ++i) {
      acc[start + i] += window[i] * frame[i];
      wsum[start + i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < padded_length; ++i) acc[i] = wsum[i] > 1e-12 ? acc[i] / wsum[i] : 0.0;
  return acc;
}

/// Short-time Fourier transform with reflection padding; frame count is floor(len / hop).
inline Spectrogram stft(const AudioBuffer& audio, const StftConfig& cfg) {
  validate_audio(audio);
  validate(cfg);
  require(audio.size() >= static_cast<std::size_t>(cfg.hop_size), ErrorKind::InvalidInput,
          "audio shorter than one hop");
  auto padded = pad_reflect(audio.samples, cfg.pad_left(), cfg.pad_right());
  return Spectrogram{stft_unpadded(padded, cfg), cfg, audio.sample_rate};
}

}  // namespace elvc
