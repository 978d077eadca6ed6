#pragma once

#include <cmath>

#include "elvckit/stft.hpp"

namespace elvc {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank (HTK mel scale, unit peak), n_mels x n_fft_bins.
/// Bin b sits at frequency b * sample_rate / (2 * (n_fft_bins - 1)).
inline RealMatrix mel_filterbank(int n_fft_bins, int n_mels, int sample_rate, double fmin, double fmax) {
  require(n_mels >= 1, ErrorKind::InvalidInput, "n_mels must be >= 1");
  require(n_fft_bins >= 2, ErrorKind::InvalidInput, "n_fft_bins must be >= 2");
  require(sample_rate > 0 && fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0, ErrorKind::InvalidInput,
          "mel filterbank requires 0 <= fmin < fmax <= sample_rate/2");

  const double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i)
    edges[static_cast<std::size_t>(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  const double bin_hz = sample_rate / (2.0 * (n_fft_bins - 1));
  RealMatrix fb = RealMatrix::Zero(n_mels, n_fft_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)], mid = edges[static_cast<std::size_t>(m + 1)],
                 hi = edges[static_cast<std::size_t>(m + 2)];
    bool any = false;
    for (int b = 0; b < n_fft_bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid)
        w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        w = (hi - f) / (hi - mid);
      fb(m, b) = w;
      any = any || w > 0.0;
    }
    require(any, ErrorKind::InvalidInput,
            "mel filter " + std::to_string(m) + " covers no FFT bin; use fewer mels or a larger frame");
  }
  return fb;
}

}  // namespace elvc
