#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "elvckit/feature_sequence.hpp"
#include "elvckit/mel.hpp"
#include "elvckit/stft.hpp"

namespace elvc {

inline constexpr double kLogEpsilon = 1e-10;
inline constexpr int kEnvelopeLifter = 40;

namespace detail {

inline FeatureSequence make_sequence(FeatureDomain domain, const RealMatrix& values, const StftConfig& cfg,
                                     int sample_rate) {
  FeatureSequence seq;
  seq.domain = domain;
  seq.data = values.cast<float>();
  seq.hop_size = cfg.hop_size;
  seq.sample_rate = sample_rate;
  return seq;
}

}  // namespace detail

/// Log mel energies from an already computed spectrogram, log(mel power + 1e-10), frames x n_mels.
inline RealMatrix log_mel_from_spectrogram(const Spectrogram& spec, int n_mels) {
  auto fb = mel_filterbank(spec.config.n_bins(), n_mels, spec.sample_rate, 0.0, spec.sample_rate / 2.0);
  RealMatrix mel = spec.power() * fb.transpose();
  return (mel.array() + kLogEpsilon).log().matrix();
}

inline FeatureSequence extract_mel(const AudioBuffer& audio, const StftConfig& cfg, int n_mels = 80) {
  auto spec = stft(audio, cfg);
  return detail::make_sequence(FeatureDomain::Mel, log_mel_from_spectrogram(spec, n_mels), cfg, audio.sample_rate);
}

/// Orthonormal DCT-II of one frame, computed through an N-point FFT of the even/odd reordered input.
inline std::vector<double> dct_ii(std::span<const double> x) {
  const auto n = x.size();
  if (n <= 1) return {x.begin(), x.end()};
  std::vector<double> v(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) v[i] = x[2 * i];
  for (std::size_t i = 0; i < n / 2; ++i) v[n - 1 - i] = x[2 * i + 1];
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, v);
  std::vector<double> out(n);
  const double scale0 = std::sqrt(1.0 / static_cast<double>(n)), scale = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    auto twiddle = std::polar(1.0, -std::numbers::pi * static_cast<double>(k) / (2.0 * static_cast<double>(n)));
    out[k] = (spec[k] * twiddle).real() * (k == 0 ? scale0 : scale);
  }
  return out;
}

/// Mel-cepstra from a log-mel sequence: column 0 is c0 (energy), columns 1..n_mcc are c1..c_n_mcc.
inline FeatureSequence mcc_from_mel(const FeatureSequence& mel, int n_mcc = 24) {
  require(mel.domain == FeatureDomain::Mel, ErrorKind::DomainMismatch, "mcc_from_mel needs a Mel sequence");
  require(n_mcc >= 1 && n_mcc < mel.dims(), ErrorKind::InvalidInput, "n_mcc must be in [1, mel dims)");
  FeatureSequence out;
  out.domain = FeatureDomain::MCC;
  out.hop_size = mel.hop_size;
  out.sample_rate = mel.sample_rate;
  out.utterance_id = mel.utterance_id;
  out.data.resize(mel.frames(), n_mcc + 1);
  std::vector<double> frame(static_cast<std::size_t>(mel.dims()));
  for (Eigen::Index f = 0; f < mel.frames(); ++f) {
    for (Eigen::Index d = 0; d < mel.dims(); ++d) frame[static_cast<std::size_t>(d)] = mel.data(f, d);
    auto c = dct_ii(frame);
    for (int k = 0; k <= n_mcc; ++k) out.data(f, k) = static_cast<float>(c[static_cast<std::size_t>(k)]);
  }
  return out;
}

inline FeatureSequence extract_mcc(const AudioBuffer& audio, const StftConfig& cfg, int n_mcc = 24, int n_mels = 80) {
  return mcc_from_mel(extract_mel(audio, cfg, n_mels), n_mcc);
}

/// Raw log magnitude log(|X| + eps), frames x bins.
inline RealMatrix log_magnitude(const Spectrogram& spec) {
  return (spec.magnitude().array() + kLogEpsilon).log().matrix();
}

/// Cepstrally smoothed log-magnitude envelope: quefrencies |q| < lifter are kept.
inline RealMatrix cepstral_smooth(const RealMatrix& log_mag, int frame_size, int lifter = kEnvelopeLifter) {
  const auto n = static_cast<std::size_t>(frame_size);
  const auto n_bins = static_cast<std::size_t>(log_mag.cols());
  RealMatrix out(log_mag.rows(), log_mag.cols());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(n), ceps, smooth;
  for (Eigen::Index f = 0; f < log_mag.rows(); ++f) {
    for (std::size_t b = 0; b < n; ++b) {
      std::size_t src = b < n_bins ? b : n - b;
      full[b] = log_mag(f, static_cast<Eigen::Index>(src));
    }
    fft.inv(ceps, full);
    for (std::size_t q = 0; q < n; ++q) {
      std::size_t dist = std::min(q, n - q);
      if (dist >= static_cast<std::size_t>(lifter)) ceps[q] = 0.0;
    }
    fft.fwd(smooth, ceps);
    for (std::size_t b = 0; b < n_bins; ++b) out(f, static_cast<Eigen::Index>(b)) = smooth[b].real();
  }
  return out;
}

/// Second spectral domain standing in for a vocoder spectral envelope: frames x (frame_size/2 + 1).
inline FeatureSequence extract_envelope(const AudioBuffer& audio, const StftConfig& cfg) {
  auto spec = stft(audio, cfg);
  return detail::make_sequence(FeatureDomain::SP, cepstral_smooth(log_magnitude(spec), cfg.frame_size), cfg,
                               audio.sample_rate);
}

}  // namespace elvc
