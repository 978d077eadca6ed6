#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "elvckit/feature_sequence.hpp"
#include "elvckit/features.hpp"
#include "elvckit/mel.hpp"
#include "elvckit/stft.hpp"

namespace elvc {

// advance: bin k gains 2*pi*k*hop/frame_size radians per frame
enum class PhaseInit { zero, random, advance };

/// pinv: filterbank pseudo-inverse clamped at 0. nnls: non-negative least squares by multiplicative
/// updates, stable on mels that no real spectrum produces (model outputs).
enum class MelInversion { pinv, nnls };

struct GriffinLimOptions {
  int iterations = 60;
  std::uint64_t seed = 0;
  PhaseInit init = PhaseInit::zero;
  MelInversion inversion = MelInversion::pinv;
  // mel frames are linearly interpolated to hop/time_upsample before phase recovery
  int time_upsample = 1;
};

struct GriffinLimResult {
  AudioBuffer audio;
  // objective[k] = ||S - |STFT(x_k)|||_F for the estimate entering iteration k
  std::vector<double> objective;
};

/// Linear magnitude target from log-mel frames.
inline RealMatrix mel_to_magnitude(const FeatureSequence& mel, const StftConfig& cfg, MelInversion how = MelInversion::pinv,
                                   int nnls_iterations = 200) {
  require(mel.domain == FeatureDomain::Mel, ErrorKind::DomainMismatch, "mel_to_magnitude needs a Mel sequence");
  const RealMatrix fb =
      mel_filterbank(cfg.n_bins(), static_cast<int>(mel.dims()), mel.sample_rate, 0.0, mel.sample_rate / 2.0);
  const RealMatrix y = (mel.data.cast<double>().array().exp() - kLogEpsilon).cwiseMax(0.0).matrix();
  if (how == MelInversion::pinv) {
    RealMatrix pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(fb).pseudoInverse();
    return (y * pinv.transpose()).cwiseMax(0.0).cwiseSqrt();
  }
  const RealMatrix yf = y * fb;
  const RealMatrix gram = fb.transpose() * fb;
  const Eigen::RowVectorXd mass = fb.colwise().sum().cwiseMax(1e-12);
  RealMatrix p = (yf.array().rowwise() / mass.array()).matrix();
  constexpr double tiny = 1e-30;
  for (int it = 0; it < nnls_iterations; ++it) p = (p.array() * yf.array() / ((p * gram).array() + tiny)).matrix();
  return p.cwiseSqrt();
}

/// Griffin-Lim phase recovery on the reflect-padded frame grid. The least-squares ISTFT makes the
/// objective non-increasing; the returned audio is the un-padded centre (frames * hop samples).
inline GriffinLimResult griffin_lim(const RealMatrix& target, const StftConfig& cfg, int sample_rate,
                                    const GriffinLimOptions& opt = {}) {
  validate(cfg);
  require(opt.iterations >= 1, ErrorKind::InvalidInput, "griffin_lim needs iterations >= 1");
  require(target.rows() >= 1 && target.cols() == cfg.n_bins(), ErrorKind::InvalidInput,
          "magnitude target must be frames x (frame_size/2+1)");
  const auto frames = static_cast<std::size_t>(target.rows());
  const std::size_t padded_len = frames * static_cast<std::size_t>(cfg.hop_size) +
                                 static_cast<std::size_t>(cfg.frame_size - cfg.hop_size);

  ComplexMatrix spec(target.rows(), target.cols());
  if (opt.init == PhaseInit::random) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi);
    for (Eigen::Index i = 0; i < spec.size(); ++i) spec.data()[i] = std::polar(target.data()[i], phase(rng));
  } else if (opt.init == PhaseInit::advance) {
    const double step = 2.0 * std::numbers::pi * cfg.hop_size / cfg.frame_size;
    for (Eigen::Index t = 0; t < spec.rows(); ++t)
      for (Eigen::Index k = 0; k < spec.cols(); ++k)
        spec(t, k) = std::polar(target(t, k), std::fmod(step * static_cast<double>(k * t), 2.0 * std::numbers::pi));
  } else {
    spec = target.cast<std::complex<double>>();
  }

  GriffinLimResult result;
  result.objective.reserve(static_cast<std::size_t>(opt.iterations));
  auto signal = istft_unpadded(spec, cfg, padded_len);
  for (int it = 0; it < opt.iterations; ++it) {
    ComplexMatrix estimate = stft_unpadded(signal, cfg);
    result.objective.push_back((target - estimate.cwiseAbs()).norm());
    for (Eigen::Index i = 0; i < estimate.size(); ++i) {
      const auto z = estimate.data()[i];
      const double mag = std::abs(z);
      spec.data()[i] = mag > 0.0 ? target.data()[i] * (z / mag) : std::complex<double>(target.data()[i], 0.0);
    }
    signal = istft_unpadded(spec, cfg, padded_len);
  }

  result.audio.sample_rate = sample_rate;
  const auto left = static_cast<std::size_t>(cfg.pad_left());
  result.audio.samples.assign(signal.begin() + static_cast<std::ptrdiff_t>(left),
                              signal.begin() + static_cast<std::ptrdiff_t>(left + frames * cfg.hop_size));
  return result;
}

/// Frame k of the output is centred at (k + 0.5) * hop / factor; values interpolate linearly between input frames.
inline FeatureSequence upsample_frames(const FeatureSequence& seq, int factor) {
  require(factor >= 1 && seq.hop_size % factor == 0, ErrorKind::InvalidInput,
          "time upsampling factor must divide the hop size");
  if (factor == 1) return seq;
  FeatureSequence out = seq;
  out.hop_size = seq.hop_size / factor;
  const auto frames = seq.frames();
  out.data.resize(frames * factor, seq.dims());
  for (Eigen::Index k = 0; k < out.data.rows(); ++k) {
    const double pos = std::clamp((static_cast<double>(k) + 0.5) / factor - 0.5, 0.0, static_cast<double>(frames - 1));
    const auto j = static_cast<Eigen::Index>(pos);
    const auto frac = static_cast<float>(pos - static_cast<double>(j));
    out.data.row(k) = (1.0f - frac) * seq.data.row(j) + frac * seq.data.row(std::min(j + 1, frames - 1));
  }
  return out;
}

inline GriffinLimResult griffin_lim(const FeatureSequence& mel, const StftConfig& cfg, const GriffinLimOptions& opt = {}) {
  require(mel.domain == FeatureDomain::Mel, ErrorKind::DomainMismatch,
          "only Mel features can be inverted without a trained vocoder; got " + std::string(to_string(mel.domain)));
  require(mel.hop_size == cfg.hop_size, ErrorKind::InvalidInput, "mel hop does not match StftConfig");
  require(mel.frames() >= 1, ErrorKind::InvalidInput, "empty mel sequence");
  auto fine = upsample_frames(mel, opt.time_upsample);
  const StftConfig fine_cfg{cfg.frame_size, fine.hop_size};
  return griffin_lim(mel_to_magnitude(fine, fine_cfg, opt.inversion), fine_cfg, mel.sample_rate, opt);
}

inline GriffinLimResult griffin_lim(const FeatureSequence& mel, const StftConfig& cfg, int iterations,
                                    std::uint64_t seed) {
  GriffinLimOptions opt;
  opt.iterations = iterations;
  opt.seed = seed;
  return griffin_lim(mel, cfg, opt);
}

}  // namespace elvc
