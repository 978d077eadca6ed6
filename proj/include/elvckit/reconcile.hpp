#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "elvckit/feature_sequence.hpp"

namespace elvc {

/// Linearly interpolates `seq` onto a grid with `hop` samples per frame. Frame k of any sequence is
/// taken to sit at time k*hop + hop/2; positions outside the source are clamped to its end frames.
inline FeatureSequence resample_frames(const FeatureSequence& seq, int hop) {
  require(hop > 0, ErrorKind::InvalidInput, "hop must be positive");
  FeatureSequence out = seq;
  out.hop_size = hop;
  if (seq.frames() == 0) return out;
  const double src_hop = seq.hop_size;
  const auto n_out = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::floor(static_cast<double>(seq.frames()) * src_hop / hop)));
  out.data.resize(n_out, seq.dims());
  const double last = static_cast<double>(seq.frames() - 1);
  for (Eigen::Index k = 0; k < n_out; ++k) {
    const double t = static_cast<double>(k) * hop + hop / 2.0;
    const double pos = std::clamp((t - src_hop / 2.0) / src_hop, 0.0, last);
    const auto lo = static_cast<Eigen::Index>(std::floor(pos));
    const auto hi = std::min<Eigen::Index>(lo + 1, seq.frames() - 1);
    const double w = pos - static_cast<double>(lo);
    for (Eigen::Index d = 0; d < seq.dims(); ++d)
      out.data(k, d) = static_cast<float>((1.0 - w) * seq.data(lo, d) + w * seq.data(hi, d));
  }
  return out;
}

/// Brings two sequences of one utterance onto a shared frame grid: the finer one is interpolated onto
/// the coarser hop, then both are truncated to the shorter length.
inline std::pair<FeatureSequence, FeatureSequence> reconcile_frames(const FeatureSequence& a, const FeatureSequence& b) {
  require(a.sample_rate == b.sample_rate, ErrorKind::InvalidInput, "cannot reconcile sequences with different sample rates");
  FeatureSequence ra = a, rb = b;
  if (a.hop_size < b.hop_size)
    ra = resample_frames(a, b.hop_size);
  else if (b.hop_size < a.hop_size)
    rb = resample_frames(b, a.hop_size);
  const auto n = std::min(ra.frames(), rb.frames());
  ra.data.conservativeResize(n, Eigen::NoChange);
  rb.data.conservativeResize(n, Eigen::NoChange);
  return {std::move(ra), std::move(rb)};
}

}  // namespace elvc
