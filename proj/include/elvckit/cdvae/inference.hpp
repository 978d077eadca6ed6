#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "elvckit/cdvae/losses.hpp"

namespace elvc::cdvae {

/// Per-frame latent statistics, frames x latent_dim each.
struct LatentSequence {
  FeatureMatrix mu;
  FeatureMatrix logvar;
  FeatureMatrix z;
  int hop_size = 320;
  int sample_rate = 16000;

  Eigen::Index frames() const { return z.rows(); }
};

/// Sampling seed for z = mu + sigma * eps; std::nullopt returns z = mu.
using SampleSeed = std::optional<std::uint64_t>;

namespace detail {

template <typename T>
FeatureMatrix channels_to_frames(const Tensor<T>& t) {
  // (1, C, T) -> T x C
  const auto C = t.dim(1), TT = t.dim(2);
  FeatureMatrix out(static_cast<Eigen::Index>(TT), static_cast<Eigen::Index>(C));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < TT; ++k) out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = static_cast<float>(t[c * TT + k]);
  return out;
}

template <typename T>
Tensor<T> frames_to_channels(const FeatureMatrix& m) {
  const auto TT = static_cast<std::size_t>(m.rows()), C = static_cast<std::size_t>(m.cols());
  Tensor<T> out({1, C, TT});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < TT; ++k) out[c * TT + k] = static_cast<T>(m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)));
  return out;
}

template <typename T>
Tensor<T> whole_sequence(const FeatureSequence& seq, const DomainBlock<T>& block) {
  require(seq.frames() >= 1, ErrorKind::InvalidInput, "feature sequence is empty");
  return batch_tensor<T>({&seq.data}, {0}, seq.frames(), block);
}

template <typename T>
LatentSequence run_encoder(CdvaeModel<T>& m, ConvStack<T>& encoder, const DomainBlock<T>& block,
                           const FeatureSequence& features, SampleSeed seed) {
  Graph<T> g;
  auto x = g.input(whole_sequence(features, block));
  Tensor<T> noise;
  if (seed) {
    std::mt19937_64 rng(*seed);
    noise = gaussian_noise<T>({1, static_cast<std::size_t>(m.arch.latent_dim), static_cast<std::size_t>(features.frames())}, rng);
  }
  auto lat = encode_graph(g, encoder, x, m.arch, false, seed ? &noise : nullptr);
  return {channels_to_frames(lat.mu.value()), channels_to_frames(lat.logvar.value()), channels_to_frames(lat.z.value()),
          features.hop_size, features.sample_rate};
}

}  // namespace detail

template <typename T>
LatentSequence encode(CdvaeModel<T>& m, FeatureDomain domain, const FeatureSequence& features, SampleSeed seed = std::nullopt) {
  auto* block = m.find(domain);
  if (!block) fail(ErrorKind::NoEncoder, "model has no " + std::string(to_string(domain)) + " encoder");
  return detail::run_encoder(m, block->encoder, *block, features, seed);
}

/// Decodes latent z with the speaker code appended to every frame; output is de-normalised.
template <typename T>
FeatureSequence decode(CdvaeModel<T>& m, FeatureDomain domain, const LatentSequence& latent, const SpeakerCode& speaker) {
  auto* block = m.find(domain);
  if (!block) fail(ErrorKind::NoDecoder, "model has no " + std::string(to_string(domain)) + " decoder");
  require(latent.frames() >= 1, ErrorKind::InvalidInput, "latent sequence is empty");
  require(latent.z.cols() == m.arch.latent_dim, ErrorKind::ShapeError, "latent width does not match the model");
  require(speaker.one_hot.size() == m.n_speakers(), ErrorKind::InvalidSpeaker, "speaker code length does not match the model");
  Graph<T> g;
  auto z = g.input(detail::frames_to_channels<T>(latent.z));
  auto spk = g.input(speaker_tensor<T>({speaker}, static_cast<std::size_t>(latent.frames())));
  auto y = decode_graph(g, block->decoder, z, spk, m.arch, false);
  FeatureSequence out;
  out.domain = domain;
  out.hop_size = latent.hop_size;
  out.sample_rate = latent.sample_rate;
  out.data = detail::channels_to_frames(y.value());
  for (Eigen::Index d = 0; d < out.data.cols(); ++d)
    out.data.col(d) = out.data.col(d).array() * block->stddev[static_cast<std::size_t>(d)] + block->mean[static_cast<std::size_t>(d)];
  return out;
}

/// Mean over frames of -1/2 * sum_d (1 + logvar - mu^2 - sigma^2).
inline double kl_loss(const LatentSequence& latent) {
  require(latent.mu.rows() == latent.logvar.rows() && latent.mu.cols() == latent.logvar.cols(), ErrorKind::ShapeError,
          "mu/logvar shape mismatch");
  if (latent.mu.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < latent.mu.size(); ++i) {
    const double m = latent.mu.data()[i], lv = latent.logvar.data()[i];
    acc += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  return acc / static_cast<double>(latent.mu.rows());
}

/// Stage-1 loss of whole sequences (one per model domain, frame-reconciled).
template <typename T>
LossBreakdown stage1_loss(CdvaeModel<T>& m, const std::vector<const FeatureSequence*>& features, const SpeakerCode& speaker,
                          const LossWeights& w, SampleSeed seed = std::nullopt) {
  require(features.size() == m.domains.size(), ErrorKind::InvalidInput, "one feature sequence per model domain is required");
  std::vector<Tensor<T>> inputs;
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(features[i]->domain == m.domains[i].domain, ErrorKind::DomainMismatch, "feature domain order differs from the model");
    require(features[i]->frames() == features[0]->frames(), ErrorKind::InvalidInput,
            "stage-1 features must be frame-reconciled (equal frame counts)");
    inputs.push_back(detail::whole_sequence(*features[i], m.domains[i]));
  }
  Graph<T> g;
  std::optional<std::mt19937_64> rng;
  if (seed) rng.emplace(*seed);
  auto spk = speaker_tensor<T>({speaker}, static_cast<std::size_t>(features[0]->frames()));
  return stage1_graph(g, m, inputs, spk, w, w.kl, rng ? &*rng : nullptr).values();
}

template <typename T>
LossBreakdown stage1_loss(CdvaeModel<T>& m, const FeatureSequence& f1, const FeatureSequence& f2, const SpeakerCode& speaker,
                          const LossWeights& w, SampleSeed seed = std::nullopt) {
  return stage1_loss(m, {&f1, &f2}, speaker, w, seed);
}

/// Stage-2 loss on aligned first-domain frames (equal lengths).
template <typename T>
LossBreakdown stage2_loss(CdvaeModel<T>& m, const FeatureSequence& el, const FeatureSequence& nl, const SpeakerCode& speaker,
                          const LossWeights& w) {
  require(el.frames() == nl.frames(), ErrorKind::InvalidInput, "stage-2 inputs must be aligned (equal frame counts)");
  const auto& block = m.domains.front();
  Graph<T> g;
  auto spk = speaker_tensor<T>({speaker}, static_cast<std::size_t>(el.frames()));
  return stage2_graph(g, m, detail::whole_sequence(el, block), detail::whole_sequence(nl, block), spk, w, false)
      .values();
}

/// EL features -> EL encoder mu -> `out_domain` decoder with the target speaker code.
template <typename T>
FeatureSequence convert(CdvaeModel<T>& m, const FeatureSequence& el_features, const SpeakerCode& target, FeatureDomain out_domain) {
  if (!m.el_encoder) fail(ErrorKind::NotPretrained, "model has no trained EL encoder");
  const auto& block = m.domains.front();
  require(el_features.domain == block.domain, ErrorKind::DomainMismatch,
          "EL encoder takes " + std::string(to_string(block.domain)) + " features");
  auto latent = detail::run_encoder(m, *m.el_encoder, block, el_features, std::nullopt);
  auto out = decode(m, out_domain, latent, target);
  out.utterance_id = el_features.utterance_id;
  return out;
}

}  // namespace elvc::cdvae
