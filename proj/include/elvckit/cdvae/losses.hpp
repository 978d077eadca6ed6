#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "elvckit/cdvae/model.hpp"

namespace elvc::cdvae {

struct LossWeights {
  double recon = 1.0;
  double kl = 0.01;
  double latent = 1.0;

  bool operator==(const LossWeights&) const = default;
};

/// A scalar loss and the unweighted terms it was assembled from.
struct LossBreakdown {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> components;

  double at(const std::string& name) const {
    for (const auto& [k, v] : components)
      if (k == name) return v;
    fail(ErrorKind::InvalidInput, "no loss component named " + name);
  }
};

template <typename T>
struct LossGraph {
  Var<T> total;
  std::vector<std::pair<std::string, Var<T>>> components;

  LossBreakdown values() const {
    LossBreakdown out{static_cast<double>(total.value()[0]), {}};
    for (const auto& [k, v] : components) out.components.emplace_back(k, static_cast<double>(v.value()[0]));
    return out;
  }
};

/// Stage-1 objective over every (encoder i, decoder j) pair: self- and cross-domain L1 reconstructions
/// plus one KL term per encoder. `inputs[i]` is the normalised (B, N_i, T) batch of domain i.
/// With a null `rng` the latents are taken as mu (no sampling).
template <typename T>
LossGraph<T> stage1_graph(Graph<T>& g, CdvaeModel<T>& m, const std::vector<Tensor<T>>& inputs, const Tensor<T>& speakers,
                          const LossWeights& w, double kl_weight, std::mt19937_64* rng) {
  require(inputs.size() == m.domains.size(), ErrorKind::InvalidInput, "one input batch per model domain is required");
  const auto frames = inputs.front().shape().back();
  for (const auto& x : inputs)
    require(x.shape().back() == frames, ErrorKind::InvalidInput, "stage-1 domains must have equal frame counts");

  std::vector<Var<T>> xs;
  std::vector<LatentVars<T>> latents;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    xs.push_back(g.input(inputs[i]));
    Tensor<T> noise;
    if (rng) {
      const auto& s = inputs[i].shape();
      noise = gaussian_noise<T>({s[0], static_cast<std::size_t>(m.arch.latent_dim), s[2]}, *rng);
    }
    latents.push_back(encode_graph(g, m.domains[i].encoder, xs.back(), m.arch, true, rng ? &noise : nullptr));
  }
  auto spk = g.input(speakers);

  LossGraph<T> out;
  std::vector<Var<T>> terms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      auto y = decode_graph(g, m.domains[j].decoder, latents[i].z, spk, m.arch, true);
      auto l = ad::l1_loss(y, xs[j]);
      out.components.emplace_back("recon_" + std::string(to_string(m.domains[i].domain)) + "_to_" +
                                      std::string(to_string(m.domains[j].domain)),
                                  l);
      terms.push_back(l);
      weights.push_back(w.recon);
    }
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto kl = ad::kl_divergence(latents[i].mu, latents[i].logvar);
    out.components.emplace_back("kl_" + std::string(to_string(m.domains[i].domain)), kl);
    terms.push_back(kl);
    weights.push_back(kl_weight);
  }
  out.total = ad::weighted_sum(terms, weights);
  return out;
}

/// Stage-2 objective: L1 between the EL-encoder mu and the frozen NL-encoder mu on aligned frames, plus
/// L1 reconstruction of the NL features by the first-domain decoder from the EL mu. Both sides use mu,
/// as conversion does.
template <typename T>
LossGraph<T> stage2_graph(Graph<T>& g, CdvaeModel<T>& m, const Tensor<T>& el, const Tensor<T>& nl, const Tensor<T>& speakers,
                          const LossWeights& w, bool train_decoder) {
  if (!m.el_encoder) fail(ErrorKind::NotPretrained, "model has no EL encoder");
  require(el.shape() == nl.shape(), ErrorKind::InvalidInput,
          "aligned EL/NL batches differ: " + ad::shape_str(el.shape()) + " vs " + ad::shape_str(nl.shape()));
  auto& block = m.domains.front();
  auto x_el = g.input(el);
  auto x_nl = g.input(nl);
  auto lat_el = encode_graph<T>(g, *m.el_encoder, x_el, m.arch, true, nullptr);
  auto lat_nl = encode_graph<T>(g, block.encoder, x_nl, m.arch, false, nullptr);
  auto latent = ad::l1_loss(lat_el.mu, lat_nl.mu);
  auto y = decode_graph(g, block.decoder, lat_el.z, g.input(speakers), m.arch, train_decoder);
  auto recon = ad::l1_loss(y, x_nl);

  LossGraph<T> out;
  out.components.emplace_back("latent_l1", latent);
  out.components.emplace_back("recon", recon);
  out.total = ad::weighted_sum(std::vector<Var<T>>{latent, recon}, std::vector<double>{w.latent, w.recon});
  return out;
}

}  // namespace elvc::cdvae
