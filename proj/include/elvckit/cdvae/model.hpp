#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "elvckit/ad/ops.hpp"
#include "elvckit/feature_sequence.hpp"

namespace elvc::cdvae {

using ad::Graph;
using ad::Parameter;
using ad::Shape;
using ad::Tensor;
using ad::Var;

/// Layer widths of the conv stacks. Encoders map N -> 1024 -> 512 -> 256 -> 128 -> (mu, logvar);
/// decoders map (latent + speakers) -> 128 -> 256 -> 512 -> 1024 -> N. Every layer is kernel 5, stride 1.
struct Architecture {
  std::vector<int> encoder_hidden{1024, 512, 256, 128};
  std::vector<int> decoder_hidden{128, 256, 512, 1024};
  int latent_dim = 128;
  int kernel = 5;
  float slope = 0.2f;

  int padding() const { return (kernel - 1) / 2; }
  bool operator==(const Architecture&) const = default;
};

/// One stack of stride-1, length-preserving conv layers with LeakyReLU between layers.
template <typename T>
struct ConvStack {
  std::vector<Parameter<T>> weights;
  std::vector<Parameter<T>> biases;

  std::size_t layers() const { return weights.size(); }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back(&weights[l]);
      out.push_back(&biases[l]);
    }
    return out;
  }

  template <typename U>
  ConvStack<U> cast() const {
    ConvStack<U> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.weights.push_back({weights[l].name, weights[l].value.template cast<U>(), {}});
      out.biases.push_back({biases[l].name, biases[l].value.template cast<U>(), {}});
    }
    return out;
  }

  Var<T> forward(Graph<T>& g, Var<T> x, const Architecture& arch, bool trainable) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      x = ad::conv1d(x, g.param(weights[l], trainable), g.param(biases[l], trainable), 1, arch.padding());
      if (l + 1 < weights.size()) x = ad::leaky_relu(x, static_cast<T>(arch.slope));
    }
    return x;
  }
};

/// Kaiming-uniform weights (LeakyReLU gain), zero biases.
template <typename T>
ConvStack<T> make_stack(const std::string& prefix, const std::vector<int>& widths, int kernel, float slope,
                        std::mt19937_64& rng) {
  ConvStack<T> s;
  const double gain = std::sqrt(2.0 / (1.0 + static_cast<double>(slope) * slope));
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto c_in = static_cast<std::size_t>(widths[l]), c_out = static_cast<std::size_t>(widths[l + 1]);
    const double bound = gain * std::sqrt(3.0 / static_cast<double>(c_in * static_cast<std::size_t>(kernel)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor<T> w({c_out, c_in, static_cast<std::size_t>(kernel)});
    for (auto& v : w.values()) v = static_cast<T>(dist(rng));
    const auto tag = prefix + "." + std::to_string(l);
    s.weights.push_back({tag + ".weight", std::move(w), {}});
    s.biases.push_back({tag + ".bias", Tensor<T>({c_out}), {}});
  }
  return s;
}

/// Per-domain encoder/decoder pair plus the z-score statistics its features are normalised with.
template <typename T>
struct DomainBlock {
  FeatureDomain domain = FeatureDomain::Mel;
  int dims = 0;
  std::vector<float> mean;
  std::vector<float> stddev;
  ConvStack<T> encoder;
  ConvStack<T> decoder;
};

struct SpeakerCode {
  std::vector<float> one_hot;
  std::size_t index() const {
    return static_cast<std::size_t>(std::find(one_hot.begin(), one_hot.end(), 1.0f) - one_hot.begin());
  }
};

/// All trainable tensors of the conversion model. One domain degenerates to a plain VAE.
template <typename T>
struct CdvaeModel {
  Architecture arch;
  std::vector<std::string> speakers;
  std::vector<DomainBlock<T>> domains;
  std::optional<ConvStack<T>> el_encoder;

  std::size_t n_speakers() const { return speakers.size(); }

  const DomainBlock<T>* find(FeatureDomain d) const {
    for (const auto& b : domains)
      if (b.domain == d) return &b;
    return nullptr;
  }
  DomainBlock<T>* find(FeatureDomain d) {
    for (auto& b : domains)
      if (b.domain == d) return &b;
    return nullptr;
  }
  std::size_t index_of(FeatureDomain d) const {
    for (std::size_t i = 0; i < domains.size(); ++i)
      if (domains[i].domain == d) return i;
    fail(ErrorKind::NoEncoder, "model has no " + std::string(to_string(d)) + " encoder");
  }

  SpeakerCode speaker_code(const std::string& id) const {
    auto it = std::find(speakers.begin(), speakers.end(), id);
    if (it == speakers.end()) fail(ErrorKind::InvalidSpeaker, "unknown speaker '" + id + "'");
    SpeakerCode code{std::vector<float>(speakers.size(), 0.0f)};
    code.one_hot[static_cast<std::size_t>(it - speakers.begin())] = 1.0f;
    return code;
  }

  std::vector<Parameter<T>*> nl_parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& b : domains) {
      for (auto* p : b.encoder.parameters()) out.push_back(p);
      for (auto* p : b.decoder.parameters()) out.push_back(p);
    }
    return out;
  }

  template <typename U>
  CdvaeModel<U> cast() const {
    CdvaeModel<U> out;
    out.arch = arch;
    out.speakers = speakers;
    for (const auto& b : domains)
      out.domains.push_back({b.domain, b.dims, b.mean, b.stddev, b.encoder.template cast<U>(), b.decoder.template cast<U>()});
    if (el_encoder) out.el_encoder = el_encoder->template cast<U>();
    return out;
  }
};

struct DomainSpec {
  FeatureDomain domain;
  int dims;
};

template <typename T = float>
CdvaeModel<T> make_model(const std::vector<DomainSpec>& domains, const std::vector<std::string>& speakers,
                         std::uint64_t seed, const Architecture& arch = {}) {
  require(!domains.empty() && domains.size() <= 2, ErrorKind::InvalidInput, "a CDVAE has one or two feature domains");
  require(!speakers.empty(), ErrorKind::InvalidInput, "at least one speaker is required");
  for (std::size_t i = 0; i < speakers.size(); ++i)
    for (std::size_t j = i + 1; j < speakers.size(); ++j)
      require(speakers[i] != speakers[j], ErrorKind::InvalidInput, "duplicate speaker id " + speakers[i]);
  require(arch.kernel % 2 == 1 && arch.latent_dim > 0, ErrorKind::InvalidInput, "kernel must be odd, latent_dim positive");
  if (domains.size() == 2)
    require(domains[0].domain != domains[1].domain, ErrorKind::InvalidInput, "the two CDVAE domains must differ");

  CdvaeModel<T> m;
  m.arch = arch;
  m.speakers = speakers;
  std::mt19937_64 rng(seed);
  for (const auto& spec : domains) {
    require(spec.dims > 0, ErrorKind::InvalidInput, "domain dims must be positive");
    const auto tag = std::string(to_string(spec.domain));
    std::vector<int> enc{spec.dims};
    enc.insert(enc.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
    enc.push_back(2 * arch.latent_dim);
    std::vector<int> dec{arch.latent_dim + static_cast<int>(speakers.size())};
    dec.insert(dec.end(), arch.decoder_hidden.begin(), arch.decoder_hidden.end());
    dec.push_back(spec.dims);
    DomainBlock<T> block;
    block.domain = spec.domain;
    block.dims = spec.dims;
    block.mean.assign(static_cast<std::size_t>(spec.dims), 0.0f);
    block.stddev.assign(static_cast<std::size_t>(spec.dims), 1.0f);
    block.encoder = make_stack<T>("enc." + tag, enc, arch.kernel, arch.slope, rng);
    block.decoder = make_stack<T>("dec." + tag, dec, arch.kernel, arch.slope, rng);
    m.domains.push_back(std::move(block));
  }
  return m;
}

/// Copies the first-domain encoder into a fresh EL encoder (Stage-2 starting point).
template <typename T>
void init_el_encoder(CdvaeModel<T>& m) {
  ConvStack<T> el = m.domains.front().encoder;
  for (auto* p : el.parameters()) {
    p->name = "el_" + p->name;
    p->grad = Tensor<T>();
  }
  m.el_encoder = std::move(el);
}

// ---- graph helpers --------------------------------------------------------------------------------

/// Normalised features as a (B, N, T) tensor. `crops` are (sequence, first frame) pairs of length `len`.
template <typename T>
Tensor<T> batch_tensor(const std::vector<const FeatureMatrix*>& seqs, const std::vector<Eigen::Index>& starts,
                       Eigen::Index len, const DomainBlock<T>& block) {
  const auto B = seqs.size(), N = static_cast<std::size_t>(block.dims), L = static_cast<std::size_t>(len);
  Tensor<T> out({B, N, L});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& m = *seqs[b];
    require(m.cols() == block.dims, ErrorKind::InvalidInput,
            std::string(to_string(block.domain)) + " features have " + std::to_string(m.cols()) + " dims, model expects " +
                std::to_string(block.dims));
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < L; ++t)
        out[(b * N + n) * L + t] =
            static_cast<T>((m(starts[b] + static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n)) - block.mean[n]) / block.stddev[n]);
  }
  return out;
}

/// Broadcasts one speaker code per batch item over time: (B, S, T).
template <typename T>
Tensor<T> speaker_tensor(const std::vector<SpeakerCode>& codes, std::size_t len) {
  const auto B = codes.size(), S = codes.front().one_hot.size();
  Tensor<T> out({B, S, len});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t t = 0; t < len; ++t) out[(b * S + s) * len + t] = static_cast<T>(codes[b].one_hot[s]);
  return out;
}

template <typename T>
struct LatentVars {
  Var<T> mu, logvar, z;
};

/// Encoder output split into (mu, logvar); z is sampled with `noise` or equals mu when noise is null.
template <typename T>
LatentVars<T> encode_graph(Graph<T>& g, ConvStack<T>& encoder, Var<T> x, const Architecture& arch, bool trainable,
                           const Tensor<T>* noise) {
  auto h = encoder.forward(g, x, arch, trainable);
  const auto L = static_cast<std::size_t>(arch.latent_dim);
  auto mu = ad::slice_channels(h, 0, L);
  auto logvar = ad::slice_channels(h, L, 2 * L);
  auto z = noise ? ad::reparameterize(mu, logvar, *noise) : mu;
  return {mu, logvar, z};
}

template <typename T>
Var<T> decode_graph(Graph<T>& g, ConvStack<T>& decoder, Var<T> z, Var<T> speakers, const Architecture& arch,
                    bool trainable) {
  return decoder.forward(g, ad::concat_channels(z, speakers), arch, trainable);
}

template <typename T>
Tensor<T> gaussian_noise(const Shape& shape, std::mt19937_64& rng) {
  Tensor<T> out(shape);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& v : out.values()) v = static_cast<T>(n01(rng));
  return out;
}

}  // namespace elvc::cdvae
