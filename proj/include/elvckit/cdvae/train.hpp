#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "elvckit/ad/radam.hpp"
#include "elvckit/audio.hpp"
#include "elvckit/cdvae/losses.hpp"

namespace elvc::cdvae {

struct TrainConfig {
  int batch_size = 16;
  double lr = 1e-4;
  int epochs = 20;
  LossWeights weights;
  double kl_warmup_fraction = 0.1;
  int segment_length = 128;
  std::uint64_t seed = 0;
  bool unfreeze_decoder = false;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
  require(c.batch_size >= 1, ErrorKind::InvalidInput, "batch_size must be >= 1");
  require(c.lr > 0.0, ErrorKind::InvalidInput, "lr must be positive");
  require(c.epochs >= 0, ErrorKind::InvalidInput, "epochs must be >= 0");
  require(c.segment_length >= 1, ErrorKind::InvalidInput, "segment_length must be >= 1");
  require(c.weights.recon >= 0 && c.weights.kl >= 0 && c.weights.latent >= 0, ErrorKind::InvalidInput,
          "loss weights must be non-negative");
  require(c.kl_warmup_fraction >= 0.0 && c.kl_warmup_fraction <= 1.0, ErrorKind::InvalidInput,
          "kl_warmup_fraction must lie in [0, 1]");
}

/// Mean of each loss component over one epoch.
struct EpochLoss {
  int epoch = 0;
  std::vector<std::pair<std::string, double>> components;

  double at(const std::string& name) const {
    for (const auto& [k, v] : components)
      if (k == name) return v;
    fail(ErrorKind::InvalidInput, "no loss component named " + name);
  }
};

using LossCurve = std::vector<EpochLoss>;

/// Optimiser progress carried in checkpoints so training resumes where it stopped.
template <typename T>
struct StageProgress {
  int epochs_done = 0;
  ad::RAdamState<T> optimizer;
};

template <typename T>
struct TrainingState {
  bool stage1_done = false;
  StageProgress<T> stage1;
  StageProgress<T> stage2;
};

/// One NL utterance: a sequence per model domain (model order, equal frame counts) and its speaker id.
struct Stage1Utterance {
  std::string utterance_id;
  std::string speaker;
  std::vector<FeatureSequence> features;
};

/// Aligned first-domain frames of one EL utterance and its NL counterpart.
struct Stage2Pair {
  std::string utterance_id;
  std::string target_speaker;
  FeatureSequence el;
  FeatureSequence nl;
};

/// Per-dimension mean / standard deviation (floored at 1e-3) over every frame of the corpus.
template <typename T>
void fit_normalization(CdvaeModel<T>& m, const std::vector<Stage1Utterance>& corpus) {
  for (std::size_t d = 0; d < m.domains.size(); ++d) {
    auto& block = m.domains[d];
    const auto dims = static_cast<std::size_t>(block.dims);
    std::vector<double> sum(dims, 0.0), sq(dims, 0.0);
    double n = 0.0;
    for (const auto& u : corpus) {
      const auto& x = u.features[d].data;
      for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < dims; ++c) {
          const double v = x(r, static_cast<Eigen::Index>(c));
          sum[c] += v;
          sq[c] += v * v;
        }
      n += static_cast<double>(x.rows());
    }
    for (std::size_t c = 0; c < dims; ++c) {
      const double mean = sum[c] / n;
      block.mean[c] = static_cast<float>(mean);
      block.stddev[c] = static_cast<float>(std::max(1e-3, std::sqrt(std::max(0.0, sq[c] / n - mean * mean))));
    }
  }
}

namespace detail {

inline std::mt19937_64 epoch_rng(std::uint64_t seed, int stage, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

struct ComponentMeans {
  std::vector<std::string> names;
  std::vector<double> sums;
  double weight = 0.0;

  void add(const LossBreakdown& b, double w) {
    if (names.empty()) {
      names.push_back("total");
      for (const auto& [k, v] : b.components) names.push_back(k);
      sums.assign(names.size(), 0.0);
    }
    sums[0] += w * b.total;
    for (std::size_t i = 0; i < b.components.size(); ++i) sums[i + 1] += w * b.components[i].second;
    weight += w;
  }

  EpochLoss finish(int epoch) const {
    EpochLoss e{epoch, {}};
    for (std::size_t i = 0; i < names.size(); ++i) e.components.emplace_back(names[i], sums[i] / weight);
    return e;
  }
};

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Stage-1 (NL) training: random fixed-length crops, RAdam, KL weight warmed up linearly over the
/// first kl_warmup_fraction of steps. Runs epochs [state.epochs_done, cfg.epochs).
template <typename T>
LossCurve train_stage1(CdvaeModel<T>& m, const std::vector<Stage1Utterance>& corpus, const TrainConfig& cfg,
                       TrainingState<T>& state, const EpochCallback& on_epoch = {}) {
  validate(cfg);
  require(!corpus.empty(), ErrorKind::InvalidInput, "stage-1 corpus is empty");
  Eigen::Index min_frames = std::numeric_limits<Eigen::Index>::max();
  for (const auto& u : corpus) {
    require(u.features.size() == m.domains.size(), ErrorKind::InvalidInput, u.utterance_id + ": wrong number of feature domains");
    for (std::size_t d = 0; d < u.features.size(); ++d) {
      require(u.features[d].domain == m.domains[d].domain, ErrorKind::DomainMismatch, u.utterance_id + ": domain order differs");
      require(u.features[d].frames() == u.features[0].frames(), ErrorKind::InvalidInput,
              u.utterance_id + ": domains are not frame-reconciled");
    }
    min_frames = std::min(min_frames, u.features[0].frames());
    m.speaker_code(u.speaker);
  }
  require(min_frames >= 1, ErrorKind::InvalidInput, "stage-1 corpus contains an empty utterance");
  if (state.stage1.epochs_done == 0 && state.stage1.optimizer.step == 0) fit_normalization(m, corpus);

  const Eigen::Index len = std::min<Eigen::Index>(cfg.segment_length, min_frames);
  const auto batches = (corpus.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  const double total_steps = static_cast<double>(batches) * cfg.epochs;
  const double warmup = std::max(1.0, cfg.kl_warmup_fraction * total_steps);
  auto& opt = state.stage1.optimizer;
  opt.lr = cfg.lr;
  auto params = m.nl_parameters();

  LossCurve curve;
  for (int epoch = state.stage1.epochs_done; epoch < cfg.epochs; ++epoch) {
    auto rng = detail::epoch_rng(cfg.seed, 1, epoch);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    detail::ComponentMeans means;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto first = b * static_cast<std::size_t>(cfg.batch_size);
      const auto last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(first), order.begin() + static_cast<std::ptrdiff_t>(last));
      std::vector<Eigen::Index> starts;
      std::vector<SpeakerCode> codes;
      for (auto i : items) {
        std::uniform_int_distribution<Eigen::Index> pick(0, corpus[i].features[0].frames() - len);
        starts.push_back(pick(rng));
        codes.push_back(m.speaker_code(corpus[i].speaker));
      }
      std::vector<Tensor<T>> inputs;
      for (std::size_t d = 0; d < m.domains.size(); ++d) {
        std::vector<const FeatureMatrix*> seqs;
        for (auto i : items) seqs.push_back(&corpus[i].features[d].data);
        inputs.push_back(batch_tensor<T>(seqs, starts, len, m.domains[d]));
      }
      const double step = static_cast<double>(opt.step);
      const double kl_weight = cfg.weights.kl * std::min(1.0, (step + 1.0) / warmup);

      detail::zero_grads(params);
      Graph<T> g;
      auto loss = stage1_graph(g, m, inputs, speaker_tensor<T>(codes, static_cast<std::size_t>(len)), cfg.weights, kl_weight, &rng);
      g.backward(loss.total);
      ad::radam_step(params, opt);
      means.add(loss.values(), static_cast<double>(items.size()));
    }
    state.stage1.epochs_done = epoch + 1;
    curve.push_back(means.finish(epoch + 1));
    if (on_epoch) on_epoch(curve.back());
  }
  state.stage1_done = true;
  return curve;
}

/// Stage-2 (EL) training: only the EL encoder is updated (plus the first-domain decoder when
/// cfg.unfreeze_decoder). The EL encoder starts as a copy of the first-domain NL encoder.
template <typename T>
LossCurve train_stage2(CdvaeModel<T>& m, const std::vector<Stage2Pair>& pairs, const TrainConfig& cfg, TrainingState<T>& state,
                       const EpochCallback& on_epoch = {}) {
  validate(cfg);
  if (!state.stage1_done) fail(ErrorKind::NotPretrained, "stage-2 training requires a stage-1 model");
  require(!pairs.empty(), ErrorKind::InvalidInput, "stage-2 corpus is empty");
  Eigen::Index min_frames = std::numeric_limits<Eigen::Index>::max();
  for (const auto& p : pairs) {
    require(p.el.frames() == p.nl.frames(), ErrorKind::InvalidInput, p.utterance_id + ": EL/NL frames are not aligned");
    require(p.el.domain == m.domains.front().domain && p.nl.domain == m.domains.front().domain, ErrorKind::DomainMismatch,
            p.utterance_id + ": stage-2 pairs must use the first model domain");
    min_frames = std::min(min_frames, p.el.frames());
    m.speaker_code(p.target_speaker);
  }
  require(min_frames >= 1, ErrorKind::InvalidInput, "stage-2 corpus contains an empty pair");
  if (!m.el_encoder) init_el_encoder(m);

  auto params = m.el_encoder->parameters();
  if (cfg.unfreeze_decoder)
    for (auto* p : m.domains.front().decoder.parameters()) params.push_back(p);
  auto& opt = state.stage2.optimizer;
  opt.lr = cfg.lr;
  const Eigen::Index len = std::min<Eigen::Index>(cfg.segment_length, min_frames);
  const auto batches = (pairs.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  const auto& block = m.domains.front();

  LossCurve curve;
  for (int epoch = state.stage2.epochs_done; epoch < cfg.epochs; ++epoch) {
    auto rng = detail::epoch_rng(cfg.seed, 2, epoch);
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    detail::ComponentMeans means;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto first = b * static_cast<std::size_t>(cfg.batch_size);
      const auto last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const FeatureMatrix*> el, nl;
      std::vector<Eigen::Index> starts;
      std::vector<SpeakerCode> codes;
      for (auto k = first; k < last; ++k) {
        const auto& p = pairs[order[k]];
        std::uniform_int_distribution<Eigen::Index> pick(0, p.el.frames() - len);
        starts.push_back(pick(rng));
        el.push_back(&p.el.data);
        nl.push_back(&p.nl.data);
        codes.push_back(m.speaker_code(p.target_speaker));
      }
      detail::zero_grads(params);
      Graph<T> g;
      auto loss = stage2_graph(g, m, batch_tensor<T>(el, starts, len, block), batch_tensor<T>(nl, starts, len, block),
                               speaker_tensor<T>(codes, static_cast<std::size_t>(len)), cfg.weights, cfg.unfreeze_decoder);
      g.backward(loss.total);
      ad::radam_step(params, opt);
      means.add(loss.values(), static_cast<double>(last - first));
    }
    state.stage2.epochs_done = epoch + 1;
    curve.push_back(means.finish(epoch + 1));
    if (on_epoch) on_epoch(curve.back());
  }
  return curve;
}

/// `epoch TAB component TAB value` per line.
inline void write_loss_log(const LossCurve& curve, const std::filesystem::path& path, bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot write loss log " + path.string());
  out.precision(9);
  for (const auto& e : curve)
    for (const auto& [name, value] : e.components) out << e.epoch << '\t' << name << '\t' << value << '\n';
}

}  // namespace elvc::cdvae
