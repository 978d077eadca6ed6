#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "elvckit/cdfx.hpp"
#include "elvckit/manifest.hpp"
#include "elvckit/stft.hpp"

namespace elvc::synth {

/// Formant frequencies (Hz) of the toy vowel inventory.
inline constexpr std::array<std::array<double, 3>, 6> kVowels{{
    {730, 1090, 2440},
    {270, 2290, 3010},
    {300, 870, 2240},
    {530, 1840, 2480},
    {570, 840, 2410},
    {440, 1020, 2240},
}};

struct SpeakerStyle {
  std::string id;
  double f0 = 120.0;             // mean F0 in Hz; flat_f0 keeps it constant
  double f0_swing = 0.15;        // relative intonation excursion per word
  double formant_scale = 1.0;
  double tempo = 1.0;            // word duration multiplier
  double tilt = 1.0;             // harmonic amplitude ~ k^-tilt
  bool flat_f0 = false;
  double buzz_noise = 0.0;       // broadband noise level relative to the voiced signal
  double low_cut_hz = 0.0;       // harmonics below this are attenuated
};

inline SpeakerStyle nl_speaker_a() { return {"nl_a", 120.0, 0.15, 1.0, 1.0, 1.2, false, 0.0, 0.0}; }
inline SpeakerStyle nl_speaker_b() { return {"nl_b", 210.0, 0.18, 1.17, 0.92, 1.1, false, 0.0, 0.0}; }
inline SpeakerStyle el_speaker() { return {"el_a", 100.0, 0.0, 1.0, 1.12, 0.55, true, 0.03, 450.0}; }

struct Word {
  int vowel = 0;
  double seconds = 0.3;
  double contour = 0.0;  // in [-1, 1], rising or falling intonation
};

struct Sentence {
  std::vector<Word> words;
};

struct CorpusConfig {
  int sample_rate = 16000;
  double seconds = 3.0;
  int train_sentences = 10;
  int test_sentences = 2;
  int ssl_dims = 768;
  int hop_size = 320;
  std::uint64_t seed = 1;
};

/// Deterministic sentence script shared by every speaker.
inline std::vector<Sentence> make_script(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  std::uniform_int_distribution<int> n_words(4, 6), vowel(0, static_cast<int>(kVowels.size()) - 1);
  std::uniform_real_distribution<double> dur(0.22, 0.38), contour(-1.0, 1.0);
  std::vector<Sentence> out(static_cast<std::size_t>(count));
  for (auto& s : out) {
    const int n = n_words(rng);
    for (int w = 0; w < n; ++w) s.words.push_back({vowel(rng), dur(rng), contour(rng)});
  }
  return out;
}

struct Rendered {
  AudioBuffer audio;
  WordBoundaries boundaries;
};

namespace detail {

inline double formant_gain(double freq, const std::array<double, 3>& formants, double scale) {
  double g = 0.02;
  for (std::size_t i = 0; i < formants.size(); ++i) {
    const double fc = formants[i] * scale;
    const double bw = 60.0 + 0.06 * fc;
    const double x = (freq - fc) / bw;
    g += std::pow(0.7, static_cast<double>(i)) / (1.0 + x * x);
  }
  return g;
}

}  // namespace detail

/// Additive harmonic synthesis: one vowel per word, short low-level noise gaps between words.
inline Rendered render(const Sentence& sentence, const SpeakerStyle& style, const CorpusConfig& cfg, std::uint64_t seed) {
  const int sr = cfg.sample_rate;
  const auto total = static_cast<std::size_t>(std::lround(cfg.seconds * sr));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);

  double speech = 0.0;
  std::vector<double> durations;
  for (const auto& w : sentence.words) {
    durations.push_back(w.seconds * style.tempo * (style.flat_f0 ? jitter(rng) : 1.0));
    speech += durations.back();
  }
  const double lead = 0.15;
  const double gap = std::max(0.03, (cfg.seconds - 2 * lead - speech) / std::max<double>(1.0, sentence.words.size() - 1.0));
  const double fit = std::min(1.0, (cfg.seconds - 2 * lead - gap * (sentence.words.size() - 1.0)) / speech);

  Rendered r;
  r.audio.sample_rate = sr;
  r.audio.samples.assign(total, 0.0);
  for (auto& s : r.audio.samples) s = 1e-3 * noise(rng);

  double t0 = lead;
  double phase_base = 0.0;
  for (std::size_t wi = 0; wi < sentence.words.size(); ++wi) {
    const auto& w = sentence.words[wi];
    const auto start = static_cast<std::size_t>(std::lround(t0 * sr));
    const auto end = std::min(total, static_cast<std::size_t>(std::lround((t0 + durations[wi] * fit) * sr)));
    const auto len = end - start;
    std::vector<double> f0(len);
    for (std::size_t n = 0; n < len; ++n) {
      const double u = static_cast<double>(n) / static_cast<double>(len);
      f0[n] = style.flat_f0 ? style.f0 : style.f0 * (1.0 + style.f0_swing * w.contour * (u - 0.5) * 2.0 - 0.05 * wi / 5.0);
    }
    const double top = *std::max_element(f0.begin(), f0.end());
    const int harmonics = static_cast<int>(0.45 * sr / top);
    std::vector<double> phase(static_cast<std::size_t>(harmonics), phase_base);
    for (std::size_t n = 0; n < len; ++n) {
      const double u = static_cast<double>(n) / static_cast<double>(len);
      const double env = std::sin(std::numbers::pi * std::min(1.0, std::min(u, 1.0 - u) * 8.0) / 2.0);
      double v = 0.0;
      for (int k = 1; k <= harmonics; ++k) {
        const double fk = k * f0[n];
        auto& ph = phase[static_cast<std::size_t>(k - 1)];
        ph += 2.0 * std::numbers::pi * fk / sr;
        double a = detail::formant_gain(fk, kVowels[static_cast<std::size_t>(w.vowel)], style.formant_scale) *
                   std::pow(static_cast<double>(k), -style.tilt);
        if (fk < style.low_cut_hz) a *= 0.1;
        v += a * std::sin(ph);
      }
      r.audio.samples[start + n] += 0.25 * env * v;
    }
    phase_base = std::fmod(phase.front(), 2.0 * std::numbers::pi);
    r.boundaries.segments.push_back({static_cast<std::int64_t>(start), static_cast<std::int64_t>(end), "v" + std::to_string(w.vowel)});
    t0 += durations[wi] * fit + gap;
  }
  if (style.buzz_noise > 0.0)
    for (auto& s : r.audio.samples) s += style.buzz_noise * noise(rng);
  double peak = 0.0;
  for (double s : r.audio.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.95)
    for (auto& s : r.audio.samples) s *= 0.95 / peak;
  return r;
}

/// Stand-in for self-supervised embeddings: a fixed Gaussian projection of the 400/320 log power
/// spectrum to `dims` channels. The projection depends only on `dims`.
inline FeatureSequence ssl_standin(const AudioBuffer& audio, int dims = 768, int hop = 320) {
  const StftConfig cfg{400, hop};
  auto spec = stft(audio, cfg);
  const auto bins = spec.bins.cols();
  std::mt19937_64 rng(0x55D1C0DEull + static_cast<std::uint64_t>(dims));
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd proj(bins, dims);
  for (Eigen::Index i = 0; i < bins; ++i)
    for (Eigen::Index j = 0; j < dims; ++j) proj(i, j) = n01(rng) / std::sqrt(static_cast<double>(bins));
  Eigen::MatrixXd logpow = (spec.bins.array().abs2() + 1e-10).log().matrix();
  Eigen::MatrixXd emb = (logpow * proj) / 10.0;
  FeatureSequence out;
  out.domain = FeatureDomain::SSL;
  out.hop_size = hop;
  out.sample_rate = audio.sample_rate;
  out.data = emb.cast<float>();
  return out;
}

struct CorpusPaths {
  std::filesystem::path nl_train, nl_test, el_train, el_test;
};

inline std::string utterance_name(const SpeakerStyle& s, int sentence) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_s%02d", sentence);
  return s.id + buf;
}

/// Writes wav/, boundaries/, ssl/ and four manifests under `root`. The EL utterances pair with
/// speaker nl_a; every NL utterance of the training sentences goes to nl_train.
inline CorpusPaths generate_corpus(const std::filesystem::path& root, const CorpusConfig& cfg) {
  namespace fs = std::filesystem;
  require(cfg.train_sentences >= 1 && cfg.test_sentences >= 0, ErrorKind::InvalidInput, "sentence counts must be positive");
  for (const char* d : {"wav", "boundaries", "ssl"}) fs::create_directories(root / d);
  const int n = cfg.train_sentences + cfg.test_sentences;
  const auto script = make_script(n, cfg.seed);
  const std::array<SpeakerStyle, 3> speakers{nl_speaker_a(), nl_speaker_b(), el_speaker()};
  std::vector<UtteranceManifest> nl_train, nl_test, el_train, el_test;
  for (int s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < speakers.size(); ++k) {
      const auto& sp = speakers[k];
      const auto id = utterance_name(sp, s);
      auto r = render(script[static_cast<std::size_t>(s)], sp, cfg, cfg.seed * 1000003ull + static_cast<std::uint64_t>(s) * 31 + k);
      write_wav(r.audio, root / "wav" / (id + ".wav"));
      write_boundaries(r.boundaries, root / "boundaries" / (id + ".txt"));
      auto ssl = ssl_standin(r.audio, cfg.ssl_dims, cfg.hop_size);
      ssl.utterance_id = id;
      write_features(ssl, root / "ssl" / (id + ".ssl.cdfx"));
      UtteranceManifest row{id, sp.id, fs::path("wav") / (id + ".wav"), std::nullopt, fs::path("boundaries") / (id + ".txt")};
      const bool train = s < cfg.train_sentences;
      if (sp.flat_f0) {
        row.parallel_id = utterance_name(speakers[0], s);
        (train ? el_train : el_test).push_back(row);
      } else if (train) {
        nl_train.push_back(row);
      } else if (k == 0) {
        nl_test.push_back(row);
      }
    }
  }
  CorpusPaths p{root / "nl_train.tsv", root / "nl_test.tsv", root / "el_train.tsv", root / "el_test.tsv"};
  write_manifest(nl_train, p.nl_train);
  write_manifest(nl_test, p.nl_test);
  write_manifest(el_train, p.el_train);
  write_manifest(el_test, p.el_test);
  return p;
}

}  // namespace elvc::synth
