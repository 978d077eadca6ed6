#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "elvckit/audio.hpp"
#include "elvckit/f0.hpp"
#include "elvckit/features.hpp"
#include "elvckit/griffin_lim.hpp"
#include "elvckit/reconcile.hpp"
#include "oracles.hpp"

using namespace elvc;
namespace fs = std::filesystem;

namespace {

AudioBuffer noise(std::size_t n, std::uint64_t seed, int sr = 16000) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(n);
  for (auto& s : a.samples) s = u(rng);
  return a;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("elvckit_dsp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Stft, MatchesDirectDft) {
  for (auto [frame, hop] : {std::pair{400, 320}, std::pair{1024, 256}, std::pair{64, 16}}) {
    auto a = noise(3000, frame);
    auto spec = stft(a, {frame, hop});
    auto ref = oracle::stft(a.samples, frame, hop);
    ASSERT_EQ(spec.bins.rows(), static_cast<Eigen::Index>(ref.size()));
    ASSERT_EQ(spec.bins.cols(), frame / 2 + 1);
    double worst = 0;
    for (std::size_t k = 0; k < ref.size(); ++k)
      for (std::size_t b = 0; b < ref[k].size(); ++b) worst = std::max(worst, std::abs(spec.bins(k, b) - ref[k][b]));
    EXPECT_LT(worst, 1e-9) << frame << "/" << hop;
  }
}

TEST(Stft, FrameCountIsLengthOverHop) {
  EXPECT_EQ(stft(noise(16000, 1), {400, 320}).bins.rows(), 50);
  EXPECT_EQ(stft(noise(25600, 1), {1024, 256}).bins.rows(), 100);
  EXPECT_EQ(stft(noise(320, 1), {400, 320}).bins.rows(), 1);
}

TEST(Stft, RejectsBadInput) {
  auto short_audio = noise(100, 1);
  EXPECT_THROW(stft(short_audio, {400, 320}), Error);
  auto a = noise(1000, 2);
  a.samples[10] = std::nan("");
  EXPECT_THROW(stft(a, {400, 320}), Error);
  EXPECT_THROW(stft(noise(1000, 2), {400, 0}), Error);
  EXPECT_THROW(stft(noise(1000, 2), {200, 320}), Error);
}

TEST(Stft, InverseRecoversSignal) {
  auto a = noise(4000, 9);
  StftConfig cfg{400, 100};
  auto padded = pad_reflect(a.samples, cfg.pad_left(), cfg.pad_right());
  auto bins = stft_unpadded(padded, cfg);
  auto back = istft_unpadded(bins, cfg, padded.size());
  double worst = 0;
  for (std::size_t i = cfg.frame_size; i + cfg.frame_size < padded.size(); ++i) worst = std::max(worst, std::abs(back[i] - padded[i]));
  EXPECT_LT(worst, 1e-9);
}

TEST(Mel, MatchesOracle) {
  auto a = noise(8000, 3);
  auto mel = extract_mel(a, {400, 320});
  auto ref = oracle::log_mel(a.samples, 400, 320, 80, 16000);
  ASSERT_EQ(mel.dims(), 80);
  ASSERT_EQ(mel.frames(), static_cast<Eigen::Index>(ref.size()));
  EXPECT_EQ(mel.domain, FeatureDomain::Mel);
  EXPECT_EQ(mel.hop_size, 320);
  for (std::size_t k = 0; k < ref.size(); ++k)
    for (int m = 0; m < 80; ++m) ASSERT_NEAR(mel.data(k, m), ref[k][m], 1e-4 * std::max(1.0, std::abs(ref[k][m])));
}

TEST(Mel, LegacyConfigHas80Mels) {
  auto mel = extract_mel(noise(25600, 4), {1024, 256});
  EXPECT_EQ(mel.frames(), 100);
  EXPECT_EQ(mel.dims(), 80);
}

TEST(Mel, EmptyFilterIsRejected) {
  EXPECT_THROW(mel_filterbank(33, 80, 16000, 0.0, 8000.0), Error);
  EXPECT_NO_THROW(mel_filterbank(201, 80, 16000, 0.0, 8000.0));
}

TEST(Mel, HzMelInverse) {
  for (double hz : {0.0, 100.0, 700.0, 4000.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
}

TEST(Dct, MatchesDirectSum) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (std::size_t n : {1u, 2u, 7u, 64u, 80u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = n01(rng);
    auto got = dct_ii(x);
    auto want = oracle::dct(x);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(got[k], want[k], 1e-10) << n << " " << k;
  }
}

TEST(Mcc, IsDctOfLogMel) {
  auto mel = extract_mel(noise(6400, 6), {400, 320});
  auto mcc = mcc_from_mel(mel);
  EXPECT_EQ(mcc.dims(), 25);
  EXPECT_EQ(mcc.domain, FeatureDomain::MCC);
  for (Eigen::Index f = 0; f < mel.frames(); ++f) {
    std::vector<double> row(80);
    for (int d = 0; d < 80; ++d) row[d] = mel.data(f, d);
    auto c = oracle::dct(row);
    for (int k = 0; k < 25; ++k) ASSERT_NEAR(mcc.data(f, k), c[k], 1e-4 * std::max(1.0, std::abs(c[k])));
  }
  EXPECT_THROW(mcc_from_mel(mcc), Error);
}

TEST(Envelope, ShapeAndSmoothness) {
  auto a = AudioBuffer{oracle::sine(200.0, 1.0, 16000), 16000};
  auto sp = extract_envelope(a, {1024, 320});
  EXPECT_EQ(sp.dims(), 513);
  EXPECT_EQ(sp.frames(), 50);
  auto spec = stft(a, {1024, 320});
  auto raw = log_magnitude(spec);
  double raw_tv = 0, env_tv = 0;
  for (Eigen::Index b = 1; b < raw.cols(); ++b) {
    raw_tv += std::abs(raw(25, b) - raw(25, b - 1));
    env_tv += std::abs(sp.data(25, b) - sp.data(25, b - 1));
  }
  EXPECT_LT(env_tv, raw_tv);
}

TEST(Envelope, ConstantLogSpectrumIsFixedPoint) {
  RealMatrix flat = RealMatrix::Constant(2, 513, -3.0);
  auto sm = cepstral_smooth(flat, 1024);
  EXPECT_LT((sm.array() + 3.0).abs().maxCoeff(), 1e-9);
}

TEST(Wav, RoundTripQuantised) {
  auto dir = temp_dir("wav");
  auto a = noise(1234, 7);
  write_wav(a, dir / "x.wav");
  auto b = read_wav(dir / "x.wav");
  ASSERT_EQ(b.samples.size(), a.samples.size());
  EXPECT_EQ(b.sample_rate, 16000);
  for (std::size_t i = 0; i < a.samples.size(); ++i) EXPECT_NEAR(a.samples[i], b.samples[i], 1.0 / 32768.0);
  write_wav(b, dir / "y.wav");
  EXPECT_EQ(detail::read_all_bytes(dir / "x.wav"), detail::read_all_bytes(dir / "y.wav"));
}

TEST(Wav, RejectsUnsupported) {
  auto dir = temp_dir("wavbad");
  std::ofstream(dir / "junk.wav") << "not a wave file at all";
  EXPECT_THROW(read_wav(dir / "junk.wav"), Error);
  EXPECT_THROW(read_wav(dir / "missing.wav"), Error);
  auto bytes = [] {
    write_wav(AudioBuffer{{0.1, 0.2}, 16000}, fs::temp_directory_path() / "elvckit_dsp_stereo.wav");
    return detail::read_all_bytes(fs::temp_directory_path() / "elvckit_dsp_stereo.wav");
  }();
  bytes[22] = 2;
  std::ofstream(dir / "stereo.wav", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  try {
    read_wav(dir / "stereo.wav");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(Resample, SineKeepsFrequencyAndAmplitude) {
  AudioBuffer a{oracle::sine(440.0, 1.0, 22050), 22050};
  auto b = resample(a, 16000);
  EXPECT_EQ(b.sample_rate, 16000);
  EXPECT_NEAR(static_cast<double>(b.samples.size()), 16000.0, 1.0);
  auto ref = oracle::sine(440.0, 1.0, 16000);
  double worst = 0;
  for (std::size_t i = 200; i + 200 < std::min(ref.size(), b.samples.size()); ++i) worst = std::max(worst, std::abs(b.samples[i] - ref[i]));
  EXPECT_LT(worst, 5e-3);
}

TEST(Resample, SameRateIsIdentity) {
  auto a = noise(500, 8);
  EXPECT_EQ(resample(a, 16000).samples, a.samples);
}

TEST(F0, TracksSines) {
  for (double hz : {100.0, 147.0, 220.0, 350.0}) {
    auto track = estimate_f0(AudioBuffer{oracle::sine(hz, 1.0, 16000), 16000}, 320, 70.0, 400.0);
    ASSERT_EQ(track.size(), 50u);
    int good = 0;
    for (double v : track.values) good += std::abs(v - hz) <= 1.0;
    EXPECT_GE(good, 48) << hz;
  }
}

TEST(F0, PulseTrainMedian) {
  std::vector<double> x(16000, 0.0);
  for (std::size_t i = 0; i < x.size(); i += 16000 / 110) x[i] = 0.8;
  // 16000/110 is not integral: the train is 110.34 Hz
  auto track = estimate_f0(AudioBuffer{x, 16000}, 320, 70.0, 400.0);
  std::vector<double> v;
  for (double f : track.values)
    if (f > 0) v.push_back(f);
  ASSERT_GT(v.size(), 40u);
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  EXPECT_NEAR(v[v.size() / 2], 110.0, 2.0);
}

TEST(F0, SilenceAndNoiseAreUnvoiced) {
  auto silent = estimate_f0(AudioBuffer{std::vector<double>(16000, 0.0), 16000}, 320, 70.0, 400.0);
  for (double v : silent.values) EXPECT_EQ(v, 0.0);
  auto noisy = estimate_f0(noise(16000, 11), 320, 70.0, 400.0);
  int voiced = 0;
  for (double v : noisy.values) voiced += v > 0.0;
  EXPECT_LT(voiced, 10);
}

TEST(F0, RejectsBadRange) {
  auto a = AudioBuffer{oracle::sine(100.0, 1.0, 16000), 16000};
  EXPECT_THROW(estimate_f0(a, 320, 400.0, 70.0), Error);
  F0Config cfg;
  cfg.window_size = 200;
  EXPECT_THROW(estimate_f0(a, cfg), Error);
}

TEST(GriffinLim, ObjectiveNeverIncreases) {
  auto a = noise(8000, 12);
  auto mel = extract_mel(a, {400, 320});
  auto r = griffin_lim(mel, {400, 320}, 30, 0);
  ASSERT_EQ(r.objective.size(), 30u);
  for (std::size_t k = 1; k < r.objective.size(); ++k) EXPECT_LE(r.objective[k], r.objective[k - 1] * (1 + 1e-12));
  EXPECT_EQ(r.audio.samples.size(), static_cast<std::size_t>(mel.frames() * 320));
  EXPECT_EQ(r.audio.sample_rate, 16000);
}

TEST(GriffinLim, SineKeepsPitch) {
  AudioBuffer a{oracle::sine(440.0, 1.0, 16000), 16000};
  auto mel = extract_mel(a, {400, 320});
  for (int up : {1, 4}) {
    GriffinLimOptions opt{60, 0, PhaseInit::advance, MelInversion::nnls, up};
    auto r = griffin_lim(mel, {400, 320}, opt);
    EXPECT_EQ(r.audio.samples.size(), 16000u);
    auto track = estimate_f0(r.audio, 320, 70.0, 500.0);
    std::vector<double> v;
    for (double f : track.values)
      if (f > 0) v.push_back(f);
    ASSERT_GT(v.size(), 25u);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    EXPECT_NEAR(v[v.size() / 2], 440.0, 5.0) << up;
  }
}

TEST(GriffinLim, NnlsInversionReproducesRealMel) {
  auto a = noise(8000, 15);
  auto mel = extract_mel(a, {400, 320});
  auto mag = mel_to_magnitude(mel, {400, 320}, MelInversion::nnls, 5000);
  ASSERT_GE(mag.minCoeff(), 0.0);
  auto fb = mel_filterbank(201, 80, 16000, 0.0, 8000.0);
  RealMatrix again = ((mag.array().square().matrix() * fb.transpose()).array() + kLogEpsilon).log().matrix();
  EXPECT_LT((again - mel.data.cast<double>()).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(GriffinLim, UpsampledFramesInterpolate) {
  FeatureSequence s;
  s.hop_size = 320;
  s.data.resize(3, 1);
  s.data << 0.0f, 4.0f, 8.0f;
  auto u = upsample_frames(s, 4);
  ASSERT_EQ(u.frames(), 12);
  EXPECT_EQ(u.hop_size, 80);
  std::vector<float> expect{0, 0, 0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8, 8};
  for (int k = 0; k < 12; ++k) EXPECT_FLOAT_EQ(u.data(k, 0), expect[k]) << k;
  EXPECT_THROW(upsample_frames(s, 3), Error);
}

TEST(GriffinLim, ObjectiveNeverIncreasesWithOptions) {
  auto mel = extract_mel(noise(6000, 16), {400, 320});
  for (auto init : {PhaseInit::zero, PhaseInit::random, PhaseInit::advance}) {
    GriffinLimOptions opt{25, 3, init, MelInversion::nnls, 4};
    auto r = griffin_lim(mel, {400, 320}, opt);
    for (std::size_t k = 1; k < r.objective.size(); ++k) EXPECT_LE(r.objective[k], r.objective[k - 1] * (1 + 1e-12));
  }
}

TEST(GriffinLim, RandomInitIsSeeded) {
  auto mel = extract_mel(noise(4000, 13), {400, 320});
  GriffinLimOptions opt{10, 5, PhaseInit::random};
  auto a = griffin_lim(mel, {400, 320}, opt);
  auto b = griffin_lim(mel, {400, 320}, opt);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
  opt.seed = 6;
  EXPECT_NE(griffin_lim(mel, {400, 320}, opt).audio.samples, a.audio.samples);
}

TEST(GriffinLim, RefusesNonMel) {
  auto mel = extract_mel(noise(4000, 14), {400, 320});
  auto ssl = mel;
  ssl.domain = FeatureDomain::SSL;
  try {
    griffin_lim(ssl, {400, 320}, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainMismatch);
  }
}

TEST(Reconcile, HopConversion) {
  FeatureSequence s;
  s.domain = FeatureDomain::Mel;
  s.hop_size = 256;
  s.data.resize(100, 2);
  for (int k = 0; k < 100; ++k) {
    s.data(k, 0) = 1.5f;
    s.data(k, 1) = static_cast<float>(k * 256 + 128);
  }
  auto r = resample_frames(s, 320);
  ASSERT_EQ(r.frames(), 80);
  EXPECT_EQ(r.hop_size, 320);
  for (int k = 0; k < 80; ++k) {
    EXPECT_FLOAT_EQ(r.data(k, 0), 1.5f);
    const double t = k * 320 + 160;
    if (t >= 128 && t <= 99 * 256 + 128) {
      EXPECT_NEAR(r.data(k, 1), t, 1e-2);
    }
  }
}

TEST(Reconcile, SharedGrid) {
  auto a = extract_mel(noise(16000, 15), {400, 320});
  auto b = extract_mel(noise(16000, 15), {1024, 256});
  auto [x, y] = reconcile_frames(a, b);
  EXPECT_EQ(x.frames(), y.frames());
  EXPECT_EQ(x.hop_size, 320);
  EXPECT_EQ(y.hop_size, 320);
}
