#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "elvckit/error.hpp"

namespace elvc {

/// Mono PCM audio, nominal range [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

inline void validate_audio(const AudioBuffer& audio) {
  require(audio.sample_rate > 0, ErrorKind::InvalidInput, "sample_rate must be positive");
  require(!audio.samples.empty(), ErrorKind::InvalidInput, "audio is empty");
  for (double s : audio.samples)
    require(std::isfinite(s), ErrorKind::InvalidInput, "audio contains a non-finite sample");
}

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  auto u = static_cast<std::uint64_t>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::span<const unsigned char> bytes, std::size_t offset) {
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::uint64_t>(bytes[offset + i]) << (8 * i);
  return static_cast<T>(u);
}

inline std::vector<unsigned char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

// Write-temp-then-rename so readers never observe a partial file.
template <typename Writer>
void atomic_write(const std::filesystem::path& path, Writer&& writer) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

}  // namespace detail

/// Reads a mono 16-bit PCM RIFF/WAVE file.
inline AudioBuffer read_wav(const std::filesystem::path& path) {
  auto bytes = detail::read_all_bytes(path);
  auto bad = [&](const std::string& why) { fail(ErrorKind::IoError, path.string() + ": " + why); };
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    bad("not a RIFF/WAVE file");

  std::size_t pos = 12;
  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    std::string id(bytes.begin() + pos, bytes.begin() + pos + 4);
    auto len = detail::get_le<std::uint32_t>(bytes, pos + 4);
    std::size_t body = pos + 8;
    if (body + len > bytes.size()) bad("truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (len < 16) bad("short fmt chunk");
      format = detail::get_le<std::uint16_t>(bytes, body);
      channels = detail::get_le<std::uint16_t>(bytes, body + 2);
      rate = detail::get_le<std::uint32_t>(bytes, body + 4);
      bits = detail::get_le<std::uint16_t>(bytes, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) bad("data chunk before fmt chunk");
      if (format != 1 || bits != 16 || channels != 1) bad("only mono 16-bit PCM is supported");
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      audio.samples.resize(len / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        auto v = static_cast<std::int16_t>(detail::get_le<std::uint16_t>(bytes, body + 2 * i));
        audio.samples[i] = v / 32768.0;
      }
      return audio;
    }
    pos = body + len + (len & 1);
  }
  fail(ErrorKind::IoError, path.string() + ": no data chunk");
}

inline void write_wav(const AudioBuffer& audio, const std::filesystem::path& path) {
  require(audio.sample_rate > 0, ErrorKind::InvalidInput, "sample_rate must be positive");
  auto n = static_cast<std::uint32_t>(audio.samples.size());
  detail::atomic_write(path, [&](std::ostream& out) {
    out.write("RIFF", 4);
    detail::put_le<std::uint32_t>(out, 36 + 2 * n);
    out.write("WAVEfmt ", 8);
    detail::put_le<std::uint32_t>(out, 16);
    detail::put_le<std::uint16_t>(out, 1);
    detail::put_le<std::uint16_t>(out, 1);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
    detail::put_le<std::uint16_t>(out, 2);
    detail::put_le<std::uint16_t>(out, 16);
    out.write("data", 4);
    detail::put_le<std::uint32_t>(out, 2 * n);
    for (double s : audio.samples) {
      double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
      detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0))));
    }
  });
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel (16 zero crossings per side).
inline AudioBuffer resample(const AudioBuffer& audio, int target_rate) {
  require(target_rate > 0 && audio.sample_rate > 0, ErrorKind::InvalidInput, "sample rates must be positive");
  if (target_rate == audio.sample_rate) return audio;
  constexpr int kZeroCrossings = 16;
  constexpr double kBeta = 8.0;
  const double ratio = static_cast<double>(target_rate) / audio.sample_rate;
  const double cutoff = std::min(1.0, ratio) * 0.97;
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
  const auto& x = audio.samples;
  const auto in_len = static_cast<std::ptrdiff_t>(x.size());

  AudioBuffer out;
  out.sample_rate = target_rate;
  auto out_len = static_cast<std::size_t>(std::floor(x.size() * ratio));
  out.samples.resize(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    double t = n / ratio;
    auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - half_width));
    auto hi = static_cast<std::ptrdiff_t>(std::floor(t + half_width));
    double acc = 0.0;
    for (auto k = std::max<std::ptrdiff_t>(lo, 0); k <= std::min(hi, in_len - 1); ++k) {
      double d = t - static_cast<double>(k);
      double u = d / half_width;
      double w = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      double arg = std::numbers::pi * cutoff * d;
      double sinc = d == 0.0 ? 1.0 : std::sin(arg) / arg;
      acc += x[static_cast<std::size_t>(k)] * cutoff * sinc * w;
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace elvc
