#pragma once

// Slow, direct reference implementations used to check the library.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
using Mat = std::vector<std::vector<double>>;

inline std::vector<cplx> dft(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<cplx> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    cplx acc = 0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(t) / double(n));
    out[k] = acc;
  }
  return out;
}

inline std::vector<double> hann(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

/// Reflect padding without repeating the edge sample.
inline double reflect_at(const std::vector<double>& x, long i) {
  const long n = static_cast<long>(x.size());
  if (n == 1) return x[0];
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? x[i] : x[period - i];
}

/// Frame k covers padded samples [k*hop, k*hop + frame) with (frame - hop)/2 reflected samples in front.
inline std::vector<std::vector<cplx>> stft(const std::vector<double>& x, int frame, int hop) {
  const long left = (frame - hop) / 2;
  const auto frames = x.size() / hop;
  const auto w = hann(frame);
  std::vector<std::vector<cplx>> out;
  for (std::size_t k = 0; k < frames; ++k) {
    std::vector<double> buf(frame);
    for (int t = 0; t < frame; ++t) buf[t] = w[t] * reflect_at(x, static_cast<long>(k * hop) + t - left);
    out.push_back(dft(buf));
  }
  return out;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular HTK filters with unit peak, rows = filters, cols = FFT bins.
inline Mat mel_filters(int bins, int n_mels, int sr) {
  const int n_fft = 2 * (bins - 1);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) edges[i] = mel_to_hz(hz_to_mel(sr / 2.0) * i / (n_mels + 1));
  Mat fb(n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < n_mels; ++m)
    for (int b = 0; b < bins; ++b) {
      const double f = double(b) * sr / n_fft;
      const double up = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const double down = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      fb[m][b] = std::max(0.0, std::min(up, down));
    }
  return fb;
}

inline Mat log_mel(const std::vector<double>& x, int frame, int hop, int n_mels, int sr) {
  auto spec = stft(x, frame, hop);
  auto fb = mel_filters(frame / 2 + 1, n_mels, sr);
  Mat out;
  for (const auto& s : spec) {
    std::vector<double> row(n_mels);
    for (int m = 0; m < n_mels; ++m) {
      double e = 0;
      for (std::size_t b = 0; b < s.size(); ++b) e += fb[m][b] * std::norm(s[b]);
      row[m] = std::log(e + 1e-10);
    }
    out.push_back(row);
  }
  return out;
}

/// Orthonormal DCT-II.
inline std::vector<double> dct(const std::vector<double>& x) {
  const auto n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0;
    for (std::size_t t = 0; t < n; ++t) acc += x[t] * std::cos(std::numbers::pi * (t + 0.5) * k / n);
    out[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

/// Minimum path cost over every monotone path from (0,0) to (m-1,n-1), by explicit enumeration.
inline double exhaustive_dtw(int m, int n, const std::function<double(int, int)>& d) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, int, double)> walk = [&](int i, int j, double acc) {
    acc += d(i, j);
    if (i == m - 1 && j == n - 1) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < m && j + 1 < n) walk(i + 1, j + 1, acc);
    if (i + 1 < m) walk(i + 1, j, acc);
    if (j + 1 < n) walk(i, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

inline double frame_mcd(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t d = 1; d < a.size(); ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return 10.0 / std::log(10.0) * std::sqrt(2.0 * s);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

/// y[b][o][t] = bias[o] + sum_{c,k} w[o][c][k] * x[b][c][t + k - pad], zero outside.
inline std::vector<double> conv1d(const std::vector<double>& x, const std::vector<double>& w, const std::vector<double>& bias,
                                  int B, int C, int T, int O, int K) {
  const int pad = K / 2;
  std::vector<double> y(static_cast<std::size_t>(B) * O * T);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      for (int t = 0; t < T; ++t) {
        double acc = bias[o];
        for (int c = 0; c < C; ++c)
          for (int k = 0; k < K; ++k) {
            const int s = t + k - pad;
            if (s >= 0 && s < T) acc += w[(o * C + c) * K + k] * x[(b * C + c) * T + s];
          }
        y[(b * O + o) * T + t] = acc;
      }
  return y;
}

/// Central differences of a scalar function of `x`.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                            double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// Little-endian CDFX bytes assembled field by field.
inline std::string cdfx_bytes(std::uint8_t domain, std::uint32_t dims, std::uint32_t frames, std::uint32_t hop, std::uint32_t sr,
                              const std::vector<float>& payload, const char* magic = "CDFX", std::uint32_t version = 1) {
  std::string out(magic, 4);
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  u32(version);
  out.push_back(static_cast<char>(domain));
  u32(dims);
  u32(frames);
  u32(hop);
  u32(sr);
  for (float f : payload) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  }
  return out;
}

inline std::vector<double> sine(double hz, double seconds, int sr, double amp = 0.5) {
  std::vector<double> x(static_cast<std::size_t>(seconds * sr));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / sr);
  return x;
}

}  // namespace oracle
