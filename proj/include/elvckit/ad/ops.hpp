#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <numeric>
#include <cmath>
#include <vector>

#include "elvckit/ad/graph.hpp"

namespace elvc::ad {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
  std::size_t batch, c_in, c_out, time, kernel, stride, padding, time_out;
};

// cols((c*K + k), b*T_out + t) = x[b, c, t*stride + k - padding] (zero outside)
template <typename T>
RowMat<T> im2col(const T* x, const ConvGeom& g) {
  RowMat<T> cols = RowMat<T>::Zero(static_cast<Eigen::Index>(g.c_in * g.kernel),
                                   static_cast<Eigen::Index>(g.batch * g.time_out));
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t k = 0; k < g.kernel; ++k) {
      T* row = cols.data() + (c * g.kernel + k) * g.batch * g.time_out;
      for (std::size_t b = 0; b < g.batch; ++b) {
        const T* src = x + (b * g.c_in + c) * g.time;
        for (std::size_t t = 0; t < g.time_out; ++t) {
          const auto pos = static_cast<std::ptrdiff_t>(t * g.stride + k) - static_cast<std::ptrdiff_t>(g.padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.time)) row[b * g.time_out + t] = src[pos];
        }
      }
    }
  return cols;
}

template <typename T>
void col2im_add(const RowMat<T>& cols, const ConvGeom& g, T* dx) {
  for (std::size_t c = 0; c < g.c_in; ++c)
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const T* row = cols.data() + (c * g.kernel + k) * g.batch * g.time_out;
      for (std::size_t b = 0; b < g.batch; ++b) {
        T* dst = dx + (b * g.c_in + c) * g.time;
        for (std::size_t t = 0; t < g.time_out; ++t) {
          const auto pos = static_cast<std::ptrdiff_t>(t * g.stride + k) - static_cast<std::ptrdiff_t>(g.padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.time)) dst[pos] += row[b * g.time_out + t];
        }
      }
    }
}

template <typename T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Batched view of a (C x T) or (B x C x T) tensor.
inline std::array<std::size_t, 3> bct(const Shape& s, const char* what) {
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  fail(ErrorKind::ShapeError, std::string(what) + " expects (C,T) or (B,C,T), got " + shape_str(s));
}

}  // namespace detail

/// 1-D cross-correlation with bias. input (C_in, T) or (B, C_in, T); weight (C_out, C_in, K); bias (C_out).
template <typename T>
Var<T> conv1d(Var<T> input, Var<T> weight, Var<T> bias, int stride = 1, int padding = 0) {
  const auto& xs = input.shape();
  const auto& ws = weight.shape();
  auto [batch, c_in, time] = detail::bct(xs, "conv1d input");
  require(ws.size() == 3 && ws[1] == c_in, ErrorKind::ShapeError,
          "conv1d weight " + shape_str(ws) + " incompatible with input " + shape_str(xs));
  require(bias.shape() == Shape{ws[0]}, ErrorKind::ShapeError, "conv1d bias must have shape (C_out)");
  require(ws[2] % 2 == 1, ErrorKind::ShapeError, "conv1d kernel size must be odd");
  require(stride >= 1 && padding >= 0, ErrorKind::ShapeError, "conv1d needs stride >= 1 and padding >= 0");
  const auto span = static_cast<std::ptrdiff_t>(time) + 2 * padding - static_cast<std::ptrdiff_t>(ws[2]);
  require(span >= 0, ErrorKind::ShapeError, "conv1d output would be empty");
  detail::ConvGeom g{batch, c_in, ws[0], time, ws[2], static_cast<std::size_t>(stride),
                     static_cast<std::size_t>(padding), static_cast<std::size_t>(span) / static_cast<std::size_t>(stride) + 1};

  auto cols = detail::im2col(input.value().data(), g);
  detail::ConstMapMat<T> w(weight.value().data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.c_in * g.kernel));
  detail::RowMat<T> y = w * cols;
  const T* bv = bias.value().data();
  Shape out_shape = xs.size() == 2 ? Shape{g.c_out, g.time_out} : Shape{g.batch, g.c_out, g.time_out};
  Tensor<T> out(out_shape);
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t o = 0; o < g.c_out; ++o)
      for (std::size_t t = 0; t < g.time_out; ++t)
        out[(b * g.c_out + o) * g.time_out + t] = y(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(b * g.time_out + t)) + bv[o];

  const auto xi = input.id(), wi = weight.id(), bi = bias.id();
  return input.graph().op(std::move(out), {xi, wi, bi}, [g, xi, wi, bi](Graph<T>& gr, std::size_t self) {
    const auto& dout = gr.grad(self);
    detail::RowMat<T> dy(static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.batch * g.time_out));
    for (std::size_t b = 0; b < g.batch; ++b)
      for (std::size_t o = 0; o < g.c_out; ++o)
        for (std::size_t t = 0; t < g.time_out; ++t)
          dy(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(b * g.time_out + t)) = dout[(b * g.c_out + o) * g.time_out + t];
    if (gr.requires_grad(bi)) {
      auto& db = gr.grad_ref(bi);
      for (std::size_t o = 0; o < g.c_out; ++o) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < dy.cols(); ++j) acc += dy(static_cast<Eigen::Index>(o), j);
        db[o] += static_cast<T>(acc);
      }
    }
    const bool need_w = gr.requires_grad(wi), need_x = gr.requires_grad(xi);
    if (!need_w && !need_x) return;
    detail::ConstMapMat<T> w(gr.value(wi).data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.c_in * g.kernel));
    if (need_w) {
      auto cols = detail::im2col(gr.value(xi).data(), g);
      detail::MapMat<T> dw(gr.grad_ref(wi).data(), static_cast<Eigen::Index>(g.c_out), static_cast<Eigen::Index>(g.c_in * g.kernel));
      dw.noalias() += dy * cols.transpose();
    }
    if (need_x) {
      detail::RowMat<T> dcols = w.transpose() * dy;
      detail::col2im_add(dcols, g, gr.grad_ref(xi).data());
    }
  });
}

/// Elementwise max(x, slope * x) for slope in [0, 1).
template <typename T>
Var<T> leaky_relu(Var<T> x, T slope = T(0.2)) {
  require(slope >= T{0} && slope < T{1}, ErrorKind::InvalidInput, "leaky_relu slope must lie in [0, 1)");
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : slope * xv[i];
  const auto xi = x.id();
  return x.graph().op(std::move(out), {xi}, [xi, slope](Graph<T>& g, std::size_t self) {
    const auto& dout = g.grad(self);
    const auto& xv = g.value(xi);
    auto& dx = g.grad_ref(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xv[i] > T{0} ? dout[i] : slope * dout[i];
  });
}

/// Affine map over the last axis: x (N, D_in), weight (D_out, D_in), bias (D_out) -> (N, D_out).
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  require(xs.size() == 2 && ws.size() == 2 && ws[1] == xs[1] && bias.shape() == Shape{ws[0]}, ErrorKind::ShapeError,
          "linear shapes incompatible: x " + shape_str(xs) + ", weight " + shape_str(ws));
  const auto n = static_cast<Eigen::Index>(xs[0]), din = static_cast<Eigen::Index>(xs[1]), dout = static_cast<Eigen::Index>(ws[0]);
  Tensor<T> out({xs[0], ws[0]});
  detail::ConstMapMat<T> xm(x.value().data(), n, din), wm(weight.value().data(), dout, din);
  detail::MapMat<T> om(out.data(), n, dout);
  om.noalias() = xm * wm.transpose();
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < dout; ++c) om(r, c) += bias.value()[static_cast<std::size_t>(c)];
  const auto xi = x.id(), wi = weight.id(), bi = bias.id();
  return x.graph().op(std::move(out), {xi, wi, bi}, [=](Graph<T>& g, std::size_t self) {
    detail::ConstMapMat<T> dy(g.grad(self).data(), n, dout);
    if (g.requires_grad(xi)) {
      detail::ConstMapMat<T> wm(g.value(wi).data(), dout, din);
      detail::MapMat<T>(g.grad_ref(xi).data(), n, din).noalias() += dy * wm;
    }
    if (g.requires_grad(wi)) {
      detail::ConstMapMat<T> xm(g.value(xi).data(), n, din);
      detail::MapMat<T>(g.grad_ref(wi).data(), dout, din).noalias() += dy.transpose() * xm;
    }
    if (g.requires_grad(bi)) {
      auto& db = g.grad_ref(bi);
      for (Eigen::Index c = 0; c < dout; ++c) db[static_cast<std::size_t>(c)] += dy.col(c).sum();
    }
  });
}

/// Channel concatenation of (B, C1, T) and (B, C2, T) (or rank-2 (C, T)).
template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  auto [ba, ca, ta] = detail::bct(a.shape(), "concat_channels");
  auto [bb, cb, tb] = detail::bct(b.shape(), "concat_channels");
  require(ba == bb && ta == tb && a.shape().size() == b.shape().size(), ErrorKind::ShapeError,
          "concat_channels: batch/time mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Shape s = a.shape().size() == 2 ? Shape{ca + cb, ta} : Shape{ba, ca + cb, ta};
  Tensor<T> out(s);
  for (std::size_t n = 0; n < ba; ++n) {
    std::copy_n(a.value().data() + n * ca * ta, ca * ta, out.data() + n * (ca + cb) * ta);
    std::copy_n(b.value().data() + n * cb * tb, cb * tb, out.data() + n * (ca + cb) * ta + ca * ta);
  }
  const auto ai = a.id(), bi = b.id();
  const std::size_t B = ba, CA = ca, CB = cb, TT = ta;
  return a.graph().op(std::move(out), {ai, bi}, [=](Graph<T>& g, std::size_t self) {
    const auto& dout = g.grad(self);
    for (std::size_t n = 0; n < B; ++n) {
      const T* src = dout.data() + n * (CA + CB) * TT;
      if (g.requires_grad(ai)) {
        T* d = g.grad_ref(ai).data() + n * CA * TT;
        for (std::size_t i = 0; i < CA * TT; ++i) d[i] += src[i];
      }
      if (g.requires_grad(bi)) {
        T* d = g.grad_ref(bi).data() + n * CB * TT;
        for (std::size_t i = 0; i < CB * TT; ++i) d[i] += src[CA * TT + i];
      }
    }
  });
}

/// Channels [begin, end) of a (B, C, T) or (C, T) tensor.
template <typename T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t end) {
  auto [B, C, TT] = detail::bct(x.shape(), "slice_channels");
  require(begin < end && end <= C, ErrorKind::ShapeError, "slice_channels range out of bounds");
  const std::size_t W = end - begin;
  Shape s = x.shape().size() == 2 ? Shape{W, TT} : Shape{B, W, TT};
  Tensor<T> out(s);
  for (std::size_t n = 0; n < B; ++n)
    std::copy_n(x.value().data() + (n * C + begin) * TT, W * TT, out.data() + n * W * TT);
  const auto xi = x.id();
  return x.graph().op(std::move(out), {xi}, [=](Graph<T>& g, std::size_t self) {
    const auto& dout = g.grad(self);
    auto& dx = g.grad_ref(xi);
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t i = 0; i < W * TT; ++i) dx[(n * C + begin) * TT + i] += dout[n * W * TT + i];
  });
}

/// z = mu + exp(logvar / 2) * noise
template <typename T>
Var<T> reparameterize(Var<T> mu, Var<T> logvar, const Tensor<T>& noise) {
  require(mu.shape() == logvar.shape() && noise.shape() == mu.shape(), ErrorKind::ShapeError,
          "reparameterize: shapes of mu, logvar and noise must agree");
  Tensor<T> out(mu.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = mu.value()[i] + std::exp(logvar.value()[i] / T(2)) * noise[i];
  const auto mi = mu.id(), li = logvar.id();
  return mu.graph().op(std::move(out), {mi, li}, [mi, li, noise](Graph<T>& g, std::size_t self) {
    const auto& dout = g.grad(self);
    if (g.requires_grad(mi)) detail::accumulate(g.grad_ref(mi), dout);
    if (g.requires_grad(li)) {
      auto& dl = g.grad_ref(li);
      const auto& lv = g.value(li);
      for (std::size_t i = 0; i < dl.size(); ++i) dl[i] += dout[i] * noise[i] * std::exp(lv[i] / T(2)) / T(2);
    }
  });
}

/// Mean absolute difference over all elements.
template <typename T>
Var<T> l1_loss(Var<T> a, Var<T> b) {
  require(a.shape() == b.shape(), ErrorKind::ShapeError,
          "l1_loss shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) acc += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
  const double n = static_cast<double>(a.value().size());
  Tensor<T> out({1}, static_cast<T>(acc / n));
  const auto ai = a.id(), bi = b.id();
  return a.graph().op(std::move(out), {ai, bi}, [ai, bi, n](Graph<T>& g, std::size_t self) {
    const T scale = static_cast<T>(g.grad(self)[0] / n);
    const auto& av = g.value(ai);
    const auto& bv = g.value(bi);
    const bool ga = g.requires_grad(ai), gb = g.requires_grad(bi);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T d = av[i] > bv[i] ? scale : (av[i] < bv[i] ? -scale : T{0});
      if (ga) g.grad_ref(ai)[i] += d;
      if (gb) g.grad_ref(bi)[i] -= d;
    }
  });
}

/// Gaussian KL to N(0, I): mean over frames of -1/2 * sum_d (1 + logvar - mu^2 - exp(logvar)).
/// Tensors are (B, D, T) or (D, T); a frame is one (b, t) column.
template <typename T>
Var<T> kl_divergence(Var<T> mu, Var<T> logvar) {
  require(mu.shape() == logvar.shape(), ErrorKind::ShapeError, "kl_divergence: mu/logvar shape mismatch");
  auto [B, D, TT] = detail::bct(mu.shape(), "kl_divergence");
  const double frames = static_cast<double>(B * TT);
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.value().size(); ++i) {
    const double m = mu.value()[i], lv = logvar.value()[i];
    acc += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  Tensor<T> out({1}, static_cast<T>(acc / frames));
  const auto mi = mu.id(), li = logvar.id();
  return mu.graph().op(std::move(out), {mi, li}, [mi, li, frames](Graph<T>& g, std::size_t self) {
    const double s = g.grad(self)[0] / frames;
    if (g.requires_grad(mi)) {
      auto& dm = g.grad_ref(mi);
      const auto& mv = g.value(mi);
      for (std::size_t i = 0; i < dm.size(); ++i) dm[i] += static_cast<T>(s * mv[i]);
    }
    if (g.requires_grad(li)) {
      auto& dl = g.grad_ref(li);
      const auto& lv = g.value(li);
      for (std::size_t i = 0; i < dl.size(); ++i) dl[i] += static_cast<T>(s * 0.5 * (std::exp(static_cast<double>(lv[i])) - 1.0));
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  double acc = 0.0;
  for (auto v : x.value().values()) acc += v;
  const auto xi = x.id();
  return x.graph().op(Tensor<T>({1}, static_cast<T>(acc)), {xi}, [xi](Graph<T>& g, std::size_t self) {
    const T d = g.grad(self)[0];
    for (auto& v : g.grad_ref(xi).values()) v += d;
  });
}

template <typename T>
Var<T> sum_squares(Var<T> x) {
  double acc = 0.0;
  for (auto v : x.value().values()) acc += static_cast<double>(v) * v;
  const auto xi = x.id();
  return x.graph().op(Tensor<T>({1}, static_cast<T>(acc)), {xi}, [xi](Graph<T>& g, std::size_t self) {
    const T d = g.grad(self)[0];
    auto& dx = g.grad_ref(xi);
    const auto& xv = g.value(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += T(2) * d * xv[i];
  });
}

/// Weighted sum of scalar nodes.
template <typename T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<double>& weights) {
  require(!terms.empty() && terms.size() == weights.size(), ErrorKind::InvalidInput, "weighted_sum: size mismatch");
  double acc = 0.0;
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require(terms[k].value().size() == 1, ErrorKind::ShapeError, "weighted_sum takes scalar terms");
    acc += weights[k] * static_cast<double>(terms[k].value()[0]);
    ids.push_back(terms[k].id());
  }
  return terms[0].graph().op(Tensor<T>({1}, static_cast<T>(acc)), ids, [ids, weights](Graph<T>& g, std::size_t self) {
    const double d = g.grad(self)[0];
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (g.requires_grad(ids[k])) g.grad_ref(ids[k])[0] += static_cast<T>(weights[k] * d);
  });
}

}  // namespace elvc::ad
