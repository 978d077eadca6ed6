#pragma once

// Finite-difference check of reverse-mode gradients. The loss is written once as a generic lambda
// and instantiated for the precision under test and for double (the numeric side).

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "elvckit/ad/ops.hpp"

namespace gradcheck {

using elvc::ad::Graph;
using elvc::ad::Shape;
using elvc::ad::Tensor;
using elvc::ad::Var;

struct Result {
  double rel_error = 0.0;  // worst over inputs of |g_a - g_n| / max(|g_a|, |g_n|), 2-norms
  std::string where;
};

template <typename T, typename Loss>
double eval(Loss& loss, const std::vector<Tensor<double>>& inputs) {
  Graph<T> g;
  std::vector<Var<T>> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t.template cast<T>(), false));
  return static_cast<double>(loss(g, vars).value()[0]);
}

template <typename T, typename Loss>
std::vector<Tensor<T>> analytic(Loss& loss, const std::vector<Tensor<double>>& inputs) {
  Graph<T> g;
  std::vector<Var<T>> vars;
  for (const auto& t : inputs) vars.push_back(g.input(t.template cast<T>(), true));
  g.backward(loss(g, vars));
  std::vector<Tensor<T>> out;
  for (std::size_t k = 0; k < vars.size(); ++k)
    out.push_back(vars[k].grad().empty() ? Tensor<T>(inputs[k].shape()) : vars[k].grad());
  return out;
}

template <typename T, typename Loss>
Result check(Loss loss, std::vector<Tensor<double>> inputs, double h = 1e-6) {
  auto ga = analytic<T>(loss, inputs);
  Result r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double keep = inputs[k][i];
      inputs[k][i] = keep + h;
      const double up = eval<double>(loss, inputs);
      inputs[k][i] = keep - h;
      const double down = eval<double>(loss, inputs);
      inputs[k][i] = keep;
      const double num = (up - down) / (2.0 * h);
      const double an = static_cast<double>(ga[k][i]);
      diff += (an - num) * (an - num);
      na += an * an;
      nn += num * num;
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    const double rel = scale > 0.0 ? std::sqrt(diff) / scale : 0.0;
    if (rel > r.rel_error) {
      r.rel_error = rel;
      r.where = "input " + std::to_string(k);
    }
  }
  return r;
}

inline Tensor<double> randn(const Shape& s, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01;
  Tensor<double> t(s);
  for (auto& v : t.values()) v = scale * n01(rng);
  return t;
}

/// Config `k` of a fixed rotation over the differentiable ops; the randomness picks sizes and values.
struct Case {
  std::string name;
  Result result;
};

inline Case run_case(int k, std::mt19937_64& rng) {
  namespace ad = elvc::ad;
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<unsigned>(hi - lo + 1)); };
  switch (k % 7) {
    case 0: {
      const auto B = pick(1, 2), C = pick(1, 3), T = pick(4, 9), O = pick(1, 3), K = 2 * pick(0, 2) + 1, S = pick(1, 2);
      const int pad = K / 2;
      auto loss = [=]<typename U>(Graph<U>&, std::vector<Var<U>>& v) {
        return ad::sum_squares(ad::conv1d(v[0], v[1], v[2], S, pad));
      };
      return {"conv1d B" + std::to_string(B) + " C" + std::to_string(C) + " K" + std::to_string(K) + " s" + std::to_string(S),
              check<float>(loss, {randn({std::size_t(B), std::size_t(C), std::size_t(T)}, rng),
                                  randn({std::size_t(O), std::size_t(C), std::size_t(K)}, rng, 0.5), randn({std::size_t(O)}, rng)})};
    }
    case 1: {
      const auto C = pick(1, 4), T = pick(2, 8);
      auto loss = []<typename U>(Graph<U>&, std::vector<Var<U>>& v) { return ad::sum_squares(ad::leaky_relu(v[0], U(0.2))); };
      return {"leaky_relu", check<float>(loss, {randn({std::size_t(C), std::size_t(T)}, rng)})};
    }
    case 2: {
      const auto N = pick(1, 5), Din = pick(1, 6), Dout = pick(1, 6);
      auto loss = []<typename U>(Graph<U>&, std::vector<Var<U>>& v) {
        return ad::sum_squares(ad::leaky_relu(ad::linear(v[0], v[1], v[2]), U(0.2)));
      };
      return {"linear",
              check<float>(loss, {randn({std::size_t(N), std::size_t(Din)}, rng), randn({std::size_t(Dout), std::size_t(Din)}, rng),
                                  randn({std::size_t(Dout)}, rng)})};
    }
    case 3: {
      const auto B = pick(1, 2), C1 = pick(1, 3), C2 = pick(1, 3), T = pick(2, 6);
      auto loss = [=]<typename U>(Graph<U>&, std::vector<Var<U>>& v) {
        auto cat = ad::concat_channels(v[0], v[1]);
        auto part = ad::slice_channels(cat, 1, static_cast<std::size_t>(C1 + C2));
        return ad::weighted_sum(std::vector<Var<U>>{ad::sum_squares(part), ad::sum(cat)}, std::vector<double>{0.7, -0.3});
      };
      return {"concat/slice/weighted_sum",
              check<float>(loss, {randn({std::size_t(B), std::size_t(C1), std::size_t(T)}, rng),
                                  randn({std::size_t(B), std::size_t(C2), std::size_t(T)}, rng)})};
    }
    case 4: {
      const auto D = pick(1, 4), T = pick(2, 6);
      auto noise = randn({std::size_t(D), std::size_t(T)}, rng);
      auto loss = [noise]<typename U>(Graph<U>&, std::vector<Var<U>>& v) {
        return ad::sum_squares(ad::reparameterize(v[0], v[1], noise.template cast<U>()));
      };
      return {"reparameterize", check<float>(loss, {randn({std::size_t(D), std::size_t(T)}, rng), randn({std::size_t(D), std::size_t(T)}, rng, 0.5)})};
    }
    case 5: {
      const auto D = pick(1, 4), T = pick(2, 6);
      auto loss = []<typename U>(Graph<U>&, std::vector<Var<U>>& v) { return ad::l1_loss(v[0], v[1]); };
      return {"l1_loss", check<float>(loss, {randn({std::size_t(D), std::size_t(T)}, rng), randn({std::size_t(D), std::size_t(T)}, rng)})};
    }
    default: {
      const auto B = pick(1, 2), D = pick(1, 4), T = pick(2, 6);
      auto loss = []<typename U>(Graph<U>&, std::vector<Var<U>>& v) { return ad::kl_divergence(v[0], v[1]); };
      return {"kl_divergence",
              check<float>(loss, {randn({std::size_t(B), std::size_t(D), std::size_t(T)}, rng),
                                  randn({std::size_t(B), std::size_t(D), std::size_t(T)}, rng, 0.5)})};
    }
  }
}

}  // namespace gradcheck
