#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "elvckit/ad/tensor.hpp"

namespace elvc::ad {

/// Optimiser state of rectified Adam; m and v are allocated on the first step.
template <typename T>
struct RAdamState {
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Length of the approximated simple moving average at step t (rho_t); rho_inf = 2/(1-beta2) - 1.
inline double radam_rho(std::int64_t t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

/// One RAdam update of every parameter from its accumulated gradient. While rho_t <= 4 the variance
/// of the adaptive term is intractable and the step falls back to bias-corrected momentum.
template <typename T>
void radam_step(const std::vector<Parameter<T>*>& params, RAdamState<T>& st) {
  require(st.lr > 0.0, ErrorKind::InvalidInput, "RAdam learning rate must be positive");
  if (st.m.empty()) {
    for (auto* p : params) {
      st.m.emplace_back(p->value.shape());
      st.v.emplace_back(p->value.shape());
    }
  }
  require(st.m.size() == params.size(), ErrorKind::ShapeError, "RAdam state does not match the parameter list");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double rho_inf = 2.0 / (1.0 - st.beta2) - 1.0;
  const double rho = radam_rho(st.step, st.beta2);
  const double bc1 = 1.0 - std::pow(st.beta1, t);
  const double bc2 = 1.0 - std::pow(st.beta2, t);
  const bool rectified = rho > 4.0;
  const double rect = rectified ? std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)) : 0.0;

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = st.m[k];
    auto& v = st.v[k];
    require(m.shape() == p.value.shape(), ErrorKind::ShapeError, "RAdam moment shape mismatch for " + p.name);
    if (p.grad.empty()) p.zero_grad();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double mi = st.beta1 * m[i] + (1.0 - st.beta1) * g;
      const double vi = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      double update;
      if (rectified) {
        const double v_hat = std::sqrt(vi / bc2);
        update = st.lr * rect * m_hat / (v_hat + st.eps);
      } else {
        update = st.lr * m_hat;
      }
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

}  // namespace elvc::ad
