#include "duckling/radam.hpp"

#include <cmath>
#include <stdexcept>

namespace duckling {

double radam_sma_length(std::uint64_t step, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double t = static_cast<double>(step);
  const double beta2_t = std::pow(beta2, t);
  return rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);
}

double radam_rectification(std::uint64_t step, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double rho_t = radam_sma_length(step, beta2);
  return std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                   ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
}

void radam_step(RAdamState& state, std::span<double> params, std::span<const double> grads,
                double lr, const RAdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("radam_step: parameter, gradient and state sizes differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  const double rho_t = radam_sma_length(state.step, cfg.beta2);
  const bool rectified = rho_t > 4.0;
  const double r_t = rectified ? radam_rectification(state.step, cfg.beta2) : 0.0;

  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bias1;
    if (rectified) {
      const double v_hat = std::sqrt(state.v[i] / bias2);
      params[i] -= lr * r_t * m_hat / (v_hat + cfg.epsilon);
    } else {
      params[i] -= lr * m_hat;
    }
  }
}

}  // namespace duckling
