#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace duckling {

struct RAdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter moment buffers and step counter.
struct RAdamState {
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static RAdamState zeros(std::size_t parameter_count) {
    return RAdamState{0, std::vector<double>(parameter_count, 0.0),
                      std::vector<double>(parameter_count, 0.0)};
  }

  bool operator==(const RAdamState&) const = default;
};

/// Length of the approximated simple moving average at step t (rho_t).
double radam_sma_length(std::uint64_t step, double beta2);

/// Variance rectification factor r_t, defined only when rho_t > 4.
double radam_rectification(std::uint64_t step, double beta2);

/**
 * @brief One rectified-Adam update, in place.
 *
 * While the SMA length is at most 4 the adaptive learning rate has
 * unbounded variance and the step degrades to bias-corrected momentum
 * (params -= lr * m_hat). Afterwards params -= lr * r_t * m_hat / (sqrt(v_hat) + eps).
 */
void radam_step(RAdamState& state, std::span<double> params, std::span<const double> grads,
                double lr, const RAdamConfig& cfg = {});

}  // namespace duckling
