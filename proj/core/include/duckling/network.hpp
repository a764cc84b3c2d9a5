#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace duckling {

/// Dense affine layer: y = W x + b, W stored row-major as out x in.
struct LayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  LayerParams() = default;
  LayerParams(std::size_t in_size, std::size_t out_size)
      : in(in_size), out(out_size), weight(in_size * out_size, 0.0), bias(out_size, 0.0) {}

  double& w(std::size_t r, std::size_t c) { return weight[r * in + c]; }
  double w(std::size_t r, std::size_t c) const { return weight[r * in + c]; }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  bool operator==(const LayerParams&) const = default;
};

/**
 * @brief The three trainable blocks of the outlier-gated classifier.
 *
 * adapter:    D   -> d_f, ReLU  (trainable tail of the feature extractor)
 * head:       d_f -> d_h, ReLU  (the fully connected feature network)
 * classifier: d_h -> 1, sigmoid
 *
 * Between head and classifier the head output is multiplied by the
 * lesion's outlier score.
 */
struct ModelParams {
  LayerParams adapter;
  LayerParams head;
  LayerParams classifier;

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  static ModelParams init(std::size_t input_dim, std::size_t d_f, std::size_t d_h,
                          std::uint64_t seed);
  /// Same shapes, all zeros.
  static ModelParams zeros_like(const ModelParams& shape);

  std::size_t input_dim() const { return adapter.in; }
  std::size_t parameter_count() const;

  /// Concatenation adapter(W, b), head(W, b), classifier(W, b).
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);

  bool operator==(const ModelParams&) const = default;
};

struct FocalParams {
  double gamma = 2.0;
  double alpha = 0.25;
};

inline constexpr double kProbabilityEpsilon = 1e-12;

/// -alpha * (1 - p_t)^gamma * ln(p_t), p_t = p for y = 1 and 1 - p for y = 0; p clamped to [eps, 1-eps].
double focal_loss(int y, double p, double gamma, double alpha);
inline double focal_loss(int y, double p, const FocalParams& f) {
  return focal_loss(y, p, f.gamma, f.alpha);
}
/// d(focal_loss)/d(logit) where p = sigmoid(logit).
double focal_loss_logit_grad(int y, double p, const FocalParams& f);

double sigmoid(double z);

struct ForwardTrace {
  std::vector<double> x_f;    ///< input embedding
  std::vector<double> z_f;    ///< adapter pre-activation
  std::vector<double> x_h;    ///< adapter output
  std::vector<double> z_h;    ///< head pre-activation
  std::vector<double> h_out;  ///< head output
  std::vector<double> x_m;    ///< o * h_out
  double logit = 0.0;
  double p = 0.5;
  double o = 1.0;
};

/// Throws ValidationError when the embedding width does not match the adapter.
ForwardTrace forward(const ModelParams& params, std::span<const double> embedding, double o);

struct Gradients {
  ModelParams params;          ///< dL/d(parameter), same layout as the model
  std::vector<double> d_x_m;   ///< dL/d(x_m)
  std::vector<double> d_h_out; ///< dL/d(h_out) == o * d_x_m
  double d_logit = 0.0;
};

/**
 * @brief Exact gradients of `loss_weight * focal_loss` for one forward trace.
 *
 * The gate is a fixed multiplier, so the gradient reaching the head output
 * is the classifier-input gradient times o; everything upstream (head and
 * adapter) therefore carries the factor o as well.
 */
Gradients backward(const ModelParams& params, const ForwardTrace& trace, int y,
                   const FocalParams& focal, double loss_weight = 1.0);

}  // namespace duckling
