#include "duckling/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "duckling/errors.hpp"

namespace duckling {

namespace {

void glorot(LayerParams& layer, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : layer.weight) w = dist(rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void affine(const LayerParams& layer, std::span<const double> x, std::vector<double>& z) {
  z.assign(layer.bias.begin(), layer.bias.end());
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double* row = layer.weight.data() + r * layer.in;
    double sum = 0.0;
    for (std::size_t c = 0; c < layer.in; ++c) sum += row[c] * x[c];
    z[r] += sum;
  }
}

std::vector<double> relu(const std::vector<double>& z) {
  std::vector<double> a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
  return a;
}

// Accumulates dW = dz x^T, db = dz and returns W^T dz.
std::vector<double> affine_backward(const LayerParams& layer, std::span<const double> x,
                                    std::span<const double> dz, LayerParams& grad) {
  std::vector<double> dx(layer.in, 0.0);
  for (std::size_t r = 0; r < layer.out; ++r) {
    const double g = dz[r];
    grad.bias[r] = g;
    double* grow = grad.weight.data() + r * layer.in;
    const double* wrow = layer.weight.data() + r * layer.in;
    for (std::size_t c = 0; c < layer.in; ++c) {
      grow[c] = g * x[c];
      dx[c] += wrow[c] * g;
    }
  }
  return dx;
}

void append(std::vector<double>& flat, const LayerParams& layer) {
  flat.insert(flat.end(), layer.weight.begin(), layer.weight.end());
  flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
}

std::size_t take(std::span<const double> flat, std::size_t pos, LayerParams& layer) {
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.weight.size(),
              layer.weight.begin());
  pos += layer.weight.size();
  std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(),
              layer.bias.begin());
  return pos + layer.bias.size();
}

}  // namespace

ModelParams ModelParams::init(std::size_t input_dim, std::size_t d_f, std::size_t d_h,
                              std::uint64_t seed) {
  if (input_dim == 0 || d_f == 0 || d_h == 0) {
    throw ValidationError("layer sizes must be positive");
  }
  ModelParams p{LayerParams(input_dim, d_f), LayerParams(d_f, d_h), LayerParams(d_h, 1)};
  std::mt19937_64 rng(seed);
  glorot(p.adapter, rng);
  glorot(p.head, rng);
  glorot(p.classifier, rng);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& shape) {
  return ModelParams{LayerParams(shape.adapter.in, shape.adapter.out),
                     LayerParams(shape.head.in, shape.head.out),
                     LayerParams(shape.classifier.in, shape.classifier.out)};
}

std::size_t ModelParams::parameter_count() const {
  return adapter.parameter_count() + head.parameter_count() + classifier.parameter_count();
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  append(flat, adapter);
  append(flat, head);
  append(flat, classifier);
  return flat;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ValidationError("flat parameter size mismatch");
  std::size_t pos = take(flat, 0, adapter);
  pos = take(flat, pos, head);
  take(flat, pos, classifier);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double focal_loss(int y, double p, double gamma, double alpha) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const double pt = y == 1 ? p : 1.0 - p;
  return -alpha * std::pow(1.0 - pt, gamma) * std::log(pt);
}

double focal_loss_logit_grad(int y, double p, const FocalParams& f) {
  p = std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  const double pt = y == 1 ? p : 1.0 - p;
  const double sign = y == 1 ? 1.0 : -1.0;
  // dp_t/dz = sign * p_t (1 - p_t)
  const double q = 1.0 - pt;
  const double dloss = f.alpha * (f.gamma * pt * std::pow(q, f.gamma) * std::log(pt) -
                                  std::pow(q, f.gamma + 1.0));
  return sign * dloss;
}

ForwardTrace forward(const ModelParams& params, std::span<const double> embedding, double o) {
  if (embedding.size() != params.adapter.in) {
    throw ValidationError("embedding width " + std::to_string(embedding.size()) +
                          " does not match model input width " +
                          std::to_string(params.adapter.in));
  }
  if (params.head.in != params.adapter.out || params.classifier.in != params.head.out ||
      params.classifier.out != 1) {
    throw ValidationError("model layer shapes are inconsistent");
  }
  ForwardTrace t;
  t.o = o;
  t.x_f.assign(embedding.begin(), embedding.end());
  affine(params.adapter, t.x_f, t.z_f);
  t.x_h = relu(t.z_f);
  affine(params.head, t.x_h, t.z_h);
  t.h_out = relu(t.z_h);
  t.x_m.resize(t.h_out.size());
  for (std::size_t i = 0; i < t.h_out.size(); ++i) t.x_m[i] = o * t.h_out[i];
  std::vector<double> logit;
  affine(params.classifier, t.x_m, logit);
  t.logit = logit[0];
  t.p = sigmoid(t.logit);
  return t;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace, int y,
                   const FocalParams& focal, double loss_weight) {
  if (trace.x_f.size() != params.adapter.in || trace.z_f.size() != params.adapter.out ||
      trace.z_h.size() != params.head.out || trace.x_m.size() != params.classifier.in) {
    throw ValidationError("forward trace does not match model shapes");
  }
  Gradients g;
  g.params = ModelParams::zeros_like(params);
  g.d_logit = loss_weight * focal_loss_logit_grad(y, trace.p, focal);

  const double dz_m[1] = {g.d_logit};
  g.d_x_m = affine_backward(params.classifier, trace.x_m, dz_m, g.params.classifier);

  // Gate: x_m = o * h_out.
  g.d_h_out.resize(g.d_x_m.size());
  for (std::size_t i = 0; i < g.d_x_m.size(); ++i) g.d_h_out[i] = trace.o * g.d_x_m[i];

  std::vector<double> dz_h(g.d_h_out.size());
  for (std::size_t i = 0; i < dz_h.size(); ++i) dz_h[i] = trace.z_h[i] > 0.0 ? g.d_h_out[i] : 0.0;
  auto d_x_h = affine_backward(params.head, trace.x_h, dz_h, g.params.head);

  std::vector<double> dz_f(d_x_h.size());
  for (std::size_t i = 0; i < dz_f.size(); ++i) dz_f[i] = trace.z_f[i] > 0.0 ? d_x_h[i] : 0.0;
  affine_backward(params.adapter, trace.x_f, dz_f, g.params.adapter);
  return g;
}

}  // namespace duckling
