#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "duckling/errors.hpp"
#include "duckling/network.hpp"

using namespace duckling;

namespace {

ModelParams all_ones(std::size_t d, std::size_t d_f, std::size_t d_h) {
  ModelParams p{LayerParams(d, d_f), LayerParams(d_f, d_h), LayerParams(d_h, 1)};
  for (auto* layer : {&p.adapter, &p.head, &p.classifier}) {
    std::fill(layer->weight.begin(), layer->weight.end(), 1.0);
  }
  return p;
}

double bce(int y, double p) { return -(y * std::log(p) + (1 - y) * std::log(1 - p)); }

double loss_at(const ModelParams& params, const std::vector<double>& x, double o, int y,
               const FocalParams& f) {
  return focal_loss(y, forward(params, x, o).p, f);
}

}  // namespace

TEST(Forward, HandEvaluatedExample) {
  auto p = all_ones(2, 1, 1);
  auto t = forward(p, std::vector<double>{1.0, 1.0}, 0.5);
  EXPECT_DOUBLE_EQ(t.x_h[0], 2.0);
  EXPECT_DOUBLE_EQ(t.h_out[0], 2.0);
  EXPECT_DOUBLE_EQ(t.x_m[0], 1.0);
  EXPECT_NEAR(t.p, 0.7310585786300049, 1e-15);
}

TEST(Forward, ZeroScoreAnnihilatesFeatures) {
  auto params = ModelParams::init(5, 8, 4, 1);
  auto a = forward(params, std::vector<double>{1, 2, 3, 4, 5}, 0.0);
  auto b = forward(params, std::vector<double>{0.1, 0, 9, 0.3, 2}, 0.0);
  for (double v : a.x_m) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.p, sigmoid(params.classifier.bias[0]));
}

TEST(Forward, UnitScoreIsUngatedPipeline) {
  auto params = ModelParams::init(3, 6, 4, 2);
  std::vector<double> x{0.3, 0.2, 0.9};
  auto t = forward(params, x, 1.0);
  EXPECT_EQ(t.x_m, t.h_out);
  double z = params.classifier.bias[0];
  for (std::size_t i = 0; i < t.h_out.size(); ++i) z += params.classifier.weight[i] * t.h_out[i];
  EXPECT_EQ(t.p, sigmoid(z));
}

TEST(Forward, ShapeMismatchThrows) {
  auto params = ModelParams::init(3, 4, 2, 0);
  EXPECT_THROW(forward(params, std::vector<double>{1, 2}, 1.0), ValidationError);
}

TEST(FocalLoss, ReducesToBceOnGrid) {
  for (int y : {0, 1}) {
    for (int k = 1; k < 100; ++k) {
      double p = k / 100.0;
      EXPECT_NEAR(focal_loss(y, p, 0.0, 1.0), bce(y, p), 1e-12);
    }
  }
}

TEST(FocalLoss, CanonicalValue) {
  EXPECT_NEAR(focal_loss(1, 0.9, 2.0, 0.25), 2.634012891445657e-4, 1e-16);
  EXPECT_NEAR(focal_loss(0, 0.1, 2.0, 0.25), 2.634012891445657e-4, 1e-16);
}

TEST(FocalLoss, PerfectPredictionTendsToZeroAndClamps) {
  EXPECT_LT(focal_loss(1, 1.0 - 1e-9, 2.0, 0.25), 1e-20);
  EXPECT_TRUE(std::isfinite(focal_loss(1, 0.0, 2.0, 0.25)));
  EXPECT_TRUE(std::isfinite(focal_loss(0, 1.0, 2.0, 0.25)));
  EXPECT_GE(focal_loss(1, 1.0, 2.0, 0.25), 0.0);
}

TEST(FocalLoss, LogitGradientMatchesFiniteDifference) {
  FocalParams f{2.0, 0.25};
  for (int y : {0, 1}) {
    for (double z = -4.0; z <= 4.0; z += 0.37) {
      const double h = 1e-6;
      double num = (focal_loss(y, sigmoid(z + h), f) - focal_loss(y, sigmoid(z - h), f)) / (2 * h);
      EXPECT_NEAR(focal_loss_logit_grad(y, sigmoid(z), f), num, 1e-8);
    }
  }
}

TEST(Backward, ZeroScoreZeroesAdapterAndHead) {
  auto params = ModelParams::init(4, 6, 5, 9);
  auto t = forward(params, std::vector<double>{0.2, 0.4, 0.1, 0.8}, 0.0);
  auto g = backward(params, t, 1, FocalParams{});
  for (double v : g.params.adapter.weight) EXPECT_EQ(v, 0.0);
  for (double v : g.params.adapter.bias) EXPECT_EQ(v, 0.0);
  for (double v : g.params.head.weight) EXPECT_EQ(v, 0.0);
  for (double v : g.params.head.bias) EXPECT_EQ(v, 0.0);
  EXPECT_NE(g.params.classifier.bias[0], 0.0);
}

TEST(Backward, MatchesCentralDifferences) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FocalParams f{2.0, 0.25};
  for (int draw = 0; draw < 30; ++draw) {
    auto params = ModelParams::init(3, 5, 4, 1000 + draw);
    for (double& b : params.adapter.bias) b = u(rng) - 0.3;
    for (double& b : params.head.bias) b = u(rng) - 0.3;
    std::vector<double> x{u(rng), u(rng), u(rng)};
    const double o = u(rng);
    const int y = draw % 2;
    auto g = backward(params, forward(params, x, o), y, f).params.flatten();
    auto flat = params.flatten();
    const double h = 1e-6;
    double diff = 0, norm_a = 0, norm_n = 0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      ModelParams plus = params, minus = params;
      auto fp = flat, fm = flat;
      fp[i] += h;
      fm[i] -= h;
      plus.assign(fp);
      minus.assign(fm);
      double num = (loss_at(plus, x, o, y, f) - loss_at(minus, x, o, y, f)) / (2 * h);
      diff += (num - g[i]) * (num - g[i]);
      norm_a += g[i] * g[i];
      norm_n += num * num;
    }
    EXPECT_LE(std::sqrt(diff) / std::max(std::sqrt(std::max(norm_a, norm_n)), 1e-300), 1e-5)
        << "draw " << draw;
  }
}

// Same trace: the head gradient under gate o equals o times the head gradient with the gate
// treated as identity (upstream gradient held fixed).
TEST(Backward, GateScalesHeadGradientOnSameTrace) {
  auto params = ModelParams::init(4, 6, 5, 31);
  auto trace = forward(params, std::vector<double>{0.5, 0.1, 0.9, 0.3}, 0.37);
  auto scaled = backward(params, trace, 1, FocalParams{});
  ForwardTrace identity = trace;
  identity.o = 1.0;  // same activations, gate replaced by identity
  auto unscaled = backward(params, identity, 1, FocalParams{});
  for (std::size_t i = 0; i < scaled.params.head.weight.size(); ++i) {
    EXPECT_NEAR(scaled.params.head.weight[i], 0.37 * unscaled.params.head.weight[i], 1e-15);
  }
  for (std::size_t i = 0; i < scaled.params.head.bias.size(); ++i) {
    EXPECT_NEAR(scaled.params.head.bias[i], 0.37 * unscaled.params.head.bias[i], 1e-15);
  }
  EXPECT_EQ(scaled.params.classifier, unscaled.params.classifier);
}

TEST(Backward, ScalingNodeIdentityIsExact) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 100; ++draw) {
    auto params = ModelParams::init(4, 7, 6, draw);
    const double o = u(rng);
    auto t = forward(params, std::vector<double>{u(rng), u(rng), u(rng), u(rng)}, o);
    auto g = backward(params, t, draw % 2, FocalParams{});
    for (std::size_t i = 0; i < g.d_x_m.size(); ++i) EXPECT_EQ(g.d_h_out[i], o * g.d_x_m[i]);
  }
}

TEST(Backward, MismatchedTraceThrows) {
  auto a = ModelParams::init(3, 4, 2, 0);
  auto b = ModelParams::init(3, 5, 2, 0);
  auto t = forward(a, std::vector<double>{1, 1, 1}, 1.0);
  EXPECT_THROW(backward(b, t, 1, FocalParams{}), ValidationError);
}

TEST(ModelParams, InitIsSeededGlorot) {
  auto a = ModelParams::init(16, 64, 32, 5);
  EXPECT_EQ(a, ModelParams::init(16, 64, 32, 5));
  EXPECT_NE(a, ModelParams::init(16, 64, 32, 6));
  const double limit = std::sqrt(6.0 / (16 + 64));
  for (double w : a.adapter.weight) EXPECT_LE(std::abs(w), limit);
  ModelParams b = ModelParams::zeros_like(a);
  b.assign(a.flatten());
  EXPECT_EQ(a, b);
}
