// Copyright 2026 The Multi-AMP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "multiamp/adam.hpp"
#include "multiamp/errors.hpp"
#include "multiamp/mlp.hpp"
#include "multiamp/rng.hpp"

namespace mamp {
namespace {

double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

Mlp RandomNet(std::vector<int> widths, Activation act, std::uint64_t seed) {
  Mlp net(std::move(widths), act);
  Rng rng(seed);
  net.Initialize(InitScheme::kUniformFanIn, rng, 1.5, 1.5);
  // non-zero biases so that every path is exercised
  for (int l = 0; l < net.num_layers(); ++l) {
    auto b = net.bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = rng.Uniform(-0.3, 0.3);
  }
  return net;
}

Mlp Linear(double w, double b) {
  Mlp net({1, 1}, Activation::kTanh);
  net.weight(0)(0, 0) = w;
  net.bias(0)[0] = b;
  return net;
}

struct Shape {
  std::vector<int> widths;
  Activation act;
};

// discriminator, policy and value shapes of the shipped configs
std::vector<Shape> Shapes() {
  return {{{12, 64, 64, 1}, Activation::kTanh},
          {{14, 64, 64, 2}, Activation::kTanh},
          {{14, 64, 64, 1}, Activation::kTanh},
          {{7, 16, 9, 3}, Activation::kElu}};
}

TEST(Mlp, ParameterCount) {
  Mlp net({5, 7, 3, 2}, Activation::kTanh);
  EXPECT_EQ(net.num_params(), 5u * 7 + 7 + 7 * 3 + 3 + 3 * 2 + 2);
}

TEST(Mlp, ZeroNetOutputsZero) {
  Mlp net({3, 8, 2}, Activation::kTanh);
  auto y = net.Forward(std::vector<double>{1.0, -2.0, 0.5});
  EXPECT_EQ(y, (std::vector<double>{0.0, 0.0}));
}

TEST(Mlp, LinearLayerArithmetic) {
  Mlp net = Linear(2.0, 1.0);
  EXPECT_EQ(net.Forward(std::vector<double>{3.0})[0], 7.0);
  auto g = net.Backward(std::vector<double>{3.0}, std::vector<double>{1.0});
  ASSERT_EQ(g.params.size(), 2);
  EXPECT_EQ(g.params[0], 3.0);  // dW
  EXPECT_EQ(g.params[1], 1.0);  // db
  EXPECT_EQ(g.input[0], 2.0);
}

TEST(Mlp, IdentityTanhAtZero) {
  Mlp net({1, 1, 1}, Activation::kTanh);
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  EXPECT_EQ(net.Forward(std::vector<double>{0.0})[0], 0.0);
}

TEST(Mlp, WidthMismatchRejected) {
  Mlp net({3, 2}, Activation::kTanh);
  EXPECT_THROW(net.Forward(std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(net.Backward(std::vector<double>{1.0, 2.0, 3.0},
                            std::vector<double>{1.0}),
               ValidationError);
}

TEST(Mlp, ZeroUpstreamGivesZeroGradients) {
  Mlp net = RandomNet({4, 6, 3}, Activation::kTanh, 3);
  auto g = net.Backward(std::vector<double>{0.1, 0.2, 0.3, 0.4},
                        std::vector<double>(3, 0.0));
  EXPECT_TRUE((g.params.array() == 0.0).all());
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, ForwardIsPureAndFinite) {
  Mlp net = RandomNet({6, 32, 32, 2}, Activation::kElu, 8);
  Rng rng(2);
  Matrix x(6, 50);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Uniform(-4, 4);
  Matrix y1 = net.Forward(x);
  Matrix y2 = net.Forward(x);
  EXPECT_EQ(y1, y2);
  EXPECT_TRUE(y1.allFinite());
  MlpTape tape;
  EXPECT_EQ(net.Forward(x, tape), y1);
}

TEST(Mlp, TanhMatchesLibm) {
  Mlp net({1, 1, 1}, Activation::kTanh);
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  for (double x = -25.0; x <= 25.0; x += 0.0137) {
    const double y = net.Forward(std::vector<double>{x})[0];
    EXPECT_NEAR(y, std::tanh(x), 4e-16 + 1e-14 * std::abs(std::tanh(x)));
  }
}

// Central differences with h = 1e-5 on 100 probes per shape.
TEST(Mlp, InputGradientsMatchFiniteDifferences) {
  for (const auto& shape : Shapes()) {
    Mlp net = RandomNet(shape.widths, shape.act, 21);
    Rng rng(5);
    const int in = net.input_dim(), out = net.output_dim();
    for (int probe = 0; probe < 100; ++probe) {
      std::vector<double> x(in), up(out);
      for (double& v : x) v = rng.Uniform(-1.5, 1.5);
      for (double& v : up) v = rng.Uniform(-1, 1);
      auto g = net.Backward(x, up);
      const int k = static_cast<int>(rng.UniformIndex(in));
      auto f = [&](double xk) {
        auto xx = x;
        xx[k] = xk;
        auto y = net.Forward(xx);
        double s = 0;
        for (int j = 0; j < out; ++j) s += up[j] * y[j];
        return s;
      };
      const double h = 1e-5;
      const double fd = (f(x[k] + h) - f(x[k] - h)) / (2 * h);
      ASSERT_LT(RelErr(g.input[k], fd), 1e-4) << "probe " << probe;
    }
  }
}

TEST(Mlp, ParameterGradientsMatchFiniteDifferences) {
  for (const auto& shape : Shapes()) {
    Mlp net = RandomNet(shape.widths, shape.act, 22);
    Rng rng(6);
    const int in = net.input_dim(), out = net.output_dim();
    std::vector<double> x(in), up(out);
    for (double& v : x) v = rng.Uniform(-1.5, 1.5);
    for (double& v : up) v = rng.Uniform(-1, 1);
    auto g = net.Backward(x, up);
    for (int probe = 0; probe < 100; ++probe) {
      const auto k = static_cast<Eigen::Index>(rng.UniformIndex(net.num_params()));
      auto f = [&](double pk) {
        Mlp copy = net;
        copy.params()[k] = pk;
        auto y = copy.Forward(x);
        double s = 0;
        for (int j = 0; j < out; ++j) s += up[j] * y[j];
        return s;
      };
      const double h = 1e-5, p = net.params()[k];
      const double fd = (f(p + h) - f(p - h)) / (2 * h);
      // parameters feeding dead paths have both values ~0
      if (std::abs(fd) < 1e-9 && std::abs(g.params[k]) < 1e-9) continue;
      ASSERT_LT(RelErr(g.params[k], fd), 1e-4) << "param " << k;
    }
  }
}

TEST(Mlp, BatchedBackwardMatchesPerSample) {
  Mlp net = RandomNet({5, 12, 3}, Activation::kTanh, 4);
  Rng rng(1);
  Matrix x(5, 7), up(3, 7);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Uniform(-1, 1);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.Uniform(-1, 1);
  MlpTape tape;
  net.Forward(x, tape);
  Vector grad = Vector::Zero(net.num_params());
  Matrix dx;
  net.Backward(tape, up, grad, &dx);
  Vector sum = Vector::Zero(net.num_params());
  for (int b = 0; b < 7; ++b) {
    std::vector<double> xb(x.col(b).data(), x.col(b).data() + 5);
    std::vector<double> ub(up.col(b).data(), up.col(b).data() + 3);
    auto g = net.Backward(xb, ub);
    sum += g.params;
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(dx(i, b), g.input[i], 1e-14);
  }
  EXPECT_LT((sum - grad).cwiseAbs().maxCoeff(), 1e-12);
}

// Second-order path: d/dparams of sum_b |dD/dx(x_b)|^2.
TEST(Mlp, GradientPenaltyParameterGradient) {
  for (const auto& shape : Shapes()) {
    if (shape.widths.back() != 1) continue;
    Mlp net = RandomNet(shape.widths, shape.act, 31);
    Rng rng(7);
    Matrix x(net.input_dim(), 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Uniform(-1, 1);
    Vector grad = Vector::Zero(net.num_params());
    const double value = net.InputGradSquaredNorm(x, 1.0, &grad);

    // value oracle from per-sample input gradients
    double direct = 0.0;
    for (int b = 0; b < x.cols(); ++b) {
      std::vector<double> xb(x.col(b).data(), x.col(b).data() + x.rows());
      auto g = net.Backward(xb, std::vector<double>{1.0});
      for (double v : g.input) direct += v * v;
    }
    EXPECT_LT(RelErr(value, direct), 1e-12);

    for (int probe = 0; probe < 100; ++probe) {
      const auto k = static_cast<Eigen::Index>(rng.UniformIndex(net.num_params()));
      auto f = [&](double pk) {
        Mlp copy = net;
        copy.params()[k] = pk;
        return copy.InputGradSquaredNorm(x, 1.0, nullptr);
      };
      const double h = 1e-5, p = net.params()[k];
      const double fd = (f(p + h) - f(p - h)) / (2 * h);
      if (std::abs(fd) < 1e-9 && std::abs(grad[k]) < 1e-9) continue;
      ASSERT_LT(RelErr(grad[k], fd), 1e-3) << "param " << k;
    }
  }
}

TEST(Mlp, SerializationRoundTripIsBitExact) {
  Mlp net = RandomNet({6, 10, 4, 1}, Activation::kElu, 99);
  const auto path = std::filesystem::temp_directory_path() / "multiamp_mlp.bin";
  net.SaveFile(path);
  Mlp back = Mlp::LoadFile(path);
  EXPECT_TRUE(back == net);
  EXPECT_EQ(back.widths(), net.widths());
  EXPECT_EQ(back.activation(), net.activation());
  EXPECT_EQ(std::memcmp(back.params().data(), net.params().data(),
                        sizeof(double) * net.num_params()),
            0);
}

TEST(Mlp, InitializationIsSeedControlled) {
  Mlp a({4, 8, 2}, Activation::kTanh), b({4, 8, 2}, Activation::kTanh);
  Rng r1(5), r2(5);
  a.Initialize(InitScheme::kOrthogonal, r1);
  b.Initialize(InitScheme::kOrthogonal, r2);
  EXPECT_TRUE(a == b);
  // orthogonal rows for the wide-output layer
  Matrix w = a.weight(0);
  Matrix gram = w.transpose() * w;
  EXPECT_LT((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adam, ZeroGradientsLeaveParameters) {
  Adam opt(3, {});
  Vector p(3);
  p << 1.0, -2.0, 3.0;
  const Vector before = p;
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(opt.Step(p, Vector::Zero(3)));
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.step_count(), 5);
}

// Closed form of the bias-corrected update with a constant gradient g:
// m_t / (1 - b1^t) = g and v_t / (1 - b2^t) = g^2, so every step moves the
// parameter by -lr * g / (|g| + eps).
TEST(Adam, ClosedFormSteps) {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  Adam opt(1, cfg);
  Vector p = Vector::Zero(1);
  Vector g = Vector::Constant(1, 1.0);
  opt.Step(p, g);
  EXPECT_NEAR(p[0], -0.1, 1e-6);
  const double per_step = 0.1 * 1.0 / (1.0 + cfg.epsilon);
  EXPECT_NEAR(p[0], -per_step, 1e-12);
  for (int t = 2; t <= 10; ++t) opt.Step(p, g);
  EXPECT_NEAR(p[0], -10.0 * per_step, 1e-12);
}

TEST(Adam, NonFiniteGradientSkipped) {
  Adam opt(2, {});
  Vector p(2);
  p << 0.5, 0.25;
  opt.Step(p, Vector::Constant(2, 0.3));
  const Vector before = p;
  const Vector m = opt.first_moment();
  Vector bad(2);
  bad << std::numeric_limits<double>::quiet_NaN(), 1.0;
  EXPECT_FALSE(opt.Step(p, bad));
  EXPECT_EQ(p, before);
  EXPECT_EQ(opt.first_moment(), m);
  EXPECT_EQ(opt.divergence_count(), 1);
  bad << 1.0, std::numeric_limits<double>::infinity();
  EXPECT_FALSE(opt.Step(p, bad));
  EXPECT_EQ(opt.divergence_count(), 2);
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(Adam, ShapeMismatchRejected) {
  Adam opt(2, {});
  Vector p = Vector::Zero(3);
  EXPECT_THROW(opt.Step(p, Vector::Zero(3)), ValidationError);
}

}  // namespace
}  // namespace mamp
