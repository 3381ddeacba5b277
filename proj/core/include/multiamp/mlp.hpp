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

#ifndef MULTIAMP_MLP_HPP_
#define MULTIAMP_MLP_HPP_

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "multiamp/binary_io.hpp"
#include "multiamp/rng.hpp"

namespace mamp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kTanh, kElu };

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

enum class InitScheme {
  kOrthogonal,    // orthogonal rows/columns scaled by a gain
  kUniformFanIn,  // U(-gain/sqrt(fan_in), gain/sqrt(fan_in))
  kZero,
};

// Intermediate values of a batched forward pass, needed by the backward
// passes. Column b of every matrix belongs to sample b.
struct MlpTape {
  std::vector<Matrix> inputs;  // inputs[l] feeds affine layer l
  std::vector<Matrix> pre;     // pre[l] = W_l * inputs[l] + b_l
  Matrix output;
};

// Fully connected network with a shared hidden activation and an identity
// output layer. All parameters live in one flat vector, laid out per layer
// as the column-major weight matrix (out x in) followed by the bias.
class Mlp {
 public:
  struct Gradients {
    Vector params;
    std::vector<double> input;
  };

  Mlp() = default;
  // Zero-initialized network. widths = {input, hidden..., output}.
  Mlp(std::vector<int> widths, Activation hidden);

  void Initialize(InitScheme scheme, Rng& rng, double hidden_gain = 1.0,
                  double output_gain = 1.0);

  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return activation_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int num_layers() const { return static_cast<int>(widths_.size()) - 1; }
  std::size_t num_params() const {
    return static_cast<std::size_t>(params_.size());
  }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<Vector> bias(int layer);
  Eigen::Map<const Vector> bias(int layer) const;

  // Batched evaluation; x is input_dim x batch.
  Matrix Forward(const Matrix& x) const;
  Matrix Forward(const Matrix& x, MlpTape& tape) const;

  // Reverse pass of sum(upstream .* output). Parameter gradients are
  // accumulated into param_grad; the input gradient is written when
  // input_grad is non-null.
  void Backward(const MlpTape& tape, const Matrix& upstream,
                Eigen::Ref<Vector> param_grad, Matrix* input_grad) const;

  std::vector<double> Forward(std::span<const double> x) const;
  Gradients Backward(std::span<const double> x,
                     std::span<const double> upstream) const;

  // For scalar-output networks: returns sum_b |d out / d x (x_b)|^2 and, when
  // param_grad is non-null, accumulates scale * d(that sum)/d params. The
  // parameter derivative differentiates through the input-gradient pass
  // (second order), so it is exact rather than a surrogate.
  double InputGradSquaredNorm(const Matrix& x, double scale,
                              Vector* param_grad) const;

  void Save(BinaryWriter& out) const;
  static Mlp Load(BinaryReader& in);
  void SaveFile(const std::filesystem::path& path) const;
  static Mlp LoadFile(const std::filesystem::path& path);

  bool operator==(const Mlp& other) const;

 private:
  void CheckInput(Eigen::Index rows) const;

  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  Activation activation_ = Activation::kTanh;
  Vector params_;
};

}  // namespace mamp

#endif  // MULTIAMP_MLP_HPP_
