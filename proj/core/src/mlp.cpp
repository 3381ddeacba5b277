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

#include "multiamp/mlp.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "multiamp/errors.hpp"

namespace mamp {

namespace {

constexpr std::string_view kMlpMagic = "MAMPMLP1";
constexpr std::uint32_t kMlpVersion = 1;

// tanh through exp, which is several times cheaper than libm's tanh. The
// series branch keeps full relative accuracy near zero.
double Tanh(double x) {
  const double ax = std::abs(x);
  if (ax < 0.01) {
    const double x2 = x * x;
    return x * (1.0 + x2 * (-1.0 / 3.0 + x2 * (2.0 / 15.0 - x2 * 17.0 / 315.0)));
  }
  if (ax > 19.0) return std::copysign(1.0, x);
  const double t = std::exp(-2.0 * ax);
  return std::copysign((1.0 - t) / (1.0 + t), x);
}

// Activation value, first and second derivative, elementwise on matrices.
Matrix Activate(Activation a, const Matrix& z) {
  if (a == Activation::kTanh) return z.unaryExpr(&Tanh);
  return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Matrix Derivative(Activation a, const Matrix& z, const Matrix& h) {
  if (a == Activation::kTanh) return (1.0 - h.array().square()).matrix();
  return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

Matrix SecondDerivative(Activation a, const Matrix& z, const Matrix& h) {
  if (a == Activation::kTanh) {
    return (-2.0 * h.array() * (1.0 - h.array().square())).matrix();
  }
  return z.unaryExpr([](double v) { return v > 0.0 ? 0.0 : std::exp(v); });
}

void OrthogonalFill(Eigen::Map<Matrix> w, Rng& rng, double gain) {
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  Matrix g(big, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    for (Eigen::Index i = 0; i < big; ++i) g(i, j) = rng.Normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(big, small);
  const Matrix r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (rows >= cols) {
    w = gain * q;
  } else {
    w = gain * q.transpose();
  }
}

}  // namespace

std::string_view ActivationName(Activation a) {
  return a == Activation::kTanh ? "tanh" : "elu";
}

Activation ParseActivation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "elu") return Activation::kElu;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<int> widths, Activation hidden)
    : widths_(std::move(widths)), activation_(hidden) {
  if (widths_.size() < 2) {
    throw ValidationError("an MLP needs at least input and output widths");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    if (widths_[l] <= 0 || widths_[l + 1] <= 0) {
      throw ValidationError("MLP layer widths must be positive");
    }
    offsets_.push_back(total);
    total += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] +
             widths_[l + 1];
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

void Mlp::Initialize(InitScheme scheme, Rng& rng, double hidden_gain,
                     double output_gain) {
  params_.setZero();
  if (scheme == InitScheme::kZero) return;
  for (int l = 0; l < num_layers(); ++l) {
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    auto w = weight(l);
    if (scheme == InitScheme::kOrthogonal) {
      OrthogonalFill(w, rng, gain);
    } else {
      const double bound = gain / std::sqrt(static_cast<double>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
          w(i, j) = rng.Uniform(-bound, bound);
        }
      }
    }
  }
}

Eigen::Map<Matrix> Mlp::weight(int layer) {
  return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<const Matrix> Mlp::weight(int layer) const {
  return {params_.data() + offsets_[layer], widths_[layer + 1], widths_[layer]};
}
Eigen::Map<Vector> Mlp::bias(int layer) {
  return {params_.data() + offsets_[layer] +
              static_cast<std::size_t>(widths_[layer]) * widths_[layer + 1],
          widths_[layer + 1]};
}
Eigen::Map<const Vector> Mlp::bias(int layer) const {
  return {params_.data() + offsets_[layer] +
              static_cast<std::size_t>(widths_[layer]) * widths_[layer + 1],
          widths_[layer + 1]};
}

void Mlp::CheckInput(Eigen::Index rows) const {
  if (widths_.empty()) throw ValidationError("MLP is uninitialized");
  if (rows != input_dim()) {
    throw ValidationError("MLP input width " + std::to_string(rows) +
                          " does not match expected " +
                          std::to_string(input_dim()));
  }
}

Matrix Mlp::Forward(const Matrix& x) const {
  CheckInput(x.rows());
  Matrix h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    h = l + 1 == num_layers() ? std::move(z) : Activate(activation_, z);
  }
  return h;
}

Matrix Mlp::Forward(const Matrix& x, MlpTape& tape) const {
  CheckInput(x.rows());
  const int n = num_layers();
  tape.inputs.resize(n);
  tape.pre.resize(n);
  tape.inputs[0] = x;
  for (int l = 0; l < n; ++l) {
    tape.pre[l].noalias() = weight(l) * tape.inputs[l];
    tape.pre[l].colwise() += bias(l);
    if (l + 1 < n) tape.inputs[l + 1] = Activate(activation_, tape.pre[l]);
  }
  tape.output = tape.pre[n - 1];
  return tape.output;
}

void Mlp::Backward(const MlpTape& tape, const Matrix& upstream,
                   Eigen::Ref<Vector> param_grad, Matrix* input_grad) const {
  const int n = num_layers();
  if (upstream.rows() != output_dim() ||
      upstream.cols() != tape.output.cols()) {
    throw ValidationError("MLP backward: upstream shape mismatch");
  }
  if (param_grad.size() != params_.size()) {
    throw ValidationError("MLP backward: gradient buffer size mismatch");
  }
  Matrix delta = upstream;  // gradient w.r.t. pre-activation of layer l
  for (int l = n - 1; l >= 0; --l) {
    const std::size_t off = offsets_[l];
    Eigen::Map<Matrix> dw(param_grad.data() + off, widths_[l + 1], widths_[l]);
    Eigen::Map<Vector> db(
        param_grad.data() + off +
            static_cast<std::size_t>(widths_[l]) * widths_[l + 1],
        widths_[l + 1]);
    dw.noalias() += delta * tape.inputs[l].transpose();
    db += delta.rowwise().sum();
    if (l == 0 && input_grad == nullptr) break;
    Matrix dh = weight(l).transpose() * delta;
    if (l == 0) {
      *input_grad = std::move(dh);
      break;
    }
    delta = dh.cwiseProduct(
        Derivative(activation_, tape.pre[l - 1], tape.inputs[l]));
  }
}

std::vector<double> Mlp::Forward(std::span<const double> x) const {
  const Matrix in = Eigen::Map<const Vector>(x.data(), x.size());
  const Matrix out = Forward(in);
  return {out.data(), out.data() + out.size()};
}

Mlp::Gradients Mlp::Backward(std::span<const double> x,
                             std::span<const double> upstream) const {
  if (static_cast<int>(upstream.size()) != output_dim()) {
    throw ValidationError("MLP backward: upstream length mismatch");
  }
  const Matrix in = Eigen::Map<const Vector>(x.data(), x.size());
  MlpTape tape;
  Forward(in, tape);
  const Matrix up = Eigen::Map<const Vector>(upstream.data(), upstream.size());
  Gradients g;
  g.params = Vector::Zero(params_.size());
  Matrix dx;
  Backward(tape, up, g.params, &dx);
  g.input.assign(dx.data(), dx.data() + dx.size());
  return g;
}

double Mlp::InputGradSquaredNorm(const Matrix& x, double scale,
                                 Vector* param_grad) const {
  if (output_dim() != 1) {
    throw ValidationError("input-gradient norm requires a scalar output");
  }
  const int n = num_layers();
  const Eigen::Index batch = x.cols();
  MlpTape tape;
  Forward(x, tape);

  // Input-gradient pass. u[l] is d out / d pre[l]; g[l] is d out / d
  // inputs[l], so g[0] is the input gradient.
  std::vector<Matrix> u(n), g(n), act_d(n);
  u[n - 1] = Matrix::Ones(1, batch);
  for (int l = n - 1; l >= 0; --l) {
    g[l].noalias() = weight(l).transpose() * u[l];
    if (l == 0) break;
    act_d[l - 1] = Derivative(activation_, tape.pre[l - 1], tape.inputs[l]);
    u[l - 1] = g[l].cwiseProduct(act_d[l - 1]);
  }
  const double value = g[0].squaredNorm();
  if (param_grad == nullptr) return value;
  if (param_grad->size() != params_.size()) {
    throw ValidationError("gradient buffer size mismatch");
  }

  // Reverse through the input-gradient pass, then through the forward pass.
  // g_bar holds the adjoint of g[l]; z_bar collects adjoints of pre[l]
  // injected through the activation derivative.
  std::vector<Matrix> z_bar(n);
  Matrix g_bar = (2.0 * scale) * g[0];
  for (int l = 0; l < n; ++l) {
    const std::size_t off = offsets_[l];
    Eigen::Map<Matrix> dw(param_grad->data() + off, widths_[l + 1],
                          widths_[l]);
    dw.noalias() += u[l] * g_bar.transpose();
    if (l + 1 == n) break;
    const Matrix u_bar = weight(l) * g_bar;
    const Matrix second =
        SecondDerivative(activation_, tape.pre[l], tape.inputs[l + 1]);
    z_bar[l] = u_bar.cwiseProduct(g[l + 1]).cwiseProduct(second);
    g_bar = u_bar.cwiseProduct(act_d[l]);
  }
  // The output value itself does not enter the penalty, so the forward-pass
  // reverse sweep starts at the last hidden layer.
  Matrix delta;
  for (int l = n - 2; l >= 0; --l) {
    if (l == n - 2) {
      delta = z_bar[l];
    } else {
      delta = z_bar[l] +
              (weight(l + 1).transpose() * delta).cwiseProduct(act_d[l]);
    }
    const std::size_t off = offsets_[l];
    Eigen::Map<Matrix> dw(param_grad->data() + off, widths_[l + 1],
                          widths_[l]);
    Eigen::Map<Vector> db(
        param_grad->data() + off +
            static_cast<std::size_t>(widths_[l]) * widths_[l + 1],
        widths_[l + 1]);
    dw.noalias() += delta * tape.inputs[l].transpose();
    db += delta.rowwise().sum();
  }
  return value;
}

void Mlp::Save(BinaryWriter& out) const {
  out.Magic(kMlpMagic);
  out.U32(kMlpVersion);
  out.U32(static_cast<std::uint32_t>(activation_));
  out.U64(widths_.size());
  for (int w : widths_) out.U64(static_cast<std::uint64_t>(w));
  out.Doubles({params_.data(), static_cast<std::size_t>(params_.size())});
}

Mlp Mlp::Load(BinaryReader& in) {
  in.ExpectMagic(kMlpMagic, "network blob");
  const std::uint32_t version = in.U32();
  if (version != kMlpVersion) {
    throw IncompatibleError("network blob version " + std::to_string(version) +
                            " is not supported (expected " +
                            std::to_string(kMlpVersion) + ")");
  }
  const std::uint32_t act = in.U32();
  if (act > static_cast<std::uint32_t>(Activation::kElu)) {
    throw IncompatibleError("network blob has unknown activation");
  }
  const std::uint64_t count = in.U64();
  if (count < 2 || count > 64) {
    throw IncompatibleError("network blob has invalid layer count");
  }
  std::vector<int> widths;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t w = in.U64();
    if (w == 0 || w > (1u << 20)) {
      throw IncompatibleError("network blob has invalid layer width");
    }
    widths.push_back(static_cast<int>(w));
  }
  Mlp net(std::move(widths), static_cast<Activation>(act));
  in.DoublesInto({net.params_.data(), net.num_params()});
  return net;
}

void Mlp::SaveFile(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  BinaryWriter writer(out);
  Save(writer);
}

Mlp Mlp::LoadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  BinaryReader reader(in);
  return Load(reader);
}

bool Mlp::operator==(const Mlp& other) const {
  return widths_ == other.widths_ && activation_ == other.activation_ &&
         params_.size() == other.params_.size() &&
         (params_.array() == other.params_.array()).all();
}

}  // namespace mamp
