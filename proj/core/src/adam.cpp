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

#include "multiamp/adam.hpp"

#include <cmath>
#include <string>

#include "multiamp/errors.hpp"

namespace mamp {

Adam::Adam(Eigen::Index num_params, AdamConfig config)
    : config_(config),
      m_(Vector::Zero(num_params)),
      v_(Vector::Zero(num_params)) {}

bool Adam::Step(Eigen::Ref<Vector> params, const Vector& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ValidationError("optimizer: parameter/gradient size mismatch");
  }
  if (!grads.allFinite()) {
    ++divergences_;
    return false;
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grads;
  v_ = b2 * v_ + (1.0 - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate;
  params.array() -= lr * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + config_.epsilon);
  return true;
}

void Adam::Save(BinaryWriter& out) const {
  out.Magic("ADAM");
  out.F64(config_.learning_rate);
  out.F64(config_.beta1);
  out.F64(config_.beta2);
  out.F64(config_.epsilon);
  out.I64(step_);
  out.I64(divergences_);
  out.Doubles({m_.data(), static_cast<std::size_t>(m_.size())});
  out.Doubles({v_.data(), static_cast<std::size_t>(v_.size())});
}

void Adam::Load(BinaryReader& in) {
  in.ExpectMagic("ADAM", "optimizer state");
  config_.learning_rate = in.F64();
  config_.beta1 = in.F64();
  config_.beta2 = in.F64();
  config_.epsilon = in.F64();
  step_ = in.I64();
  divergences_ = in.I64();
  in.DoublesInto({m_.data(), static_cast<std::size_t>(m_.size())});
  in.DoublesInto({v_.data(), static_cast<std::size_t>(v_.size())});
}

}  // namespace mamp
