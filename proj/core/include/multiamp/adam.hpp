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

#ifndef MULTIAMP_ADAM_HPP_
#define MULTIAMP_ADAM_HPP_

#include <cstdint>

#include "multiamp/binary_io.hpp"
#include "multiamp/mlp.hpp"

namespace mamp {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer over one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index num_params, AdamConfig config);

  // Applies one bias-corrected update. A gradient containing NaN or inf is
  // rejected: parameters and moments stay untouched, the divergence counter
  // increments and false is returned.
  bool Step(Eigen::Ref<Vector> params, const Vector& grads);

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::int64_t step_count() const { return step_; }
  std::int64_t divergence_count() const { return divergences_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);

 private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  std::int64_t step_ = 0;
  std::int64_t divergences_ = 0;
};

}  // namespace mamp

#endif  // MULTIAMP_ADAM_HPP_
