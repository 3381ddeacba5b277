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

#ifndef MULTIAMP_PPO_HPP_
#define MULTIAMP_PPO_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "multiamp/adam.hpp"
#include "multiamp/binary_io.hpp"
#include "multiamp/mlp.hpp"
#include "multiamp/rng.hpp"

namespace mamp {

// Policy input: environment features, task command and a one-hot selector
// marking the active style.
struct Observation {
  std::vector<double> proprio;
  std::vector<double> command;
  std::vector<double> style_selector;

  int width() const {
    return static_cast<int>(proprio.size() + command.size() +
                            style_selector.size());
  }
  std::vector<double> Flatten() const;
  // Index of the single 1 entry of the selector.
  int ActiveStyle() const;
};

Observation BuildObservation(std::span<const double> proprio,
                             std::span<const double> command, int style_index,
                             int num_styles);

// Writes the flattened observation straight into out (size must match).
void WriteObservation(std::span<const double> proprio,
                      std::span<const double> command, int style_index,
                      int num_styles, std::span<double> out);

// Log-density of a diagonal Gaussian.
double GaussianLogProb(std::span<const double> mean,
                       std::span<const double> log_std,
                       std::span<const double> action);

// Diagonal Gaussian policy with a state-independent learnable log std.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, Vector log_std);

  Mlp& mean_net() { return mean_net_; }
  const Mlp& mean_net() const { return mean_net_; }
  Vector& log_std() { return log_std_; }
  const Vector& log_std() const { return log_std_; }
  int observation_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return mean_net_.output_dim(); }
  double Entropy() const;

 private:
  Mlp mean_net_;
  Vector log_std_;
};

struct ActResult {
  std::vector<double> action;
  double log_prob = 0.0;
  double value = 0.0;
};

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_epsilon = 0.2;
  int epochs = 4;
  int minibatch_size = 1024;
  double entropy_coef = 0.005;
  double value_coef = 1.0;
  double learning_rate = 3e-4;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
  bool normalize_advantages = true;
  // decay the learning rate linearly to zero over the run
  bool anneal_learning_rate = false;
  std::vector<int> policy_hidden = {256, 128};
  std::vector<int> value_hidden = {256, 128};
  Activation activation = Activation::kTanh;
  double init_log_std = 0.0;
};

// Policy, value function and their optimizers.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int observation_dim, int action_dim, const PpoConfig& config,
              Rng& init_rng);
  // Takes networks as given (used by tests and checkpoint loading).
  ActorCritic(GaussianPolicy policy, Mlp value, double learning_rate);

  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  Mlp& value() { return value_; }
  const Mlp& value() const { return value_; }
  int observation_dim() const { return policy_.observation_dim(); }
  int action_dim() const { return policy_.action_dim(); }

  ActResult Act(std::span<const double> observation, Rng& rng,
                bool deterministic) const;

  void SetLearningRate(double lr);
  Adam& mean_optimizer() { return mean_opt_; }
  Adam& log_std_optimizer() { return log_std_opt_; }
  Adam& value_optimizer() { return value_opt_; }
  const Adam& value_optimizer() const { return value_opt_; }
  std::int64_t divergence_count() const;

  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);
  bool SameParameters(const ActorCritic& other) const;

 private:
  GaussianPolicy policy_;
  Mlp value_;
  Adam mean_opt_;
  Adam log_std_opt_;
  Adam value_opt_;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one environment's sequence.
// terminals[t] != 0 cuts both the bootstrap and the recursion after step t;
// bootstrap_value is V(s_T) for the state following the last step.
GaeResult ComputeGae(std::span<const double> rewards,
                     std::span<const double> values,
                     std::span<const std::uint8_t> terminals,
                     double bootstrap_value, double gamma, double lambda);

// Storage for one synchronous rollout of num_envs environments over horizon
// steps. Sample (t, e) lives at column/index t * num_envs + e.
struct RolloutBatch {
  int num_envs = 0;
  int horizon = 0;
  Matrix observations;  // obs_dim x N
  Matrix actions;       // action_dim x N
  Vector log_probs;
  Vector values;
  Vector task_rewards;   // after gating
  Vector style_rewards;  // after per-style scaling
  std::vector<std::uint8_t> terminals;
  std::vector<int> styles;
  Vector bootstrap_values;  // V(s_T), one per environment

  RolloutBatch() = default;
  RolloutBatch(int num_envs, int horizon, int observation_dim, int action_dim);

  int size() const { return num_envs * horizon; }
  static int Index(int t, int e, int num_envs) { return t * num_envs + e; }
  // r_t = r_task + r_style, elementwise.
  Vector TotalRewards() const;
};

// Advantages and returns for every sample in the batch (GAE per env).
void ComputeBatchAdvantages(const RolloutBatch& batch, double gamma,
                            double lambda, Vector& advantages,
                            Vector& returns);

struct PpoLossTerms {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct ActorCriticGrads {
  Vector mean_net;
  Vector log_std;
  Vector value;
  double Norm() const;
  void Scale(double s);
};

// Clipped-surrogate loss on one minibatch (columns of obs/actions). When
// grads is non-null it receives the exact gradient of `total`.
PpoLossTerms PpoMinibatchLoss(const ActorCritic& model, const Matrix& obs,
                              const Matrix& actions,
                              const Vector& old_log_probs,
                              const Vector& advantages, const Vector& returns,
                              const PpoConfig& config, ActorCriticGrads* grads);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
};

// Several epochs of shuffled minibatch updates. Throws DivergenceError when
// a minibatch loss is not finite.
PpoStats PpoUpdate(ActorCritic& model, const RolloutBatch& batch,
                   const PpoConfig& config, Rng& rng);

}  // namespace mamp

#endif  // MULTIAMP_PPO_HPP_
