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

#include "multiamp/ppo.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "multiamp/errors.hpp"

namespace mamp {

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::vector<int> Widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w = {in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}
}  // namespace

// --- Observation ------------------------------------------------------------

std::vector<double> Observation::Flatten() const {
  std::vector<double> out;
  out.reserve(width());
  out.insert(out.end(), proprio.begin(), proprio.end());
  out.insert(out.end(), command.begin(), command.end());
  out.insert(out.end(), style_selector.begin(), style_selector.end());
  return out;
}

int Observation::ActiveStyle() const {
  int active = -1;
  for (std::size_t i = 0; i < style_selector.size(); ++i) {
    if (style_selector[i] == 1.0) {
      if (active >= 0) return -1;
      active = static_cast<int>(i);
    } else if (style_selector[i] != 0.0) {
      return -1;
    }
  }
  return active;
}

Observation BuildObservation(std::span<const double> proprio,
                             std::span<const double> command, int style_index,
                             int num_styles) {
  if (num_styles < 1) throw ValidationError("need at least one style");
  if (style_index < 0 || style_index >= num_styles) {
    throw ValidationError("style index " + std::to_string(style_index) +
                          " out of range [0, " + std::to_string(num_styles) +
                          ")");
  }
  Observation obs;
  obs.proprio.assign(proprio.begin(), proprio.end());
  obs.command.assign(command.begin(), command.end());
  obs.style_selector.assign(num_styles, 0.0);
  obs.style_selector[style_index] = 1.0;
  return obs;
}

void WriteObservation(std::span<const double> proprio,
                      std::span<const double> command, int style_index,
                      int num_styles, std::span<double> out) {
  if (style_index < 0 || style_index >= num_styles) {
    throw ValidationError("style index out of range");
  }
  if (out.size() != proprio.size() + command.size() +
                        static_cast<std::size_t>(num_styles)) {
    throw ValidationError("observation buffer width mismatch");
  }
  auto it = std::copy(proprio.begin(), proprio.end(), out.begin());
  it = std::copy(command.begin(), command.end(), it);
  std::fill(it, out.end(), 0.0);
  *(it + style_index) = 1.0;
}

double GaussianLogProb(std::span<const double> mean,
                       std::span<const double> log_std,
                       std::span<const double> action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw ValidationError("Gaussian log-prob: dimension mismatch");
  }
  double lp = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double z = (action[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
  }
  return lp;
}

// --- Policy -------------------------------------------------------------------

GaussianPolicy::GaussianPolicy(Mlp mean_net, Vector log_std)
    : mean_net_(std::move(mean_net)), log_std_(std::move(log_std)) {
  if (log_std_.size() != mean_net_.output_dim()) {
    throw ValidationError("log std size does not match the action dimension");
  }
}

double GaussianPolicy::Entropy() const {
  return log_std_.sum() +
         static_cast<double>(log_std_.size()) * (0.5 + kHalfLog2Pi);
}

ActorCritic::ActorCritic(int observation_dim, int action_dim,
                         const PpoConfig& config, Rng& init_rng) {
  Mlp mean(Widths(observation_dim, config.policy_hidden, action_dim),
           config.activation);
  mean.Initialize(InitScheme::kOrthogonal, init_rng, std::sqrt(2.0), 0.01);
  Mlp value(Widths(observation_dim, config.value_hidden, 1),
            config.activation);
  value.Initialize(InitScheme::kOrthogonal, init_rng, std::sqrt(2.0), 1.0);
  *this = ActorCritic(
      GaussianPolicy(std::move(mean),
                     Vector::Constant(action_dim, config.init_log_std)),
      std::move(value), config.learning_rate);
}

ActorCritic::ActorCritic(GaussianPolicy policy, Mlp value,
                         double learning_rate)
    : policy_(std::move(policy)), value_(std::move(value)) {
  if (value_.input_dim() != policy_.observation_dim() ||
      value_.output_dim() != 1) {
    throw ValidationError("value network shape does not match the policy");
  }
  const AdamConfig adam{.learning_rate = learning_rate};
  mean_opt_ = Adam(
      static_cast<Eigen::Index>(policy_.mean_net().num_params()), adam);
  log_std_opt_ = Adam(policy_.log_std().size(), adam);
  value_opt_ = Adam(static_cast<Eigen::Index>(value_.num_params()), adam);
}

ActResult ActorCritic::Act(std::span<const double> observation, Rng& rng,
                           bool deterministic) const {
  if (static_cast<int>(observation.size()) != observation_dim()) {
    throw ValidationError("observation width " +
                          std::to_string(observation.size()) +
                          " does not match policy input " +
                          std::to_string(observation_dim()));
  }
  ActResult out;
  const std::vector<double> mean = policy_.mean_net().Forward(observation);
  out.action = mean;
  if (!deterministic) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      out.action[j] += std::exp(policy_.log_std()(j)) * rng.Normal();
    }
  }
  out.log_prob = GaussianLogProb(
      mean, {policy_.log_std().data(), mean.size()}, out.action);
  out.value = value_.Forward(observation)[0];
  return out;
}

void ActorCritic::SetLearningRate(double lr) {
  mean_opt_.set_learning_rate(lr);
  log_std_opt_.set_learning_rate(lr);
  value_opt_.set_learning_rate(lr);
}

std::int64_t ActorCritic::divergence_count() const {
  return mean_opt_.divergence_count() + log_std_opt_.divergence_count() +
         value_opt_.divergence_count();
}

void ActorCritic::Save(BinaryWriter& out) const {
  out.Magic("ACTC");
  policy_.mean_net().Save(out);
  out.Doubles({policy_.log_std().data(),
               static_cast<std::size_t>(policy_.log_std().size())});
  value_.Save(out);
  mean_opt_.Save(out);
  log_std_opt_.Save(out);
  value_opt_.Save(out);
}

void ActorCritic::Load(BinaryReader& in) {
  in.ExpectMagic("ACTC", "actor-critic state");
  Mlp mean = Mlp::Load(in);
  std::vector<double> log_std = in.Doubles();
  Mlp value = Mlp::Load(in);
  if (mean.widths() != policy_.mean_net().widths() ||
      mean.activation() != policy_.mean_net().activation() ||
      value.widths() != value_.widths() ||
      static_cast<Eigen::Index>(log_std.size()) != policy_.log_std().size()) {
    throw IncompatibleError(
        "policy/value architecture does not match the configuration");
  }
  policy_ = GaussianPolicy(
      std::move(mean),
      Eigen::Map<Vector>(log_std.data(), static_cast<Eigen::Index>(log_std.size())));
  value_ = std::move(value);
  mean_opt_.Load(in);
  log_std_opt_.Load(in);
  value_opt_.Load(in);
}

bool ActorCritic::SameParameters(const ActorCritic& other) const {
  return policy_.mean_net() == other.policy_.mean_net() &&
         (policy_.log_std().array() == other.policy_.log_std().array()).all() &&
         value_ == other.value_;
}

// --- GAE --------------------------------------------------------------------

GaeResult ComputeGae(std::span<const double> rewards,
                     std::span<const double> values,
                     std::span<const std::uint8_t> terminals,
                     double bootstrap_value, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || terminals.size() != n) {
    throw ValidationError("GAE: rewards, values and terminals differ in length");
  }
  if (gamma < 0.0 || gamma > 1.0 || lambda < 0.0 || lambda > 1.0) {
    throw ValidationError("GAE: gamma and lambda must lie in [0, 1]");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_value = bootstrap_value;
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = terminals[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

// --- Batch --------------------------------------------------------------------

RolloutBatch::RolloutBatch(int num_envs_, int horizon_, int observation_dim,
                           int action_dim)
    : num_envs(num_envs_), horizon(horizon_) {
  const int n = num_envs * horizon;
  observations = Matrix::Zero(observation_dim, n);
  actions = Matrix::Zero(action_dim, n);
  log_probs = Vector::Zero(n);
  values = Vector::Zero(n);
  task_rewards = Vector::Zero(n);
  style_rewards = Vector::Zero(n);
  terminals.assign(n, 0);
  styles.assign(n, 0);
  bootstrap_values = Vector::Zero(num_envs);
}

Vector RolloutBatch::TotalRewards() const {
  return task_rewards + style_rewards;
}

void ComputeBatchAdvantages(const RolloutBatch& batch, double gamma,
                            double lambda, Vector& advantages,
                            Vector& returns) {
  const int n = batch.size();
  const int T = batch.horizon;
  const Vector total = batch.TotalRewards();
  advantages.resize(n);
  returns.resize(n);
  std::vector<double> r(T), v(T);
  std::vector<std::uint8_t> d(T);
  for (int e = 0; e < batch.num_envs; ++e) {
    for (int t = 0; t < T; ++t) {
      const int i = RolloutBatch::Index(t, e, batch.num_envs);
      r[t] = total(i);
      v[t] = batch.values(i);
      d[t] = batch.terminals[i];
    }
    const GaeResult g =
        ComputeGae(r, v, d, batch.bootstrap_values(e), gamma, lambda);
    for (int t = 0; t < T; ++t) {
      const int i = RolloutBatch::Index(t, e, batch.num_envs);
      advantages(i) = g.advantages[t];
      returns(i) = g.returns[t];
    }
  }
}

// --- Loss ---------------------------------------------------------------------

double ActorCriticGrads::Norm() const {
  return std::sqrt(mean_net.squaredNorm() + log_std.squaredNorm() +
                   value.squaredNorm());
}

void ActorCriticGrads::Scale(double s) {
  mean_net *= s;
  log_std *= s;
  value *= s;
}

PpoLossTerms PpoMinibatchLoss(const ActorCritic& model, const Matrix& obs,
                              const Matrix& actions,
                              const Vector& old_log_probs,
                              const Vector& advantages, const Vector& returns,
                              const PpoConfig& config,
                              ActorCriticGrads* grads) {
  const Eigen::Index n = obs.cols();
  if (n == 0 || actions.cols() != n || old_log_probs.size() != n ||
      advantages.size() != n || returns.size() != n) {
    throw ValidationError("PPO loss: minibatch arrays are not congruent");
  }
  const auto& policy = model.policy();
  const Vector& log_std = policy.log_std();
  const Vector inv_var = (-2.0 * log_std.array()).exp();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double eps = config.clip_epsilon;

  MlpTape mean_tape, value_tape;
  const Matrix mean = policy.mean_net().Forward(obs, mean_tape);
  const Matrix value = model.value().Forward(obs, value_tape);
  const Matrix diff = actions - mean;

  PpoLossTerms out;
  Matrix d_mean(mean.rows(), n);
  Vector d_log_std = Vector::Zero(log_std.size());
  Matrix d_value(1, n);
  const double log_norm = log_std.sum() +
                          static_cast<double>(log_std.size()) * kHalfLog2Pi;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double logp =
        -0.5 * (diff.col(i).array().square() * inv_var.array()).sum() -
        log_norm;
    const double log_ratio = logp - old_log_probs(i);
    const double ratio = std::exp(log_ratio);
    const double a = advantages(i);
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    const double s1 = ratio * a;
    const double s2 = clipped * a;
    out.policy_loss -= std::min(s1, s2) * inv_n;
    out.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
    if (std::abs(ratio - 1.0) > eps) out.clip_fraction += inv_n;
    // d(-min)/d logp: the unclipped branch carries gradient when selected.
    const double g_logp = s1 <= s2 ? -s1 * inv_n : 0.0;
    d_mean.col(i) = g_logp * (diff.col(i).array() * inv_var.array()).matrix();
    d_log_std.array() +=
        g_logp * (diff.col(i).array().square() * inv_var.array() - 1.0);
    const double verr = value(0, i) - returns(i);
    out.value_loss += verr * verr * inv_n;
    d_value(0, i) = config.value_coef * 2.0 * verr * inv_n;
  }
  out.entropy = policy.Entropy();
  out.total = out.policy_loss + config.value_coef * out.value_loss -
              config.entropy_coef * out.entropy;

  if (grads != nullptr) {
    grads->mean_net = Vector::Zero(
        static_cast<Eigen::Index>(policy.mean_net().num_params()));
    grads->value =
        Vector::Zero(static_cast<Eigen::Index>(model.value().num_params()));
    policy.mean_net().Backward(mean_tape, d_mean, grads->mean_net, nullptr);
    model.value().Backward(value_tape, d_value, grads->value, nullptr);
    grads->log_std = d_log_std.array() - config.entropy_coef;
  }
  return out;
}

PpoStats PpoUpdate(ActorCritic& model, const RolloutBatch& batch,
                   const PpoConfig& config, Rng& rng) {
  const int n = batch.size();
  if (n == 0) throw ValidationError("PPO update on an empty batch");
  if (config.epochs < 0 || config.minibatch_size < 1) {
    throw ValidationError("PPO epochs/minibatch size must be positive");
  }
  Vector advantages, returns;
  ComputeBatchAdvantages(batch, config.gamma, config.lambda, advantages,
                         returns);
  if (config.normalize_advantages && n > 1) {
    const double mean = advantages.mean();
    const double var = (advantages.array() - mean).square().mean();
    advantages = (advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int mb = std::min(config.minibatch_size, n);
  PpoStats stats;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.UniformIndex(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    for (int start = 0; start + mb <= n; start += mb) {
      Matrix obs(batch.observations.rows(), mb);
      Matrix act(batch.actions.rows(), mb);
      Vector old_lp(mb), adv(mb), ret(mb);
      for (int k = 0; k < mb; ++k) {
        const int s = order[start + k];
        obs.col(k) = batch.observations.col(s);
        act.col(k) = batch.actions.col(s);
        old_lp(k) = batch.log_probs(s);
        adv(k) = advantages(s);
        ret(k) = returns(s);
      }
      ActorCriticGrads grads;
      const PpoLossTerms terms =
          PpoMinibatchLoss(model, obs, act, old_lp, adv, ret, config, &grads);
      if (!std::isfinite(terms.total)) {
        throw DivergenceError("PPO minibatch loss is not finite (epoch " +
                              std::to_string(epoch) + ")");
      }
      if (config.max_grad_norm > 0.0) {
        const double norm = grads.Norm();
        if (norm > config.max_grad_norm) {
          grads.Scale(config.max_grad_norm / norm);
        }
      }
      model.mean_optimizer().Step(model.policy().mean_net().params(),
                                  grads.mean_net);
      model.log_std_optimizer().Step(model.policy().log_std(), grads.log_std);
      model.value_optimizer().Step(model.value().params(), grads.value);

      stats.policy_loss += terms.policy_loss;
      stats.value_loss += terms.value_loss;
      stats.entropy += terms.entropy;
      stats.approx_kl += terms.approx_kl;
      stats.clip_fraction += terms.clip_fraction;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double inv = 1.0 / stats.minibatches;
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.approx_kl *= inv;
    stats.clip_fraction *= inv;
  }
  return stats;
}

}  // namespace mamp
