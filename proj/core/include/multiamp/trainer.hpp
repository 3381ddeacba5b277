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

#ifndef MULTIAMP_TRAINER_HPP_
#define MULTIAMP_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "multiamp/adversary.hpp"
#include "multiamp/config.hpp"
#include "multiamp/envs.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/ppo.hpp"

namespace mamp {

std::unique_ptr<Environment> MakeEnvironment(const EnvConfig& config);

// Clips of each configured style, read from its clip files (empty for
// data-free styles).
std::vector<std::vector<MotionClip>> LoadStyleClips(const TrainerConfig& config);

// Everything needed to act and to score styles: policy, value function and
// the per-style slots, plus the environment/task definitions they refer to.
class MultiAmpModel {
 public:
  // Fresh networks initialized from the config seed.
  MultiAmpModel(TrainerConfig config,
                std::vector<std::vector<MotionClip>> style_clips);
  MultiAmpModel(const MultiAmpModel& other);
  MultiAmpModel& operator=(const MultiAmpModel& other);
  MultiAmpModel(MultiAmpModel&&) = default;
  MultiAmpModel& operator=(MultiAmpModel&&) = default;

  const TrainerConfig& config() const { return config_; }
  int num_styles() const { return config_.num_styles(); }
  const Environment& prototype() const { return *prototype_; }
  const Task& task(int style) const { return *tasks_.at(style); }
  const std::vector<std::vector<MotionClip>>& style_clips() const {
    return style_clips_;
  }
  const FieldList& descriptor_fields() const { return fields_; }
  const DescriptorMap& descriptor_map() const { return descriptor_map_; }
  int descriptor_dim() const { return descriptor_map_.dim(); }
  int command_width() const { return command_width_; }
  int observation_dim() const;

  ActorCritic& actor_critic() { return actor_critic_; }
  const ActorCritic& actor_critic() const { return actor_critic_; }
  std::vector<StyleSlot>& slots() { return slots_; }
  const std::vector<StyleSlot>& slots() const { return slots_; }

  // Policy input for the environment's current state.
  void WriteObservation(const Environment& env,
                        std::span<const double> command, int style,
                        std::span<double> out) const;

  // Parameters, optimizer states, buffers and normalizers (not the config).
  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);

 private:
  TrainerConfig config_;
  std::vector<std::vector<MotionClip>> style_clips_;
  std::unique_ptr<Environment> prototype_;
  std::vector<std::unique_ptr<Task>> tasks_;
  FieldList fields_;
  DescriptorMap descriptor_map_;
  int command_width_ = 0;
  ActorCritic actor_critic_;
  std::vector<StyleSlot> slots_;
};

struct StyleEpochMetrics {
  double task_reward_mean = 0.0;
  double style_reward_mean = 0.0;
  double disc_loss = 0.0;      // NaN when no update ran
  double disc_accuracy = 0.0;  // NaN for data-free styles
};

struct EpochReport {
  int epoch = 0;
  std::vector<StyleEpochMetrics> styles;
  PpoStats ppo;
  double steps_per_sec = 0.0;
};

std::string MetricsHeader(int num_styles);
std::string MetricsRow(const EpochReport& report);

// Counters checking the post-switch task-reward gate over the samples that
// entered rollout batches.
struct GateAudit {
  std::int64_t switches = 0;
  std::int64_t window_steps = 0;     // samples inside a gate window
  std::int64_t window_nonzero = 0;   // ... whose logged task reward != 0
  std::int64_t post_window_steps = 0;     // gated style, window expired
  std::int64_t post_window_positive = 0;  // ... with task reward > 0
};

// Per-environment runtime state owned by the trainer.
struct EnvRuntime {
  std::unique_ptr<Environment> env;
  Rng rng;
  int home_style = 0;
  int active_style = 0;
  int steps_since_switch = 0;
  std::vector<double> command;
  DisturbanceSchedule schedule;
};

class Trainer {
 public:
  // Loads datasets named in the config; throws on schema/dt mismatch.
  explicit Trainer(TrainerConfig config);
  Trainer(TrainerConfig config,
          std::vector<std::vector<MotionClip>> style_clips);

  const TrainerConfig& config() const { return model_.config(); }
  MultiAmpModel& model() { return model_; }
  const MultiAmpModel& model() const { return model_; }
  int epoch() const { return epoch_; }
  const std::vector<int>& env_counts() const { return env_counts_; }
  const GateAudit& gate_audit() const { return gate_; }
  const std::vector<EnvRuntime>& envs() const { return envs_; }
  // The batch collected by the most recent epoch.
  const RolloutBatch& last_batch() const { return batch_; }

  // One rollout + discriminator updates + PPO update.
  EpochReport RunEpoch();

  void SaveCheckpoint(const std::filesystem::path& path) const;
  void LoadCheckpoint(const std::filesystem::path& path);

 private:
  void ResetEnv(EnvRuntime& rt);
  void CollectChunk(int begin, int end, const ActorCritic& frozen);
  void AnnotateStyleRewards(std::vector<StyleEpochMetrics>& metrics);
  void UpdateDiscriminators(std::vector<StyleEpochMetrics>& metrics);

  MultiAmpModel model_;
  std::vector<int> env_counts_;
  std::vector<EnvRuntime> envs_;
  Rng rng_;
  int epoch_ = 0;
  GateAudit gate_;

  RolloutBatch batch_;
  Matrix descriptors_;                 // 2 d_d x N, raw
  std::vector<std::uint8_t> storable_;  // descriptor may enter a buffer
  std::vector<int> since_switch_;        // steps since the last switch
  std::vector<std::uint8_t> switched_;   // a switch followed this sample
};

struct TrainOptions {
  std::optional<std::filesystem::path> resume;
  // Called after each epoch (after the metrics row is written).
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainResult {
  std::filesystem::path metrics_path;
  std::filesystem::path final_checkpoint;
  GateAudit gate;
  int epochs_run = 0;
};

// Runs the configured epoch budget, writing metrics.csv, gate_audit.csv and
// checkpoints under config.output_dir.
TrainResult Train(const TrainerConfig& config, const TrainOptions& options = {});

// Checkpoint sidecar path (<checkpoint>.json).
std::filesystem::path SidecarPath(const std::filesystem::path& checkpoint);

struct CheckpointInfo {
  std::uint32_t version = 0;
  int epoch = 0;
  std::string config_hash;
  std::string config_json;
  std::vector<int> policy_widths;
  std::vector<int> value_widths;
  std::vector<std::vector<int>> discriminator_widths;
};

CheckpointInfo ReadCheckpointInfo(const std::filesystem::path& path);

// Policy, value function and discriminators stored in a checkpoint.
MultiAmpModel LoadModel(const std::filesystem::path& checkpoint);

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

struct EvalOptions {
  int style = 0;
  int episodes = 1;
  bool deterministic = true;
  std::uint64_t seed = 0;
  int max_steps = 0;      // per episode; 0 = environment horizon
  int warmup_steps = 50;  // excluded from the sweep-direction counts
  bool null_policy = false;  // zero action instead of the policy
};

struct EvalReport {
  int style = 0;
  int episodes = 0;
  long steps = 0;
  double mean_task_reward = 0.0;   // raw (ungated) task reward per step
  double mean_style_reward = 0.0;  // scaled, per step
  // Turning direction of the end-effector path over post-warmup steps
  // (reacher only): fraction of steps turning clockwise / counter-clockwise.
  long sweep_steps = 0;
  double clockwise_fraction = 0.0;
  double counterclockwise_fraction = 0.0;
  double mean_sweep_sign = 0.0;
};

EvalReport Evaluate(const MultiAmpModel& model, const EvalOptions& options);

struct SwitchTestOptions {
  int from_style = 0;
  int to_style = 1;
  int switch_step = 200;
  int total_steps = 400;
  int window = 20;  // steps in the majority vote
  std::uint64_t seed = 0;
};

struct SwitchTestReport {
  int sign_before = 0;  // majority turning sign just before the switch
  int sign_after = 0;   // majority sign at the end of the run
  // Steps after the switch until the windowed majority first equals
  // sign_after and stays; -1 if it never settles.
  int steps_to_flip = -1;
};

// Runs one deterministic episode with the selector set to from_style, then
// switches it to to_style at switch_step.
SwitchTestReport RunSwitchTest(const MultiAmpModel& model,
                               const SwitchTestOptions& options);

// Records the descriptor of a policy rollout with the style active.
MotionClip RecordPolicyClip(const MultiAmpModel& model, int style, int steps,
                            std::uint64_t seed, std::string name);

}  // namespace mamp

#endif  // MULTIAMP_TRAINER_HPP_
