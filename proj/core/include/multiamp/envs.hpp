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

#ifndef MULTIAMP_ENVS_HPP_
#define MULTIAMP_ENVS_HPP_

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multiamp/motion.hpp"
#include "multiamp/rng.hpp"

namespace mamp {

// Velocity impulse added to the environment's velocity state at the end of
// a step. Empty = no push.
struct Disturbance {
  std::vector<double> velocity_impulse;
  bool active() const { return !velocity_impulse.empty(); }
};

struct StepResult {
  State next;
  std::vector<double> applied_action;  // after clipping/scaling
  bool terminated = false;  // velocity limit exceeded or blow-up
  bool truncated = false;   // episode horizon reached
  bool blowup = false;      // state became non-finite
};

// Shared episode/termination settings.
struct EpisodeConfig {
  int horizon = 400;
  double velocity_limit = 20.0;
};

// A deterministic simulated system. Step is a pure function of the current
// state, the action and the disturbance.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view name() const = 0;
  virtual std::shared_ptr<const StateLayout> layout() const = 0;
  virtual int action_dim() const = 0;
  virtual int proprio_dim() const = 0;
  virtual double control_dt() const = 0;
  // Layout field holding the velocities checked by the termination rule and
  // kicked by pushes.
  virtual std::string_view velocity_field() const = 0;
  // Descriptor fields used when a config does not name its own.
  virtual FieldList DefaultDescriptorFields() const = 0;
  virtual std::unique_ptr<Environment> Clone() const = 0;

  const State& state() const { return state_; }
  void set_state(State state);
  int episode_step() const { return episode_step_; }
  void set_episode_step(int step) { episode_step_ = step; }
  const EpisodeConfig& episode() const { return episode_; }

  // Samples a fresh initial state and zeroes the episode counter.
  void Reset(Rng& rng);
  // Features fed to the policy (size proprio_dim()).
  void Observe(std::span<double> proprio) const;
  std::vector<double> Observe() const;
  StepResult Step(std::span<const double> action,
                  const Disturbance& disturbance = {});

 protected:
  explicit Environment(EpisodeConfig episode) : episode_(episode) {}

  virtual State SampleInitialState(Rng& rng) const = 0;
  virtual void ObserveState(const State& state,
                            std::span<double> proprio) const = 0;
  // Integrates one control period from state with the given action; returns
  // the next state and the applied (clipped) action.
  virtual State Integrate(const State& state, std::span<const double> action,
                          std::vector<double>& applied) const = 0;
  // Recomputes derived fields after the velocities were changed by a push.
  virtual void RefreshDerived(State& state) const = 0;

  State state_;
  EpisodeConfig episode_;
  int episode_step_ = 0;
};

// ---------------------------------------------------------------------------
// Two-link planar arm in the horizontal plane (no gravity).
// ---------------------------------------------------------------------------

struct ReacherConfig {
  double link1 = 1.0;
  double link2 = 0.8;
  double mass1 = 0.5;
  double mass2 = 0.5;
  double damping = 0.1;
  double torque_limit = 5.0;
  double action_scale = 1.0;
  double dt = 0.02;
  // Initial state ranges.
  std::array<double, 2> q1_range = {-0.6, 0.6};
  std::array<double, 2> q2_range = {0.5, 1.9};
  double initial_velocity = 0.5;
};

// State fields: q (2), qd (2), ee (2), ee_vel (2).
class TwoLinkReacher : public Environment {
 public:
  explicit TwoLinkReacher(ReacherConfig config = {},
                          EpisodeConfig episode = {});

  std::string_view name() const override { return "reacher"; }
  std::shared_ptr<const StateLayout> layout() const override {
    return layout_;
  }
  int action_dim() const override { return 2; }
  int proprio_dim() const override { return 10; }
  double control_dt() const override { return config_.dt; }
  std::string_view velocity_field() const override { return "qd"; }
  FieldList DefaultDescriptorFields() const override;
  std::unique_ptr<Environment> Clone() const override;

  const ReacherConfig& config() const { return config_; }

  State MakeState(std::span<const double> q, std::span<const double> qd) const;
  std::array<double, 2> EndEffector(double q1, double q2) const;
  std::array<double, 2> EndEffectorVelocity(double q1, double q2, double qd1,
                                            double qd2) const;
  // Kinetic energy 0.5 * qd^T M(q) qd.
  double Energy(const State& state) const;
  // Joint accelerations from torques (no clipping).
  std::array<double, 2> Accelerations(const State& state,
                                      std::span<const double> torque) const;

 protected:
  State SampleInitialState(Rng& rng) const override;
  void ObserveState(const State& state,
                    std::span<double> proprio) const override;
  State Integrate(const State& state, std::span<const double> action,
                  std::vector<double>& applied) const override;
  void RefreshDerived(State& state) const override;

 private:
  ReacherConfig config_;
  std::shared_ptr<const StateLayout> layout_;
};

// ---------------------------------------------------------------------------
// Planar unicycle driven by forward/turn accelerations.
// ---------------------------------------------------------------------------

struct PointTrackerConfig {
  double accel_limit = 5.0;
  double max_speed = 2.0;
  double max_turn_rate = 2.0;
  double drag = 0.1;
  double dt = 0.02;
};

// State fields: pos (2), heading (1), vel (2) = (forward speed, turn rate).
class PointTracker : public Environment {
 public:
  explicit PointTracker(PointTrackerConfig config = {},
                        EpisodeConfig episode = {});

  std::string_view name() const override { return "point_tracker"; }
  std::shared_ptr<const StateLayout> layout() const override {
    return layout_;
  }
  int action_dim() const override { return 2; }
  int proprio_dim() const override { return 2; }
  double control_dt() const override { return config_.dt; }
  std::string_view velocity_field() const override { return "vel"; }
  FieldList DefaultDescriptorFields() const override;
  std::unique_ptr<Environment> Clone() const override;

  State MakeState(double x, double y, double heading, double v,
                  double omega) const;

 protected:
  State SampleInitialState(Rng& rng) const override;
  void ObserveState(const State& state,
                    std::span<double> proprio) const override;
  State Integrate(const State& state, std::span<const double> action,
                  std::vector<double>& applied) const override;
  void RefreshDerived(State& state) const override;

 private:
  PointTrackerConfig config_;
  std::shared_ptr<const StateLayout> layout_;
};

// ---------------------------------------------------------------------------
// Tasks: command distributions and task rewards.
// ---------------------------------------------------------------------------

// Weights of the effort penalties shared by every task.
struct PenaltyWeights {
  double torque = -1e-4;
  double velocity = -1e-4;
  double acceleration = -1e-4;
};

// Tracking term weight * exp(-err^2 / sigma).
double TrackingTerm(double squared_error, double weight, double sigma);

// weight_tau*|tau|^2 + weight_qd*|qd|^2 + weight_qdd*|qdd|^2.
double EffortPenalty(std::span<const double> torque,
                     std::span<const double> velocity,
                     std::span<const double> acceleration,
                     const PenaltyWeights& weights);

class Task {
 public:
  virtual ~Task() = default;
  virtual std::string_view name() const = 0;
  virtual int command_dim() const = 0;
  // Uniform draw within the configured ranges.
  std::vector<double> SampleCommand(Rng& rng) const;
  virtual double Reward(std::span<const double> command, const State& state,
                        const State& prev_state,
                        std::span<const double> applied_action,
                        double dt) const = 0;
  // Largest attainable reward (tracking weights, zero penalties).
  virtual double MaxReward() const = 0;
  // Policy-facing command features; the raw command by default.
  virtual int feature_dim() const { return command_dim(); }
  virtual void CommandFeatures(std::span<const double> command,
                               std::span<double> out) const;
  const std::vector<std::array<double, 2>>& command_ranges() const {
    return ranges_;
  }

 protected:
  explicit Task(std::vector<std::array<double, 2>> ranges);
  std::vector<std::array<double, 2>> ranges_;
};

struct TaskConfig {
  std::string kind;  // "velocity_tracking", "sweep_speed", "pose_hold"
  std::vector<std::array<double, 2>> command_ranges;  // empty = defaults
  double tracking_weight = 1.5;
  double tracking_sigma = 0.25;
  PenaltyWeights penalties;
};

// Point tracker: command (v_target, omega_target).
class VelocityTrackingTask : public Task {
 public:
  explicit VelocityTrackingTask(const TaskConfig& config);
  std::string_view name() const override { return "velocity_tracking"; }
  int command_dim() const override { return 2; }
  double Reward(std::span<const double> command, const State& state,
                const State& prev_state, std::span<const double> applied,
                double dt) const override;
  double MaxReward() const override { return 2.0 * weight_; }

 private:
  double weight_, sigma_;
  PenaltyWeights penalties_;
};

// Reacher: command = target end-effector speed; rewards moving at that speed
// in any direction, so the direction is left to the style.
class SweepSpeedTask : public Task {
 public:
  explicit SweepSpeedTask(const TaskConfig& config);
  std::string_view name() const override { return "sweep_speed"; }
  int command_dim() const override { return 1; }
  double Reward(std::span<const double> command, const State& state,
                const State& prev_state, std::span<const double> applied,
                double dt) const override;
  double MaxReward() const override { return weight_; }

 private:
  double weight_, sigma_;
  PenaltyWeights penalties_;
};

// Reacher: command = target end-effector position (polar radius, angle);
// rewards reaching it, and holding still once there.
class PoseHoldTask : public Task {
 public:
  explicit PoseHoldTask(const TaskConfig& config);
  std::string_view name() const override { return "pose_hold"; }
  int command_dim() const override { return 2; }
  double Reward(std::span<const double> command, const State& state,
                const State& prev_state, std::span<const double> applied,
                double dt) const override;
  double MaxReward() const override { return 2.0 * weight_; }
  // The target in Cartesian coordinates, which avoids the angle wrap.
  void CommandFeatures(std::span<const double> command,
                       std::span<double> out) const override;
  static std::array<double, 2> TargetPosition(std::span<const double> command);

 private:
  double weight_, sigma_;
  PenaltyWeights penalties_;
};

std::unique_ptr<Task> MakeTask(const TaskConfig& config,
                               std::string_view env_name);

// Task reward after the post-switch buffer window: 0 while
// steps_since_switch < buffer_steps, the raw reward afterwards.
double GatedTaskReward(double raw_reward, int steps_since_switch,
                       int buffer_steps);

// Environment counts per style: floor of the proportional share, leftover
// environments handed out one at a time by descending weight (ties to the
// lower index), then any empty style takes one from the largest style.
std::vector<int> AllocateEnvs(std::span<const int> weights, int total);

// ---------------------------------------------------------------------------
// Pushes.
// ---------------------------------------------------------------------------

struct DisturbanceConfig {
  bool enabled = false;
  int window_start = 100;  // first eligible episode step
  int window_end = 300;    // last eligible episode step
  double magnitude_min = 1.0;
  double magnitude_max = 3.0;
};

// One episode's push plan: impulse applied at a fixed episode step.
struct DisturbanceSchedule {
  bool enabled = false;
  std::vector<int> push_steps;
  std::vector<std::vector<double>> impulses;

  Disturbance At(int episode_step) const;
  // One push at a uniform step in the window, uniform magnitude, random
  // direction in velocity space.
  static DisturbanceSchedule Sample(const DisturbanceConfig& config,
                                    int velocity_dim, Rng& rng);
};

// ---------------------------------------------------------------------------
// Scripted sinusoid motion for the reacher.
// ---------------------------------------------------------------------------

struct JointSinusoid {
  double amplitude = 0.0;
  double frequency = 0.0;  // Hz
  double phase = 0.0;      // rad
  double offset = 0.0;     // rad
};

struct SinusoidParams {
  std::array<JointSinusoid, 2> joints;
  // Default sweep: both joints at 0.4 Hz and 0.4 rad, the elbow leading by a
  // third of a period, around the pose (0, 1.2). The end-effector traces a
  // convex clockwise loop.
  static SinusoidParams DefaultSweep();
};

// Emits reacher states along q_j(t) = offset + A sin(2 pi f t + phase) with
// analytic joint velocities.
class SinusoidSource : public StateSource {
 public:
  SinusoidSource(const TwoLinkReacher& reacher, SinusoidParams params,
                 double dt);
  double dt() const override { return dt_; }
  std::optional<State> Next() override;

 private:
  const TwoLinkReacher& reacher_;
  SinusoidParams params_;
  double dt_;
  long step_ = 0;
};

// Sign of the end-effector path's turning direction between two velocity
// samples: +1 counter-clockwise, -1 clockwise, 0 when either is ~zero.
int TurningSign(std::span<const double> velocity_a,
                std::span<const double> velocity_b, double min_speed = 1e-3);

}  // namespace mamp

#endif  // MULTIAMP_ENVS_HPP_
