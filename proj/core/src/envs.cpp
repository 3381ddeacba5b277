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

#include "multiamp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "multiamp/errors.hpp"

namespace mamp {

// --- Environment --------------------------------------------------------------

void Environment::set_state(State state) {
  if (state.layout_ptr() != layout()) {
    throw SchemaError("state layout does not belong to environment '" +
                      std::string(name()) + "'");
  }
  state_ = std::move(state);
}

void Environment::Reset(Rng& rng) {
  state_ = SampleInitialState(rng);
  episode_step_ = 0;
}

void Environment::Observe(std::span<double> proprio) const {
  if (static_cast<int>(proprio.size()) != proprio_dim()) {
    throw ValidationError("observation buffer has the wrong width");
  }
  ObserveState(state_, proprio);
}

std::vector<double> Environment::Observe() const {
  std::vector<double> out(proprio_dim());
  ObserveState(state_, out);
  return out;
}

StepResult Environment::Step(std::span<const double> action,
                             const Disturbance& disturbance) {
  if (static_cast<int>(action.size()) != action_dim()) {
    throw ValidationError("action has width " + std::to_string(action.size()) +
                          ", expected " + std::to_string(action_dim()));
  }
  for (double a : action) {
    if (!std::isfinite(a)) throw ValidationError("action is not finite");
  }
  StepResult result;
  result.next = Integrate(state_, action, result.applied_action);
  if (disturbance.active()) {
    auto vel = result.next.mutable_field(velocity_field());
    if (disturbance.velocity_impulse.size() != vel.size()) {
      throw ValidationError("push impulse width does not match velocities");
    }
    for (std::size_t j = 0; j < vel.size(); ++j) {
      vel[j] += disturbance.velocity_impulse[j];
    }
    RefreshDerived(result.next);
  }
  ++episode_step_;
  if (!result.next.AllFinite()) {
    result.blowup = true;
    result.terminated = true;
  } else {
    const auto vel = result.next.field(velocity_field());
    for (double v : *vel) {
      if (std::abs(v) > episode_.velocity_limit) result.terminated = true;
    }
  }
  result.truncated = episode_step_ >= episode_.horizon;
  state_ = result.next;
  return result;
}

// --- TwoLinkReacher -------------------------------------------------------------

TwoLinkReacher::TwoLinkReacher(ReacherConfig config, EpisodeConfig episode)
    : Environment(episode),
      config_(config),
      layout_(std::make_shared<const StateLayout>(StateLayout{
          {"q", 2}, {"qd", 2}, {"ee", 2}, {"ee_vel", 2}})) {
  if (config_.dt <= 0.0 || config_.link1 <= 0.0 || config_.link2 <= 0.0 ||
      config_.mass1 <= 0.0 || config_.mass2 <= 0.0) {
    throw ValidationError("reacher: lengths, masses and dt must be positive");
  }
  const double q[2] = {0.0, 1.2};
  const double qd[2] = {0.0, 0.0};
  state_ = MakeState(q, qd);
}

FieldList TwoLinkReacher::DefaultDescriptorFields() const {
  return {{"q", FieldKind::kPosition, 2},
          {"qd", FieldKind::kVelocity, 2},
          {"ee", FieldKind::kPosition, 2}};
}

std::unique_ptr<Environment> TwoLinkReacher::Clone() const {
  return std::make_unique<TwoLinkReacher>(*this);
}

std::array<double, 2> TwoLinkReacher::EndEffector(double q1, double q2) const {
  return {config_.link1 * std::cos(q1) + config_.link2 * std::cos(q1 + q2),
          config_.link1 * std::sin(q1) + config_.link2 * std::sin(q1 + q2)};
}

std::array<double, 2> TwoLinkReacher::EndEffectorVelocity(double q1, double q2,
                                                          double qd1,
                                                          double qd2) const {
  const double s1 = std::sin(q1), c1 = std::cos(q1);
  const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
  const double l1 = config_.link1, l2 = config_.link2;
  return {-(l1 * s1 + l2 * s12) * qd1 - l2 * s12 * qd2,
          (l1 * c1 + l2 * c12) * qd1 + l2 * c12 * qd2};
}

State TwoLinkReacher::MakeState(std::span<const double> q,
                                std::span<const double> qd) const {
  if (q.size() != 2 || qd.size() != 2) {
    throw ValidationError("reacher state needs 2 joint angles and velocities");
  }
  State s(layout_, std::vector<double>(8, 0.0));
  auto v = s.mutable_values();
  v[0] = q[0];
  v[1] = q[1];
  v[2] = qd[0];
  v[3] = qd[1];
  RefreshDerived(s);
  return s;
}

void TwoLinkReacher::RefreshDerived(State& state) const {
  auto v = state.mutable_values();
  const auto ee = EndEffector(v[0], v[1]);
  const auto ee_vel = EndEffectorVelocity(v[0], v[1], v[2], v[3]);
  v[4] = ee[0];
  v[5] = ee[1];
  v[6] = ee_vel[0];
  v[7] = ee_vel[1];
}

namespace {
struct ArmInertia {
  double m11, m12, m22, h;
};

ArmInertia ComputeInertia(const ReacherConfig& c, double q2) {
  const double lc1 = 0.5 * c.link1, lc2 = 0.5 * c.link2;
  const double i1 = c.mass1 * c.link1 * c.link1 / 12.0;
  const double i2 = c.mass2 * c.link2 * c.link2 / 12.0;
  const double a = i1 + i2 + c.mass1 * lc1 * lc1 +
                   c.mass2 * (c.link1 * c.link1 + lc2 * lc2);
  const double b = c.mass2 * c.link1 * lc2;
  const double d = i2 + c.mass2 * lc2 * lc2;
  const double cq = std::cos(q2);
  return {a + 2.0 * b * cq, d + b * cq, d, b * std::sin(q2)};
}
}  // namespace

double TwoLinkReacher::Energy(const State& state) const {
  const auto v = state.values();
  const ArmInertia m = ComputeInertia(config_, v[1]);
  const double qd1 = v[2], qd2 = v[3];
  return 0.5 * (m.m11 * qd1 * qd1 + 2.0 * m.m12 * qd1 * qd2 +
                m.m22 * qd2 * qd2);
}

std::array<double, 2> TwoLinkReacher::Accelerations(
    const State& state, std::span<const double> torque) const {
  const auto v = state.values();
  const ArmInertia m = ComputeInertia(config_, v[1]);
  const double qd1 = v[2], qd2 = v[3];
  // Coriolis/centrifugal terms of the planar two-link arm.
  const double c1 = -m.h * (2.0 * qd1 * qd2 + qd2 * qd2);
  const double c2 = m.h * qd1 * qd1;
  const double r1 = torque[0] - c1 - config_.damping * qd1;
  const double r2 = torque[1] - c2 - config_.damping * qd2;
  const double det = m.m11 * m.m22 - m.m12 * m.m12;
  return {(m.m22 * r1 - m.m12 * r2) / det, (m.m11 * r2 - m.m12 * r1) / det};
}

State TwoLinkReacher::Integrate(const State& state,
                                std::span<const double> action,
                                std::vector<double>& applied) const {
  applied.resize(2);
  for (int j = 0; j < 2; ++j) {
    applied[j] = std::clamp(action[j] * config_.action_scale,
                            -config_.torque_limit, config_.torque_limit);
  }
  const auto qdd = Accelerations(state, applied);
  const auto v = state.values();
  const double dt = config_.dt;
  // Semi-implicit Euler: velocities first, positions with the new velocities.
  const double qd[2] = {v[2] + dt * qdd[0], v[3] + dt * qdd[1]};
  const double q[2] = {v[0] + dt * qd[0], v[1] + dt * qd[1]};
  return MakeState(q, qd);
}

State TwoLinkReacher::SampleInitialState(Rng& rng) const {
  const double q[2] = {rng.Uniform(config_.q1_range[0], config_.q1_range[1]),
                       rng.Uniform(config_.q2_range[0], config_.q2_range[1])};
  const double w = config_.initial_velocity;
  const double qd[2] = {rng.Uniform(-w, w), rng.Uniform(-w, w)};
  return MakeState(q, qd);
}

void TwoLinkReacher::ObserveState(const State& state,
                                  std::span<double> proprio) const {
  const auto v = state.values();
  proprio[0] = std::sin(v[0]);
  proprio[1] = std::cos(v[0]);
  proprio[2] = std::sin(v[1]);
  proprio[3] = std::cos(v[1]);
  proprio[4] = 0.2 * v[2];
  proprio[5] = 0.2 * v[3];
  proprio[6] = v[4];
  proprio[7] = v[5];
  proprio[8] = 0.5 * v[6];
  proprio[9] = 0.5 * v[7];
}

// --- PointTracker ---------------------------------------------------------------

PointTracker::PointTracker(PointTrackerConfig config, EpisodeConfig episode)
    : Environment(episode),
      config_(config),
      layout_(std::make_shared<const StateLayout>(
          StateLayout{{"pos", 2}, {"heading", 1}, {"vel", 2}})) {
  if (config_.dt <= 0.0) throw ValidationError("point tracker: dt must be > 0");
  state_ = MakeState(0.0, 0.0, 0.0, 0.0, 0.0);
}

FieldList PointTracker::DefaultDescriptorFields() const {
  return {{"vel", FieldKind::kVelocity, 2}};
}

std::unique_ptr<Environment> PointTracker::Clone() const {
  return std::make_unique<PointTracker>(*this);
}

State PointTracker::MakeState(double x, double y, double heading, double v,
                              double omega) const {
  return State(layout_, {x, y, heading, v, omega});
}

void PointTracker::RefreshDerived(State& state) const {
  auto v = state.mutable_values();
  v[3] = std::clamp(v[3], -config_.max_speed, config_.max_speed);
  v[4] = std::clamp(v[4], -config_.max_turn_rate, config_.max_turn_rate);
}

State PointTracker::Integrate(const State& state,
                              std::span<const double> action,
                              std::vector<double>& applied) const {
  applied.resize(2);
  for (int j = 0; j < 2; ++j) {
    applied[j] =
        std::clamp(action[j], -config_.accel_limit, config_.accel_limit);
  }
  const auto s = state.values();
  const double dt = config_.dt;
  double v = s[3] + dt * (applied[0] - config_.drag * s[3]);
  double w = s[4] + dt * (applied[1] - config_.drag * s[4]);
  v = std::clamp(v, -config_.max_speed, config_.max_speed);
  w = std::clamp(w, -config_.max_turn_rate, config_.max_turn_rate);
  const double heading = s[2] + dt * w;
  return MakeState(s[0] + dt * v * std::cos(heading),
                   s[1] + dt * v * std::sin(heading), heading, v, w);
}

State PointTracker::SampleInitialState(Rng& rng) const {
  return MakeState(0.0, 0.0, rng.Uniform(-std::numbers::pi, std::numbers::pi),
                   0.0, 0.0);
}

void PointTracker::ObserveState(const State& state,
                                std::span<double> proprio) const {
  const auto s = state.values();
  proprio[0] = s[3];
  proprio[1] = s[4];
}

// --- Rewards ----------------------------------------------------------------------

double TrackingTerm(double squared_error, double weight, double sigma) {
  return weight * std::exp(-squared_error / sigma);
}

double EffortPenalty(std::span<const double> torque,
                     std::span<const double> velocity,
                     std::span<const double> acceleration,
                     const PenaltyWeights& weights) {
  auto sq = [](std::span<const double> x) {
    return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  };
  return weights.torque * sq(torque) + weights.velocity * sq(velocity) +
         weights.acceleration * sq(acceleration);
}

namespace {
std::vector<double> FiniteDifference(std::span<const double> now,
                                     std::span<const double> prev, double dt) {
  std::vector<double> out(now.size());
  for (std::size_t j = 0; j < now.size(); ++j) out[j] = (now[j] - prev[j]) / dt;
  return out;
}

std::vector<std::array<double, 2>> RangesOr(
    const std::vector<std::array<double, 2>>& given,
    std::vector<std::array<double, 2>> fallback) {
  return given.empty() ? std::move(fallback) : given;
}
}  // namespace

Task::Task(std::vector<std::array<double, 2>> ranges)
    : ranges_(std::move(ranges)) {
  for (const auto& r : ranges_) {
    if (!(r[0] <= r[1])) throw ValidationError("command range has lo > hi");
  }
}

std::vector<double> Task::SampleCommand(Rng& rng) const {
  std::vector<double> out(ranges_.size());
  for (std::size_t i = 0; i < ranges_.size(); ++i) {
    out[i] = rng.Uniform(ranges_[i][0], ranges_[i][1]);
  }
  return out;
}

void Task::CommandFeatures(std::span<const double> command,
                           std::span<double> out) const {
  if (static_cast<int>(command.size()) != command_dim() ||
      static_cast<int>(out.size()) < feature_dim()) {
    throw ValidationError("command has width " + std::to_string(command.size()) +
                          ", expected " + std::to_string(command_dim()));
  }
  std::copy(command.begin(), command.end(), out.begin());
}

VelocityTrackingTask::VelocityTrackingTask(const TaskConfig& config)
    : Task(RangesOr(config.command_ranges, {{-1.0, 1.0}, {-1.0, 1.0}})),
      weight_(config.tracking_weight),
      sigma_(config.tracking_sigma),
      penalties_(config.penalties) {
  if (ranges_.size() != 2) {
    throw ValidationError("velocity_tracking needs 2 command ranges");
  }
}

double VelocityTrackingTask::Reward(std::span<const double> command,
                                    const State& state,
                                    const State& prev_state,
                                    std::span<const double> applied,
                                    double dt) const {
  const auto vel = *state.field("vel");
  const auto prev_vel = *prev_state.field("vel");
  const double ev = command[0] - vel[0];
  const double ew = command[1] - vel[1];
  return TrackingTerm(ev * ev, weight_, sigma_) +
         TrackingTerm(ew * ew, weight_, sigma_) +
         EffortPenalty(applied, vel, FiniteDifference(vel, prev_vel, dt),
                       penalties_);
}

SweepSpeedTask::SweepSpeedTask(const TaskConfig& config)
    : Task(RangesOr(config.command_ranges, {{0.8, 1.1}})),
      weight_(config.tracking_weight),
      sigma_(config.tracking_sigma),
      penalties_(config.penalties) {
  if (ranges_.size() != 1) {
    throw ValidationError("sweep_speed needs 1 command range");
  }
}

double SweepSpeedTask::Reward(std::span<const double> command,
                              const State& state, const State& prev_state,
                              std::span<const double> applied,
                              double dt) const {
  const auto ee_vel = *state.field("ee_vel");
  const auto qd = *state.field("qd");
  const double speed = std::hypot(ee_vel[0], ee_vel[1]);
  const double err = command[0] - speed;
  return TrackingTerm(err * err, weight_, sigma_) +
         EffortPenalty(applied, qd,
                       FiniteDifference(qd, *prev_state.field("qd"), dt),
                       penalties_);
}

PoseHoldTask::PoseHoldTask(const TaskConfig& config)
    : Task(RangesOr(config.command_ranges,
                    {{0.6, 1.6}, {-std::numbers::pi, std::numbers::pi}})),
      weight_(config.tracking_weight),
      sigma_(config.tracking_sigma),
      penalties_(config.penalties) {
  if (ranges_.size() != 2) {
    throw ValidationError("pose_hold needs 2 command ranges");
  }
}

void PoseHoldTask::CommandFeatures(std::span<const double> command,
                                   std::span<double> out) const {
  const auto target = TargetPosition(command);
  out[0] = target[0];
  out[1] = target[1];
}

std::array<double, 2> PoseHoldTask::TargetPosition(
    std::span<const double> command) {
  return {command[0] * std::cos(command[1]), command[0] * std::sin(command[1])};
}

double PoseHoldTask::Reward(std::span<const double> command,
                            const State& state, const State& prev_state,
                            std::span<const double> applied, double dt) const {
  const auto ee = *state.field("ee");
  const auto ee_vel = *state.field("ee_vel");
  const auto qd = *state.field("qd");
  const auto target = TargetPosition(command);
  const double dx = target[0] - ee[0], dy = target[1] - ee[1];
  const double speed_sq = ee_vel[0] * ee_vel[0] + ee_vel[1] * ee_vel[1];
  // stillness only pays near the target, otherwise standing anywhere is a
  // local optimum worth half the maximum
  const double reach = std::exp(-(dx * dx + dy * dy) / sigma_);
  return weight_ * reach + reach * TrackingTerm(speed_sq, weight_, sigma_) +
         EffortPenalty(applied, qd,
                       FiniteDifference(qd, *prev_state.field("qd"), dt),
                       penalties_);
}

std::unique_ptr<Task> MakeTask(const TaskConfig& config,
                               std::string_view env_name) {
  if (config.kind == "velocity_tracking") {
    if (env_name != "point_tracker") {
      throw ValidationError("velocity_tracking requires the point_tracker env");
    }
    return std::make_unique<VelocityTrackingTask>(config);
  }
  if (config.kind == "sweep_speed" || config.kind == "pose_hold") {
    if (env_name != "reacher") {
      throw ValidationError(config.kind + " requires the reacher env");
    }
    if (config.kind == "sweep_speed") {
      return std::make_unique<SweepSpeedTask>(config);
    }
    return std::make_unique<PoseHoldTask>(config);
  }
  throw ValidationError("unknown task kind '" + config.kind + "'");
}

double GatedTaskReward(double raw_reward, int steps_since_switch,
                       int buffer_steps) {
  if (steps_since_switch < 0 || buffer_steps < 0) {
    throw ValidationError("gate counters must be non-negative");
  }
  return steps_since_switch < buffer_steps ? 0.0 : raw_reward;
}

std::vector<int> AllocateEnvs(std::span<const int> weights, int total) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw ValidationError("no styles to allocate environments to");
  for (int w : weights) {
    if (w <= 0) throw ValidationError("style weights must be positive");
  }
  if (total < n) {
    throw ValidationError("cannot allocate " + std::to_string(total) +
                          " environments to " + std::to_string(n) + " styles");
  }
  const long sum = std::accumulate(weights.begin(), weights.end(), 0L);
  std::vector<int> counts(n);
  long assigned = 0;
  for (int i = 0; i < n; ++i) {
    counts[i] = static_cast<int>(static_cast<long>(total) * weights[i] / sum);
    assigned += counts[i];
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });
  for (long k = 0; assigned < total; ++k, ++assigned) {
    ++counts[order[k % n]];
  }
  for (int i = 0; i < n; ++i) {
    while (counts[i] == 0) {
      const int donor = static_cast<int>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[donor];
      ++counts[i];
    }
  }
  return counts;
}

// --- Pushes ---------------------------------------------------------------------

Disturbance DisturbanceSchedule::At(int episode_step) const {
  if (!enabled) return {};
  for (std::size_t i = 0; i < push_steps.size(); ++i) {
    if (push_steps[i] == episode_step) return {impulses[i]};
  }
  return {};
}

DisturbanceSchedule DisturbanceSchedule::Sample(const DisturbanceConfig& config,
                                                int velocity_dim, Rng& rng) {
  DisturbanceSchedule s;
  if (!config.enabled) return s;
  if (config.window_end < config.window_start || config.window_start < 0) {
    throw ValidationError("push window is empty");
  }
  s.enabled = true;
  const int step =
      config.window_start +
      static_cast<int>(rng.UniformIndex(static_cast<std::uint64_t>(
          config.window_end - config.window_start + 1)));
  const double magnitude =
      rng.Uniform(config.magnitude_min, config.magnitude_max);
  std::vector<double> dir(velocity_dim);
  double norm = 0.0;
  while (norm < 1e-9) {
    for (double& d : dir) d = rng.Normal();
    norm = std::sqrt(std::inner_product(dir.begin(), dir.end(), dir.begin(), 0.0));
  }
  for (double& d : dir) d *= magnitude / norm;
  s.push_steps.push_back(step);
  s.impulses.push_back(std::move(dir));
  return s;
}

// --- Sinusoid generator ---------------------------------------------------------

SinusoidParams SinusoidParams::DefaultSweep() {
  SinusoidParams p;
  p.joints[0] = {0.4, 0.4, 0.0, 0.0};
  p.joints[1] = {0.4, 0.4, 2.0 * std::numbers::pi / 3.0, 1.2};
  return p;
}

SinusoidSource::SinusoidSource(const TwoLinkReacher& reacher,
                               SinusoidParams params, double dt)
    : reacher_(reacher), params_(params), dt_(dt) {
  if (!(dt > 0.0)) throw ValidationError("generator dt must be positive");
}

std::optional<State> SinusoidSource::Next() {
  const double t = static_cast<double>(step_) * dt_;
  double q[2], qd[2];
  for (int j = 0; j < 2; ++j) {
    const auto& s = params_.joints[j];
    const double w = 2.0 * std::numbers::pi * s.frequency;
    q[j] = s.offset + s.amplitude * std::sin(w * t + s.phase);
    qd[j] = s.amplitude * w * std::cos(w * t + s.phase);
  }
  ++step_;
  return reacher_.MakeState(q, qd);
}

int TurningSign(std::span<const double> velocity_a,
                std::span<const double> velocity_b, double min_speed) {
  if (std::hypot(velocity_a[0], velocity_a[1]) < min_speed ||
      std::hypot(velocity_b[0], velocity_b[1]) < min_speed) {
    return 0;
  }
  const double cross =
      velocity_a[0] * velocity_b[1] - velocity_a[1] * velocity_b[0];
  return cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
}

}  // namespace mamp
