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

#include "multiamp/trainer.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "multiamp/errors.hpp"
#include "multiamp/log.hpp"

namespace mamp {
namespace {

// The epoch loop allocates and frees the same large matrices over and over;
// with glibc's default mmap threshold every one of them is a fresh mapping.
void KeepLargeBlocks() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 32 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
  });
#endif
}

constexpr char kCheckpointMagic[] = "MAMPCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

// Stream ids derived from the run seed.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kTrainerStream = 1;
constexpr std::uint64_t kEnvStreamBase = 16;

// steps_since_switch value meaning "no switch this episode".
constexpr int kNoSwitch = INT_MAX / 2;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int VelocityDim(const Environment& env) {
  return env.layout()->Find(env.velocity_field())->dim;
}

}  // namespace

std::unique_ptr<Environment> MakeEnvironment(const EnvConfig& config) {
  if (config.kind == "reacher") {
    return std::make_unique<TwoLinkReacher>(config.reacher, config.episode);
  }
  if (config.kind == "point_tracker") {
    return std::make_unique<PointTracker>(config.point_tracker, config.episode);
  }
  throw ValidationError("unknown environment kind '" + config.kind + "'");
}

std::vector<std::vector<MotionClip>> LoadStyleClips(
    const TrainerConfig& config) {
  std::vector<std::vector<MotionClip>> out;
  for (const auto& style : config.styles) {
    std::vector<MotionClip> clips;
    for (const auto& path : style.clips) {
      if (!std::filesystem::exists(path)) {
        throw IoError("style '" + style.name + "': dataset file '" + path +
                      "' does not exist");
      }
      clips.push_back(LoadClip(path));
    }
    out.push_back(std::move(clips));
  }
  return out;
}

// --- MultiAmpModel --------------------------------------------------------------

MultiAmpModel::MultiAmpModel(TrainerConfig config,
                             std::vector<std::vector<MotionClip>> style_clips)
    : config_(std::move(config)), style_clips_(std::move(style_clips)) {
  ValidateConfig(config_);
  const int n = config_.num_styles();
  if (static_cast<int>(style_clips_.size()) != n) {
    throw ValidationError("expected clips for " + std::to_string(n) +
                          " styles, got " +
                          std::to_string(style_clips_.size()));
  }
  prototype_ = MakeEnvironment(config_.env);
  fields_ = config_.env.descriptor_fields.empty()
                ? prototype_->DefaultDescriptorFields()
                : config_.env.descriptor_fields;
  descriptor_map_ = DescriptorMap(*prototype_->layout(), fields_);
  for (const auto& style : config_.styles) {
    tasks_.push_back(MakeTask(style.task, prototype_->name()));
    command_width_ = std::max(command_width_, tasks_.back()->feature_dim());
  }
  Rng init = Rng::Stream(config_.seed, kInitStream);
  actor_critic_ = ActorCritic(observation_dim(), prototype_->action_dim(),
                              config_.ppo, init);
  for (int i = 0; i < n; ++i) {
    const auto& style = config_.styles[i];
    MotionDataset dataset;
    if (style_clips_[i].empty()) {
      dataset = MotionDataset::DataFree(style.name, fields_);
    } else {
      for (const auto& clip : style_clips_[i]) {
        if (clip.fields != fields_) {
          throw SchemaError("style '" + style.name + "': clip '" + clip.name +
                            "' fields do not match the descriptor fields");
        }
        if (clip.dt != prototype_->control_dt()) {
          throw ValidationError(
              "style '" + style.name + "': clip '" + clip.name + "' has dt " +
              FormatNumber(clip.dt) + " but the control period is " +
              FormatNumber(prototype_->control_dt()));
        }
      }
      dataset = MotionDataset(style.name, style_clips_[i]);
    }
    slots_.emplace_back(i, std::move(dataset), style.env_weight,
                        config_.discriminator, init);
  }
}

MultiAmpModel::MultiAmpModel(const MultiAmpModel& other)
    : config_(other.config_),
      style_clips_(other.style_clips_),
      prototype_(other.prototype_->Clone()),
      fields_(other.fields_),
      descriptor_map_(other.descriptor_map_),
      command_width_(other.command_width_),
      actor_critic_(other.actor_critic_),
      slots_(other.slots_) {
  for (const auto& style : config_.styles) {
    tasks_.push_back(MakeTask(style.task, prototype_->name()));
  }
}

MultiAmpModel& MultiAmpModel::operator=(const MultiAmpModel& other) {
  if (this != &other) *this = MultiAmpModel(other);
  return *this;
}

int MultiAmpModel::observation_dim() const {
  return prototype_->proprio_dim() + command_width_ + num_styles();
}

void MultiAmpModel::WriteObservation(const Environment& env,
                                     std::span<const double> command,
                                     int style, std::span<double> out) const {
  const int p = prototype_->proprio_dim();
  if (style < 0 || style >= num_styles()) {
    throw ValidationError("style index " + std::to_string(style) +
                          " out of range for " + std::to_string(num_styles()) +
                          " styles");
  }
  if (static_cast<int>(out.size()) != observation_dim()) {
    throw ValidationError("observation buffer has the wrong width");
  }
  env.Observe(out.first(p));
  auto cmd = out.subspan(p, command_width_);
  std::fill(cmd.begin(), cmd.end(), 0.0);
  task(style).CommandFeatures(command, cmd);
  auto sel = out.subspan(p + command_width_);
  std::fill(sel.begin(), sel.end(), 0.0);
  sel[style] = 1.0;
}

void MultiAmpModel::Save(BinaryWriter& out) const {
  actor_critic_.Save(out);
  out.U64(slots_.size());
  for (const auto& slot : slots_) slot.Save(out);
}

void MultiAmpModel::Load(BinaryReader& in) {
  ActorCritic ac = actor_critic_;
  ac.Load(in);
  if (in.U64() != slots_.size()) {
    throw IncompatibleError("checkpoint has a different number of styles");
  }
  std::vector<StyleSlot> slots = slots_;
  for (auto& slot : slots) slot.Load(in);
  actor_critic_ = std::move(ac);
  slots_ = std::move(slots);
}

// --- Metrics ----------------------------------------------------------------------

std::string MetricsHeader(int num_styles) {
  std::string h = "epoch";
  for (int i = 0; i < num_styles; ++i) {
    const std::string p = ",style" + std::to_string(i) + "_";
    h += p + "task_reward_mean" + p + "style_reward_mean" + p + "disc_loss" +
         p + "disc_accuracy";
  }
  h += ",ppo_kl,ppo_clip_frac,policy_loss,value_loss,steps_per_sec";
  return h;
}

std::string MetricsRow(const EpochReport& r) {
  std::string row = std::to_string(r.epoch);
  for (const auto& s : r.styles) {
    for (double v : {s.task_reward_mean, s.style_reward_mean, s.disc_loss,
                     s.disc_accuracy}) {
      row += "," + FormatNumber(v);
    }
  }
  for (double v : {r.ppo.approx_kl, r.ppo.clip_fraction, r.ppo.policy_loss,
                   r.ppo.value_loss, r.steps_per_sec}) {
    row += "," + FormatNumber(v);
  }
  return row;
}

// --- Trainer ------------------------------------------------------------------------

Trainer::Trainer(TrainerConfig config)
    : Trainer(config, LoadStyleClips(config)) {}

Trainer::Trainer(TrainerConfig config,
                 std::vector<std::vector<MotionClip>> style_clips)
    : model_(std::move(config), std::move(style_clips)),
      rng_(Rng::Stream(model_.config().seed, kTrainerStream)) {
  KeepLargeBlocks();
  const auto& cfg = model_.config();
  std::vector<int> weights;
  for (const auto& s : cfg.styles) weights.push_back(s.env_weight);
  env_counts_ = AllocateEnvs(weights, cfg.num_envs);
  envs_.resize(cfg.num_envs);
  int e = 0;
  for (int style = 0; style < cfg.num_styles(); ++style) {
    for (int k = 0; k < env_counts_[style]; ++k, ++e) {
      EnvRuntime& rt = envs_[e];
      rt.env = model_.prototype().Clone();
      rt.rng = Rng::Stream(cfg.seed, kEnvStreamBase + static_cast<std::uint64_t>(e));
      rt.home_style = style;
      ResetEnv(rt);
    }
  }
}

void Trainer::ResetEnv(EnvRuntime& rt) {
  rt.env->Reset(rt.rng);
  rt.active_style = rt.home_style;
  rt.steps_since_switch = kNoSwitch;
  rt.command = model_.task(rt.active_style).SampleCommand(rt.rng);
  rt.schedule = DisturbanceSchedule::Sample(
      model_.config().disturbances, VelocityDim(*rt.env), rt.rng);
}

void Trainer::CollectChunk(int begin, int end, const ActorCritic& frozen) {
  const auto& cfg = model_.config();
  const int E = cfg.num_envs;
  const int n = cfg.num_styles();
  const int obs_dim = model_.observation_dim();
  const int act_dim = model_.prototype().action_dim();
  const int d = model_.descriptor_dim();
  const int m = end - begin;
  const double dt = model_.prototype().control_dt();
  const Vector& log_std = frozen.policy().log_std();
  const Vector stddev = log_std.array().exp();
  Matrix obs(obs_dim, m);
  std::vector<double> action(act_dim);

  for (int t = 0; t < cfg.horizon; ++t) {
    for (int k = 0; k < m; ++k) {
      const EnvRuntime& rt = envs_[begin + k];
      model_.WriteObservation(*rt.env, rt.command, rt.active_style,
                              {obs.col(k).data(), static_cast<std::size_t>(obs_dim)});
    }
    const Matrix means = frozen.policy().mean_net().Forward(obs);
    const Matrix values = frozen.value().Forward(obs);
    for (int k = 0; k < m; ++k) {
      const int e = begin + k;
      const int idx = RolloutBatch::Index(t, e, E);
      EnvRuntime& rt = envs_[e];
      for (int j = 0; j < act_dim; ++j) {
        action[j] = means(j, k) + stddev(j) * rt.rng.Normal();
      }
      batch_.observations.col(idx) = obs.col(k);
      batch_.actions.col(idx) =
          Eigen::Map<const Vector>(action.data(), act_dim);
      batch_.log_probs(idx) = GaussianLogProb(
          {means.col(k).data(), static_cast<std::size_t>(act_dim)},
          {log_std.data(), static_cast<std::size_t>(act_dim)}, action);
      batch_.values(idx) = values(0, k);

      const State prev = rt.env->state();
      const StepResult step =
          rt.env->Step(action, rt.schedule.At(rt.env->episode_step()));
      const int style = rt.active_style;
      double raw = 0.0;
      if (step.blowup) {
        log::Warning("environment " + std::to_string(e) +
                     " produced a non-finite state; episode terminated");
      } else {
        raw = model_.task(style).Reward(rt.command, step.next, prev,
                                        step.applied_action, dt);
      }
      const int since = rt.steps_since_switch;
      batch_.task_rewards(idx) =
          GatedTaskReward(raw, since, cfg.styles[style].buffer_steps);
      batch_.styles[idx] = style;
      batch_.terminals[idx] = step.terminated || step.truncated;
      since_switch_[idx] = since;
      storable_[idx] = !step.terminated;
      switched_[idx] = 0;
      model_.descriptor_map().Extract(
          prev.values(), {descriptors_.col(idx).data(), static_cast<std::size_t>(d)});
      model_.descriptor_map().Extract(
          step.next.values(),
          {descriptors_.col(idx).data() + d, static_cast<std::size_t>(d)});

      rt.steps_since_switch = std::min(since + 1, kNoSwitch);
      if (batch_.terminals[idx]) {
        ResetEnv(rt);
        continue;
      }
      if (cfg.command_resample_interval > 0 &&
          rt.env->episode_step() % cfg.command_resample_interval == 0) {
        rt.command = model_.task(style).SampleCommand(rt.rng);
      }
      if (n > 1 && cfg.switch_probability > 0.0 &&
          rt.rng.Bernoulli(cfg.switch_probability)) {
        const int k2 = static_cast<int>(rt.rng.UniformIndex(n - 1));
        rt.active_style = k2 >= style ? k2 + 1 : k2;
        rt.command = model_.task(rt.active_style).SampleCommand(rt.rng);
        rt.steps_since_switch = 0;
        switched_[idx] = 1;
      }
    }
  }
}

void Trainer::AnnotateStyleRewards(std::vector<StyleEpochMetrics>& metrics) {
  const auto& cfg = model_.config();
  const int N = batch_.size();
  const int n = cfg.num_styles();
  for (int i = 0; i < n; ++i) {
    StyleSlot& slot = model_.slots()[i];
    std::vector<int> members;
    for (int idx = 0; idx < N; ++idx) {
      if (batch_.styles[idx] == i) members.push_back(idx);
    }
    // Style rewards with the discriminator and normalizer of the rollout.
    if (!slot.data_free()) {
      std::vector<int> finite;
      for (int idx : members) {
        if (descriptors_.col(idx).allFinite()) finite.push_back(idx);
      }
      Matrix raw(descriptors_.rows(), static_cast<Eigen::Index>(finite.size()));
      for (std::size_t k = 0; k < finite.size(); ++k) {
        raw.col(static_cast<Eigen::Index>(k)) = descriptors_.col(finite[k]);
      }
      const Vector rewards = finite.empty() ? Vector() : slot.StyleRewards(raw);
      for (std::size_t k = 0; k < finite.size(); ++k) {
        batch_.style_rewards(finite[k]) =
            cfg.styles[i].reward_scale * rewards(static_cast<Eigen::Index>(k));
      }
      std::vector<int> stored;
      for (int idx : members) {
        if (storable_[idx]) stored.push_back(idx);
      }
      Matrix pushed(descriptors_.rows(), static_cast<Eigen::Index>(stored.size()));
      for (std::size_t k = 0; k < stored.size(); ++k) {
        const auto col = descriptors_.col(stored[k]);
        slot.PushPolicyDescriptor(
            {col.data(), static_cast<std::size_t>(col.size())},
            batch_.styles[stored[k]]);
        pushed.col(static_cast<Eigen::Index>(k)) = col;
      }
      if (!stored.empty()) slot.normalizer().Update(pushed);
    }
    double task_sum = 0.0, style_sum = 0.0;
    for (int idx : members) {
      task_sum += batch_.task_rewards(idx);
      style_sum += batch_.style_rewards(idx);
    }
    const double count = static_cast<double>(members.size());
    metrics[i].task_reward_mean = members.empty() ? kNaN : task_sum / count;
    metrics[i].style_reward_mean = members.empty() ? kNaN : style_sum / count;
  }
}

void Trainer::UpdateDiscriminators(std::vector<StyleEpochMetrics>& metrics) {
  const auto& dc = model_.config().discriminator;
  auto& slots = model_.slots();
  bool warm = true;
  for (const auto& slot : slots) {
    if (!slot.data_free() && !slot.ReadyForUpdates(dc.batch_size)) warm = false;
  }
  for (auto& slot : slots) {
    auto& m = metrics[slot.index()];
    m.disc_loss = kNaN;
    m.disc_accuracy = kNaN;
    if (slot.data_free()) continue;
    if (warm) {
      const auto trace =
          slot.UpdateDiscriminator(dc.batch_size, dc.updates_per_epoch, rng_);
      if (!trace.empty()) {
        double sum = 0.0;
        for (double v : trace) sum += v;
        m.disc_loss = sum / static_cast<double>(trace.size());
      }
    }
    if (slot.buffer().size() > 0) {
      const Matrix motion = slot.dataset().SampleTransitions(dc.batch_size, rng_);
      m.disc_accuracy = slot.Accuracy(motion, slot.buffer().Newest(dc.batch_size));
    }
  }
}

EpochReport Trainer::RunEpoch() {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = model_.config();
  const int E = cfg.num_envs;
  const int T = cfg.horizon;
  const int n = cfg.num_styles();
  batch_ = RolloutBatch(E, T, model_.observation_dim(),
                        model_.prototype().action_dim());
  const int N = batch_.size();
  descriptors_.resize(2 * model_.descriptor_dim(), N);
  storable_.assign(N, 0);
  since_switch_.assign(N, 0);
  switched_.assign(N, 0);

  // Rollout phase: environments advance independently on a frozen policy.
  const ActorCritic& frozen = model_.actor_critic();
  std::vector<std::pair<int, int>> chunks;
  for (int b = 0; b < E; b += cfg.rollout_chunk) {
    chunks.emplace_back(b, std::min(E, b + cfg.rollout_chunk));
  }
  int threads = cfg.num_threads > 0
                    ? cfg.num_threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min<int>(threads, static_cast<int>(chunks.size()));
  if (threads <= 1) {
    for (const auto& [b, e] : chunks) CollectChunk(b, e, frozen);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < chunks.size(); c += threads) {
            CollectChunk(chunks[c].first, chunks[c].second, frozen);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }
  {
    Matrix last(model_.observation_dim(), E);
    for (int e = 0; e < E; ++e) {
      model_.WriteObservation(*envs_[e].env, envs_[e].command,
                              envs_[e].active_style,
                              {last.col(e).data(), static_cast<std::size_t>(last.rows())});
    }
    for (const auto& [b, e] : chunks) {
      batch_.bootstrap_values.segment(b, e - b) =
          frozen.value().Forward(last.middleCols(b, e - b)).row(0).transpose();
    }
  }

  // Update phase.
  EpochReport report;
  report.epoch = epoch_ + 1;
  report.styles.resize(n);
  AnnotateStyleRewards(report.styles);
  UpdateDiscriminators(report.styles);
  if (cfg.ppo.anneal_learning_rate && cfg.epochs > 0) {
    const double left = 1.0 - static_cast<double>(epoch_) / cfg.epochs;
    model_.actor_critic().SetLearningRate(cfg.ppo.learning_rate * std::max(left, 0.0));
  }
  report.ppo = PpoUpdate(model_.actor_critic(), batch_, cfg.ppo, rng_);

  for (int idx = 0; idx < N; ++idx) {
    gate_.switches += switched_[idx];
    const int buffer = cfg.styles[batch_.styles[idx]].buffer_steps;
    const int since = since_switch_[idx];
    if (since < buffer) {
      ++gate_.window_steps;
      if (batch_.task_rewards(idx) != 0.0) ++gate_.window_nonzero;
    } else if (buffer > 0 && since < kNoSwitch) {
      ++gate_.post_window_steps;
      if (batch_.task_rewards(idx) > 0.0) ++gate_.post_window_positive;
    }
  }

  if (cfg.wall_clock) {
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    report.steps_per_sec = secs > 0.0 ? N / secs : 0.0;
  }
  epoch_ = report.epoch;
  return report;
}

// --- Checkpoints ----------------------------------------------------------------

std::filesystem::path SidecarPath(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  p += ".json";
  return p;
}

namespace {

void WriteHeader(BinaryWriter& w, const MultiAmpModel& model, int epoch) {
  w.Magic(kCheckpointMagic);
  w.U32(kCheckpointVersion);
  w.String(ConfigToJson(model.config(), -1));
  w.String(ConfigHash(model.config()));
  w.I64(epoch);
  w.U64(model.style_clips().size());
  for (const auto& clips : model.style_clips()) {
    w.U64(clips.size());
    for (const auto& clip : clips) w.String(ClipToJson(clip));
  }
}

struct Header {
  std::uint32_t version = 0;
  std::string config_json;
  std::string config_hash;
  int epoch = 0;
  std::vector<std::vector<MotionClip>> clips;
};

Header ReadHeader(BinaryReader& r) {
  Header h;
  r.ExpectMagic(kCheckpointMagic, "checkpoint");
  h.version = r.U32();
  if (h.version != kCheckpointVersion) {
    throw IncompatibleError("checkpoint format version " +
                            std::to_string(h.version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
  }
  h.config_json = r.String();
  h.config_hash = r.String();
  h.epoch = static_cast<int>(r.I64());
  const std::uint64_t n = r.U64();
  if (n > 4096) throw IncompatibleError("checkpoint header is corrupt");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t count = r.U64();
    if (count > (1u << 20)) throw IncompatibleError("checkpoint header is corrupt");
    std::vector<MotionClip> clips;
    for (std::uint64_t k = 0; k < count; ++k) clips.push_back(ClipFromJson(r.String()));
    h.clips.push_back(std::move(clips));
  }
  return h;
}

std::ifstream OpenForRead(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return in;
}

void WriteSidecar(const std::filesystem::path& path, const MultiAmpModel& model,
                  int epoch) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointVersion;
  doc["epoch"] = epoch;
  doc["seed"] = model.config().seed;
  doc["config_hash"] = ConfigHash(model.config());
  doc["num_styles"] = model.num_styles();
  std::ofstream out(SidecarPath(path));
  if (!out) throw IoError("cannot write '" + SidecarPath(path).string() + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace

void Trainer::SaveCheckpoint(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  BinaryWriter w(out);
  WriteHeader(w, model_, epoch_);
  model_.Save(w);
  w.String(rng_.Serialize());
  w.I64(gate_.switches);
  w.I64(gate_.window_steps);
  w.I64(gate_.window_nonzero);
  w.I64(gate_.post_window_steps);
  w.I64(gate_.post_window_positive);
  w.U64(envs_.size());
  for (const auto& rt : envs_) {
    w.String(rt.rng.Serialize());
    w.I64(rt.home_style);
    w.I64(rt.active_style);
    w.I64(rt.steps_since_switch);
    w.I64(rt.env->episode_step());
    w.Doubles(rt.env->state().values());
    w.Doubles(rt.command);
    w.U32(rt.schedule.enabled ? 1 : 0);
    w.U64(rt.schedule.push_steps.size());
    for (std::size_t k = 0; k < rt.schedule.push_steps.size(); ++k) {
      w.I64(rt.schedule.push_steps[k]);
      w.Doubles(rt.schedule.impulses[k]);
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
  WriteSidecar(path, model_, epoch_);
}

void Trainer::LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  BinaryReader r(in);
  const Header h = ReadHeader(r);
  const TrainerConfig saved = ConfigFromJson(h.config_json);
  const auto& cfg = model_.config();
  if (saved.num_styles() != cfg.num_styles()) {
    throw IncompatibleError("checkpoint has " + std::to_string(saved.num_styles()) +
                            " styles, configuration has " +
                            std::to_string(cfg.num_styles()));
  }
  if (saved.num_envs != cfg.num_envs || saved.env.kind != cfg.env.kind) {
    throw IncompatibleError("checkpoint environment setup does not match the configuration");
  }
  if (h.config_hash != ConfigHash(cfg)) {
    log::Warning("checkpoint config hash " + h.config_hash +
                 " differs from the current config " + ConfigHash(cfg));
  }
  MultiAmpModel model = model_;
  model.Load(r);
  Rng rng;
  rng.Deserialize(r.String());
  GateAudit gate;
  gate.switches = r.I64();
  gate.window_steps = r.I64();
  gate.window_nonzero = r.I64();
  gate.post_window_steps = r.I64();
  gate.post_window_positive = r.I64();
  if (r.U64() != envs_.size()) {
    throw IncompatibleError("checkpoint environment count does not match");
  }
  std::vector<EnvRuntime> envs(envs_.size());
  for (std::size_t e = 0; e < envs.size(); ++e) {
    EnvRuntime& rt = envs[e];
    rt.env = model_.prototype().Clone();
    rt.rng.Deserialize(r.String());
    rt.home_style = static_cast<int>(r.I64());
    rt.active_style = static_cast<int>(r.I64());
    rt.steps_since_switch = static_cast<int>(r.I64());
    const int episode_step = static_cast<int>(r.I64());
    rt.env->set_state(State(rt.env->layout(), r.Doubles()));
    rt.env->set_episode_step(episode_step);
    rt.command = r.Doubles();
    rt.schedule.enabled = r.U32() != 0;
    const std::uint64_t pushes = r.U64();
    for (std::uint64_t k = 0; k < pushes; ++k) {
      rt.schedule.push_steps.push_back(static_cast<int>(r.I64()));
      rt.schedule.impulses.push_back(r.Doubles());
    }
    if (rt.home_style < 0 || rt.home_style >= cfg.num_styles() ||
        rt.active_style < 0 || rt.active_style >= cfg.num_styles()) {
      throw IncompatibleError("checkpoint environment style out of range");
    }
  }
  model_ = std::move(model);
  rng_ = rng;
  gate_ = gate;
  envs_ = std::move(envs);
  epoch_ = h.epoch;
}

CheckpointInfo ReadCheckpointInfo(const std::filesystem::path& path) {
  std::ifstream in = OpenForRead(path);
  BinaryReader r(in);
  const Header h = ReadHeader(r);
  MultiAmpModel model(ConfigFromJson(h.config_json), h.clips);
  model.Load(r);
  CheckpointInfo info;
  info.version = h.version;
  info.epoch = h.epoch;
  info.config_hash = h.config_hash;
  info.config_json = h.config_json;
  info.policy_widths = model.actor_critic().policy().mean_net().widths();
  info.value_widths = model.actor_critic().value().widths();
  for (const auto& slot : model.slots()) {
    info.discriminator_widths.push_back(slot.discriminator().widths());
  }
  return info;
}

MultiAmpModel LoadModel(const std::filesystem::path& checkpoint) {
  std::ifstream in = OpenForRead(checkpoint);
  BinaryReader r(in);
  const Header h = ReadHeader(r);
  MultiAmpModel model(ConfigFromJson(h.config_json), h.clips);
  model.Load(r);
  return model;
}

// --- Training driver ------------------------------------------------------------

namespace {

// Keeps the header and the rows with epoch <= last_epoch.
void TrimCsv(const std::filesystem::path& path, const std::string& header,
             int last_epoch) {
  std::vector<std::string> keep = {header};
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header) throw IncompatibleError("existing '" + path.string() + "' has a different header");
        continue;
      }
      if (line.empty()) continue;
      if (std::stoi(line.substr(0, line.find(','))) <= last_epoch) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& l : keep) out << l << "\n";
}

std::string GateHeader() {
  return "epoch,switches,window_steps,window_nonzero,post_window_steps,"
         "post_window_positive";
}

std::string GateRow(int epoch, const GateAudit& g) {
  return std::to_string(epoch) + "," + std::to_string(g.switches) + "," +
         std::to_string(g.window_steps) + "," + std::to_string(g.window_nonzero) +
         "," + std::to_string(g.post_window_steps) + "," +
         std::to_string(g.post_window_positive);
}

}  // namespace

TrainResult Train(const TrainerConfig& config, const TrainOptions& options) {
  Trainer trainer(config);
  if (options.resume) trainer.LoadCheckpoint(*options.resume);

  const std::filesystem::path dir = config.output_dir;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    if (!out) throw IoError("cannot write into output directory '" + dir.string() + "'");
    out << ConfigToJson(config) << "\n";
  }
  TrainResult result;
  result.metrics_path = dir / "metrics.csv";
  const auto gate_path = dir / "gate_audit.csv";
  TrimCsv(result.metrics_path, MetricsHeader(config.num_styles()), trainer.epoch());
  TrimCsv(gate_path, GateHeader(), trainer.epoch());
  std::ofstream metrics(result.metrics_path, std::ios::app);
  std::ofstream gate(gate_path, std::ios::app);

  while (trainer.epoch() < config.epochs) {
    EpochReport report;
    try {
      report = trainer.RunEpoch();
    } catch (const DivergenceError& e) {
      const auto dump = dir / "divergence.ckpt";
      log::Error(std::string("training diverged: ") + e.what() +
                 "; state dumped to " + dump.string());
      trainer.SaveCheckpoint(dump);
      throw;
    }
    metrics << MetricsRow(report) << "\n" << std::flush;
    gate << GateRow(report.epoch, trainer.gate_audit()) << "\n" << std::flush;
    ++result.epochs_run;
    if (config.checkpoint_interval > 0 &&
        report.epoch % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%06d.ckpt", report.epoch);
      trainer.SaveCheckpoint(dir / "checkpoints" / name);
    }
    if (options.on_epoch) options.on_epoch(report);
  }
  result.final_checkpoint = dir / "final.ckpt";
  trainer.SaveCheckpoint(result.final_checkpoint);
  result.gate = trainer.gate_audit();
  return result;
}

// --- Evaluation -----------------------------------------------------------------

namespace {

void CheckStyle(const MultiAmpModel& model, int style) {
  if (style < 0 || style >= model.num_styles()) {
    throw ValidationError("style " + std::to_string(style) +
                          " out of range for " +
                          std::to_string(model.num_styles()) + " styles");
  }
}

std::optional<int> StepTurningSign(const State& prev, const State& next) {
  const auto a = prev.field("ee_vel");
  const auto b = next.field("ee_vel");
  if (!a || !b) return std::nullopt;
  return TurningSign(*a, *b);
}

}  // namespace

EvalReport Evaluate(const MultiAmpModel& model, const EvalOptions& options) {
  CheckStyle(model, options.style);
  if (options.episodes < 1) throw ValidationError("episodes must be >= 1");
  if (options.max_steps < 0 || options.warmup_steps < 0) {
    throw ValidationError("step counts must be non-negative");
  }
  const auto& cfg = model.config();
  auto env = model.prototype().Clone();
  Rng env_rng = Rng::Stream(options.seed, 0);
  Rng act_rng = Rng::Stream(options.seed, 1);
  const Task& task = model.task(options.style);
  const StyleSlot& slot = model.slots()[options.style];
  const double scale = cfg.styles[options.style].reward_scale;
  const int limit = options.max_steps > 0 ? options.max_steps : env->episode().horizon;
  const int d = model.descriptor_dim();
  std::vector<double> obs(model.observation_dim());
  Matrix descriptor(2 * d, 1);

  EvalReport report;
  report.style = options.style;
  report.episodes = options.episodes;
  double task_sum = 0.0, style_sum = 0.0;
  long cw = 0, ccw = 0, sign_sum = 0;
  for (int ep = 0; ep < options.episodes; ++ep) {
    env->Reset(env_rng);
    const std::vector<double> command = task.SampleCommand(env_rng);
    for (int t = 0; t < limit; ++t) {
      std::vector<double> action(env->action_dim(), 0.0);
      if (!options.null_policy) {
        model.WriteObservation(*env, command, options.style, obs);
        action = model.actor_critic().Act(obs, act_rng, options.deterministic).action;
      }
      const State prev = env->state();
      const StepResult step = env->Step(action);
      ++report.steps;
      if (!step.blowup) {
        task_sum += task.Reward(command, step.next, prev, step.applied_action,
                                env->control_dt());
        model.descriptor_map().Extract(prev.values(), {descriptor.data(), static_cast<std::size_t>(d)});
        model.descriptor_map().Extract(step.next.values(),
                                       {descriptor.data() + d, static_cast<std::size_t>(d)});
        style_sum += scale * slot.StyleRewards(descriptor)(0);
      }
      if (t >= options.warmup_steps) {
        if (const auto sign = StepTurningSign(prev, step.next)) {
          ++report.sweep_steps;
          cw += *sign < 0;
          ccw += *sign > 0;
          sign_sum += *sign;
        }
      }
      if (step.terminated) break;
    }
  }
  const double steps = static_cast<double>(std::max(1L, report.steps));
  report.mean_task_reward = task_sum / steps;
  report.mean_style_reward = style_sum / steps;
  if (report.sweep_steps > 0) {
    const double s = static_cast<double>(report.sweep_steps);
    report.clockwise_fraction = static_cast<double>(cw) / s;
    report.counterclockwise_fraction = static_cast<double>(ccw) / s;
    report.mean_sweep_sign = static_cast<double>(sign_sum) / s;
  }
  return report;
}

SwitchTestReport RunSwitchTest(const MultiAmpModel& model,
                               const SwitchTestOptions& options) {
  CheckStyle(model, options.from_style);
  CheckStyle(model, options.to_style);
  if (options.window < 1 || options.switch_step < options.window ||
      options.total_steps <= options.switch_step + options.window) {
    throw ValidationError("switch test needs window <= switch_step and room after the switch");
  }
  auto env = model.prototype().Clone();
  Rng env_rng = Rng::Stream(options.seed, 0);
  Rng act_rng = Rng::Stream(options.seed, 1);
  env->Reset(env_rng);
  std::vector<double> command = model.task(options.from_style).SampleCommand(env_rng);
  int style = options.from_style;
  std::vector<double> obs(model.observation_dim());
  std::vector<int> signs;
  for (int t = 0; t < options.total_steps; ++t) {
    if (t == options.switch_step) {
      style = options.to_style;
      command = model.task(style).SampleCommand(env_rng);
    }
    model.WriteObservation(*env, command, style, obs);
    const auto act = model.actor_critic().Act(obs, act_rng, true);
    const State prev = env->state();
    const StepResult step = env->Step(act.action);
    signs.push_back(StepTurningSign(prev, step.next).value_or(0));
    if (step.terminated) break;
  }
  auto majority = [&](int end) {  // window ending before index end
    int sum = 0;
    for (int k = end - options.window; k < end; ++k) sum += signs[k];
    return sum > 0 ? 1 : (sum < 0 ? -1 : 0);
  };
  SwitchTestReport report;
  const int total = static_cast<int>(signs.size());
  if (total < options.switch_step) return report;
  report.sign_before = majority(options.switch_step);
  report.sign_after = majority(total);
  if (report.sign_after == 0) return report;
  int settled = -1;
  for (int end = total; end >= options.switch_step + options.window; --end) {
    if (majority(end) != report.sign_after) break;
    settled = end;
  }
  if (settled >= 0) report.steps_to_flip = settled - options.switch_step;
  return report;
}

namespace {

class PolicySource : public StateSource {
 public:
  PolicySource(const MultiAmpModel& model, int style, std::uint64_t seed)
      : model_(model),
        style_(style),
        env_(model.prototype().Clone()),
        env_rng_(Rng::Stream(seed, 0)),
        act_rng_(Rng::Stream(seed, 1)),
        obs_(model.observation_dim()) {
    env_->Reset(env_rng_);
    command_ = model.task(style).SampleCommand(env_rng_);
  }
  double dt() const override { return env_->control_dt(); }
  std::optional<State> Next() override {
    if (done_) return std::nullopt;
    if (!started_) {
      started_ = true;
      return env_->state();
    }
    model_.WriteObservation(*env_, command_, style_, obs_);
    const auto act = model_.actor_critic().Act(obs_, act_rng_, true);
    const StepResult step = env_->Step(act.action);
    if (step.terminated) {
      done_ = true;
      return std::nullopt;
    }
    return step.next;
  }

 private:
  const MultiAmpModel& model_;
  int style_;
  std::unique_ptr<Environment> env_;
  Rng env_rng_, act_rng_;
  std::vector<double> obs_;
  std::vector<double> command_;
  bool started_ = false;
  bool done_ = false;
};

}  // namespace

MotionClip RecordPolicyClip(const MultiAmpModel& model, int style, int steps,
                            std::uint64_t seed, std::string name) {
  CheckStyle(model, style);
  PolicySource source(model, style, seed);
  return RecordClip(source, model.descriptor_fields(), steps, std::move(name));
}

}  // namespace mamp
