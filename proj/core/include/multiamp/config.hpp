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

#ifndef MULTIAMP_CONFIG_HPP_
#define MULTIAMP_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "multiamp/adversary.hpp"
#include "multiamp/envs.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/ppo.hpp"

namespace mamp {

struct StyleConfig {
  std::string name;
  // Clip files; an empty list declares the style data-free.
  std::vector<std::string> clips;
  int env_weight = 1;
  double reward_scale = 1.0;  // multiplies the style reward
  // Task reward is zeroed for this many steps after a switch into the style.
  int buffer_steps = 0;
  TaskConfig task;
};

struct EnvConfig {
  std::string kind = "reacher";  // "reacher" or "point_tracker"
  EpisodeConfig episode;
  ReacherConfig reacher;
  PointTrackerConfig point_tracker;
  FieldList descriptor_fields;  // empty = environment default
};

struct TrainerConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  int epochs = 2000;
  int num_envs = 256;
  int horizon = 32;
  int checkpoint_interval = 100;  // 0 = final checkpoint only
  int num_threads = 1;            // 0 = hardware concurrency
  int rollout_chunk = 64;         // environments per batched forward pass
  bool wall_clock = false;        // fill steps_per_sec (breaks byte equality)
  int command_resample_interval = 0;  // 0 = only at reset
  double switch_probability = 0.002;  // per step, mid-episode
  DisturbanceConfig disturbances;
  EnvConfig env;
  std::vector<StyleConfig> styles;
  PpoConfig ppo;
  DiscriminatorConfig discriminator;

  int num_styles() const { return static_cast<int>(styles.size()); }
};

// Strict parse: unknown keys, wrong types and out-of-range values raise
// ValidationError with the offending key path.
TrainerConfig ConfigFromJson(std::string_view text);
// Full document with every default filled in.
std::string ConfigToJson(const TrainerConfig& config, int indent = 2);
TrainerConfig LoadConfig(const std::filesystem::path& path);

// Range and consistency checks that do not touch the filesystem.
void ValidateConfig(const TrainerConfig& config);

// FNV-1a over the canonical compact JSON form, as 16 hex digits.
std::string ConfigHash(const TrainerConfig& config);

}  // namespace mamp

#endif  // MULTIAMP_CONFIG_HPP_
