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

#include "multiamp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "multiamp/errors.hpp"

namespace mamp {
namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects anything left unread.
class ObjectReader {
 public:
  ObjectReader(const json& doc, std::string path)
      : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) Fail(path_, "expected an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) Fail(Child(key), "unknown key");
    }
  }

  [[noreturn]] static void Fail(const std::string& path,
                                const std::string& what) {
    throw ValidationError("config " + (path.empty() ? "<root>" : path) +
                          ": " + what);
  }

  std::string Child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* Get(const std::string& key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void Read(const std::string& key, double& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number()) Fail(Child(key), "expected a number");
      out = v->get<double>();
    }
  }
  void Read(const std::string& key, int& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number_integer()) Fail(Child(key), "expected an integer");
      const auto x = v->get<long long>();
      if (x < INT32_MIN || x > INT32_MAX) Fail(Child(key), "out of range");
      out = static_cast<int>(x);
    }
  }
  void Read(const std::string& key, std::uint64_t& out) {
    if (const json* v = Get(key)) {
      if (!v->is_number_unsigned()) {
        Fail(Child(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void Read(const std::string& key, bool& out) {
    if (const json* v = Get(key)) {
      if (!v->is_boolean()) Fail(Child(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void Read(const std::string& key, std::string& out) {
    if (const json* v = Get(key)) {
      if (!v->is_string()) Fail(Child(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void Read(const std::string& key, std::vector<int>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array()) Fail(Child(key), "expected an array of integers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number_integer()) {
          Fail(Child(key), "expected an array of integers");
        }
        out.push_back(x.get<int>());
      }
    }
  }
  void Read(const std::string& key, std::vector<std::string>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array()) Fail(Child(key), "expected an array of strings");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_string()) Fail(Child(key), "expected an array of strings");
        out.push_back(x.get<std::string>());
      }
    }
  }
  void Read(const std::string& key, std::array<double, 2>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() ||
          !(*v)[1].is_number()) {
        Fail(Child(key), "expected [lo, hi]");
      }
      out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void Read(const std::string& key, std::vector<std::array<double, 2>>& out) {
    if (const json* v = Get(key)) {
      if (!v->is_array()) Fail(Child(key), "expected an array of [lo, hi]");
      out.clear();
      for (const auto& r : *v) {
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() ||
            !r[1].is_number()) {
          Fail(Child(key), "expected an array of [lo, hi]");
        }
        out.push_back({r[0].get<double>(), r[1].get<double>()});
      }
    }
  }
  void Read(const std::string& key, Activation& out) {
    std::string name(ActivationName(out));
    Read(key, name);
    try {
      out = ParseActivation(name);
    } catch (const Error& e) {
      Fail(Child(key), e.what());
    }
  }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void ParseEpisode(const json& doc, const std::string& path, EpisodeConfig& c) {
  ObjectReader r(doc, path);
  r.Read("horizon", c.horizon);
  r.Read("velocity_limit", c.velocity_limit);
}

void ParseReacher(const json& doc, const std::string& path, ReacherConfig& c) {
  ObjectReader r(doc, path);
  r.Read("link1", c.link1);
  r.Read("link2", c.link2);
  r.Read("mass1", c.mass1);
  r.Read("mass2", c.mass2);
  r.Read("damping", c.damping);
  r.Read("torque_limit", c.torque_limit);
  r.Read("action_scale", c.action_scale);
  r.Read("dt", c.dt);
  r.Read("q1_range", c.q1_range);
  r.Read("q2_range", c.q2_range);
  r.Read("initial_velocity", c.initial_velocity);
}

void ParseTracker(const json& doc, const std::string& path,
                  PointTrackerConfig& c) {
  ObjectReader r(doc, path);
  r.Read("accel_limit", c.accel_limit);
  r.Read("max_speed", c.max_speed);
  r.Read("max_turn_rate", c.max_turn_rate);
  r.Read("drag", c.drag);
  r.Read("dt", c.dt);
}

FieldList ParseFields(const json& doc, const std::string& path) {
  if (!doc.is_array()) ObjectReader::Fail(path, "expected an array");
  FieldList fields;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    ObjectReader r(doc[i], p);
    FieldSpec f;
    std::string kind = "other";
    r.Read("name", f.name);
    r.Read("kind", kind);
    r.Read("dim", f.dim);
    try {
      f.kind = ParseFieldKind(kind);
    } catch (const Error& e) {
      ObjectReader::Fail(p + ".kind", e.what());
    }
    fields.push_back(std::move(f));
  }
  return fields;
}

void ParseEnv(const json& doc, const std::string& path, EnvConfig& c) {
  ObjectReader r(doc, path);
  r.Read("kind", c.kind);
  if (const json* v = r.Get("episode")) ParseEpisode(*v, r.Child("episode"), c.episode);
  if (const json* v = r.Get("reacher")) ParseReacher(*v, r.Child("reacher"), c.reacher);
  if (const json* v = r.Get("point_tracker")) {
    ParseTracker(*v, r.Child("point_tracker"), c.point_tracker);
  }
  if (const json* v = r.Get("descriptor_fields")) {
    c.descriptor_fields = ParseFields(*v, r.Child("descriptor_fields"));
  }
}

void ParsePenalties(const json& doc, const std::string& path,
                    PenaltyWeights& c) {
  ObjectReader r(doc, path);
  r.Read("torque", c.torque);
  r.Read("velocity", c.velocity);
  r.Read("acceleration", c.acceleration);
}

void ParseTask(const json& doc, const std::string& path, TaskConfig& c) {
  ObjectReader r(doc, path);
  r.Read("kind", c.kind);
  r.Read("command_ranges", c.command_ranges);
  r.Read("tracking_weight", c.tracking_weight);
  r.Read("tracking_sigma", c.tracking_sigma);
  if (const json* v = r.Get("penalties")) {
    ParsePenalties(*v, r.Child("penalties"), c.penalties);
  }
}

StyleConfig ParseStyle(const json& doc, const std::string& path) {
  ObjectReader r(doc, path);
  StyleConfig s;
  r.Read("name", s.name);
  r.Read("clips", s.clips);
  r.Read("env_weight", s.env_weight);
  r.Read("reward_scale", s.reward_scale);
  r.Read("buffer_steps", s.buffer_steps);
  if (const json* v = r.Get("task")) ParseTask(*v, r.Child("task"), s.task);
  return s;
}

void ParsePpo(const json& doc, const std::string& path, PpoConfig& c) {
  ObjectReader r(doc, path);
  r.Read("gamma", c.gamma);
  r.Read("lambda", c.lambda);
  r.Read("clip_epsilon", c.clip_epsilon);
  r.Read("epochs", c.epochs);
  r.Read("minibatch_size", c.minibatch_size);
  r.Read("entropy_coef", c.entropy_coef);
  r.Read("value_coef", c.value_coef);
  r.Read("learning_rate", c.learning_rate);
  r.Read("max_grad_norm", c.max_grad_norm);
  r.Read("normalize_advantages", c.normalize_advantages);
  r.Read("anneal_learning_rate", c.anneal_learning_rate);
  r.Read("policy_hidden", c.policy_hidden);
  r.Read("value_hidden", c.value_hidden);
  r.Read("activation", c.activation);
  r.Read("init_log_std", c.init_log_std);
}

void ParseDiscriminator(const json& doc, const std::string& path,
                        DiscriminatorConfig& c) {
  ObjectReader r(doc, path);
  r.Read("hidden", c.hidden);
  r.Read("activation", c.activation);
  r.Read("learning_rate", c.learning_rate);
  r.Read("batch_size", c.batch_size);
  r.Read("updates_per_epoch", c.updates_per_epoch);
  r.Read("gp_weight", c.gp_weight);
  r.Read("buffer_capacity", c.buffer_capacity);
  r.Read("normalize", c.normalize);
}

void ParseDisturbances(const json& doc, const std::string& path,
                       DisturbanceConfig& c) {
  ObjectReader r(doc, path);
  r.Read("enabled", c.enabled);
  r.Read("window_start", c.window_start);
  r.Read("window_end", c.window_end);
  r.Read("magnitude_min", c.magnitude_min);
  r.Read("magnitude_max", c.magnitude_max);
}

json RangesJson(const std::vector<std::array<double, 2>>& ranges) {
  json out = json::array();
  for (const auto& r : ranges) out.push_back({r[0], r[1]});
  return out;
}

json ToJsonDoc(const TrainerConfig& c) {
  json doc;
  doc["seed"] = c.seed;
  doc["output_dir"] = c.output_dir;
  doc["epochs"] = c.epochs;
  doc["num_envs"] = c.num_envs;
  doc["horizon"] = c.horizon;
  doc["checkpoint_interval"] = c.checkpoint_interval;
  doc["num_threads"] = c.num_threads;
  doc["rollout_chunk"] = c.rollout_chunk;
  doc["wall_clock"] = c.wall_clock;
  doc["command_resample_interval"] = c.command_resample_interval;
  doc["switch_probability"] = c.switch_probability;
  doc["disturbances"] = {{"enabled", c.disturbances.enabled},
                         {"window_start", c.disturbances.window_start},
                         {"window_end", c.disturbances.window_end},
                         {"magnitude_min", c.disturbances.magnitude_min},
                         {"magnitude_max", c.disturbances.magnitude_max}};
  const auto& rc = c.env.reacher;
  const auto& pc = c.env.point_tracker;
  json fields = json::array();
  for (const auto& f : c.env.descriptor_fields) {
    fields.push_back({{"name", f.name},
                      {"kind", std::string(FieldKindName(f.kind))},
                      {"dim", f.dim}});
  }
  doc["env"] = {
      {"kind", c.env.kind},
      {"episode",
       {{"horizon", c.env.episode.horizon},
        {"velocity_limit", c.env.episode.velocity_limit}}},
      {"reacher",
       {{"link1", rc.link1},
        {"link2", rc.link2},
        {"mass1", rc.mass1},
        {"mass2", rc.mass2},
        {"damping", rc.damping},
        {"torque_limit", rc.torque_limit},
        {"action_scale", rc.action_scale},
        {"dt", rc.dt},
        {"q1_range", {rc.q1_range[0], rc.q1_range[1]}},
        {"q2_range", {rc.q2_range[0], rc.q2_range[1]}},
        {"initial_velocity", rc.initial_velocity}}},
      {"point_tracker",
       {{"accel_limit", pc.accel_limit},
        {"max_speed", pc.max_speed},
        {"max_turn_rate", pc.max_turn_rate},
        {"drag", pc.drag},
        {"dt", pc.dt}}},
      {"descriptor_fields", fields}};
  json styles = json::array();
  for (const auto& s : c.styles) {
    styles.push_back(
        {{"name", s.name},
         {"clips", s.clips},
         {"env_weight", s.env_weight},
         {"reward_scale", s.reward_scale},
         {"buffer_steps", s.buffer_steps},
         {"task",
          {{"kind", s.task.kind},
           {"command_ranges", RangesJson(s.task.command_ranges)},
           {"tracking_weight", s.task.tracking_weight},
           {"tracking_sigma", s.task.tracking_sigma},
           {"penalties",
            {{"torque", s.task.penalties.torque},
             {"velocity", s.task.penalties.velocity},
             {"acceleration", s.task.penalties.acceleration}}}}}});
  }
  doc["styles"] = styles;
  const auto& p = c.ppo;
  doc["ppo"] = {{"gamma", p.gamma},
                {"lambda", p.lambda},
                {"clip_epsilon", p.clip_epsilon},
                {"epochs", p.epochs},
                {"minibatch_size", p.minibatch_size},
                {"entropy_coef", p.entropy_coef},
                {"value_coef", p.value_coef},
                {"learning_rate", p.learning_rate},
                {"max_grad_norm", p.max_grad_norm},
                {"normalize_advantages", p.normalize_advantages},
                {"anneal_learning_rate", p.anneal_learning_rate},
                {"policy_hidden", p.policy_hidden},
                {"value_hidden", p.value_hidden},
                {"activation", std::string(ActivationName(p.activation))},
                {"init_log_std", p.init_log_std}};
  const auto& d = c.discriminator;
  doc["discriminator"] = {
      {"hidden", d.hidden},
      {"activation", std::string(ActivationName(d.activation))},
      {"learning_rate", d.learning_rate},
      {"batch_size", d.batch_size},
      {"updates_per_epoch", d.updates_per_epoch},
      {"gp_weight", d.gp_weight},
      {"buffer_capacity", d.buffer_capacity},
      {"normalize", d.normalize}};
  return doc;
}

void Require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) ObjectReader::Fail(path, what);
}

bool PositiveWidths(const std::vector<int>& widths) {
  for (int w : widths) {
    if (w <= 0) return false;
  }
  return true;
}

}  // namespace

TrainerConfig ConfigFromJson(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  TrainerConfig c;
  {
    ObjectReader r(doc, "");
    r.Read("seed", c.seed);
    r.Read("output_dir", c.output_dir);
    r.Read("epochs", c.epochs);
    r.Read("num_envs", c.num_envs);
    r.Read("horizon", c.horizon);
    r.Read("checkpoint_interval", c.checkpoint_interval);
    r.Read("num_threads", c.num_threads);
    r.Read("rollout_chunk", c.rollout_chunk);
    r.Read("wall_clock", c.wall_clock);
    r.Read("command_resample_interval", c.command_resample_interval);
    r.Read("switch_probability", c.switch_probability);
    if (const json* v = r.Get("disturbances")) {
      ParseDisturbances(*v, "disturbances", c.disturbances);
    }
    if (const json* v = r.Get("env")) ParseEnv(*v, "env", c.env);
    if (const json* v = r.Get("styles")) {
      if (!v->is_array()) ObjectReader::Fail("styles", "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        c.styles.push_back(
            ParseStyle((*v)[i], "styles[" + std::to_string(i) + "]"));
      }
    }
    if (const json* v = r.Get("ppo")) ParsePpo(*v, "ppo", c.ppo);
    if (const json* v = r.Get("discriminator")) {
      ParseDiscriminator(*v, "discriminator", c.discriminator);
    }
  }
  ValidateConfig(c);
  return c;
}

std::string ConfigToJson(const TrainerConfig& config, int indent) {
  return ToJsonDoc(config).dump(indent);
}

TrainerConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ConfigFromJson(ss.str());
}

void ValidateConfig(const TrainerConfig& c) {
  Require(c.epochs >= 1, "epochs", "must be >= 1");
  Require(c.horizon >= 1, "horizon", "must be >= 1");
  Require(c.checkpoint_interval >= 0, "checkpoint_interval", "must be >= 0");
  Require(c.num_threads >= 0, "num_threads", "must be >= 0");
  Require(c.rollout_chunk >= 1, "rollout_chunk", "must be >= 1");
  Require(c.command_resample_interval >= 0, "command_resample_interval",
          "must be >= 0");
  Require(c.switch_probability >= 0.0 && c.switch_probability <= 1.0,
          "switch_probability", "must lie in [0, 1]");
  Require(c.env.kind == "reacher" || c.env.kind == "point_tracker", "env.kind",
          "must be \"reacher\" or \"point_tracker\"");
  Require(c.env.episode.horizon >= 1, "env.episode.horizon", "must be >= 1");
  Require(c.env.episode.velocity_limit > 0.0, "env.episode.velocity_limit",
          "must be positive");
  Require(!c.styles.empty(), "styles", "at least one style is required");
  Require(c.num_envs >= c.num_styles(), "num_envs",
          "must be at least the number of styles");
  for (std::size_t i = 0; i < c.styles.size(); ++i) {
    const auto& s = c.styles[i];
    const std::string p = "styles[" + std::to_string(i) + "]";
    Require(!s.name.empty(), p + ".name", "must not be empty");
    Require(s.env_weight >= 1, p + ".env_weight", "must be a positive integer");
    Require(s.reward_scale >= 0.0, p + ".reward_scale", "must be >= 0");
    Require(s.buffer_steps >= 0, p + ".buffer_steps", "must be >= 0");
    Require(!s.task.kind.empty(), p + ".task.kind", "must be set");
    Require(s.task.tracking_sigma > 0.0, p + ".task.tracking_sigma",
            "must be positive");
  }
  const auto& ppo = c.ppo;
  Require(ppo.gamma >= 0.0 && ppo.gamma <= 1.0, "ppo.gamma", "must lie in [0, 1]");
  Require(ppo.lambda >= 0.0 && ppo.lambda <= 1.0, "ppo.lambda",
          "must lie in [0, 1]");
  Require(ppo.clip_epsilon > 0.0, "ppo.clip_epsilon", "must be positive");
  Require(ppo.epochs >= 0, "ppo.epochs", "must be >= 0");
  Require(ppo.minibatch_size >= 1, "ppo.minibatch_size", "must be >= 1");
  Require(ppo.minibatch_size <= c.num_envs * c.horizon, "ppo.minibatch_size",
          "must not exceed num_envs * horizon");
  Require(ppo.learning_rate >= 0.0, "ppo.learning_rate", "must be >= 0");
  Require(PositiveWidths(ppo.policy_hidden), "ppo.policy_hidden",
          "widths must be positive");
  Require(PositiveWidths(ppo.value_hidden), "ppo.value_hidden",
          "widths must be positive");
  const auto& d = c.discriminator;
  Require(PositiveWidths(d.hidden), "discriminator.hidden",
          "widths must be positive");
  Require(d.learning_rate >= 0.0, "discriminator.learning_rate",
          "must be >= 0");
  Require(d.batch_size >= 1, "discriminator.batch_size", "must be >= 1");
  Require(d.updates_per_epoch >= 0, "discriminator.updates_per_epoch",
          "must be >= 0");
  Require(d.gp_weight >= 0.0, "discriminator.gp_weight", "must be >= 0");
  Require(d.buffer_capacity >= d.batch_size, "discriminator.buffer_capacity",
          "must be at least batch_size");
}

std::string ConfigHash(const TrainerConfig& config) {
  const std::string text = ToJsonDoc(config).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mamp
