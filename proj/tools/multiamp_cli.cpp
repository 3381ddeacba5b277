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

// multiamp: train, evaluate and inspect Multi-AMP runs; record, reverse and
// plot motion clips.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "multiamp/config.hpp"
#include "multiamp/envs.hpp"
#include "multiamp/errors.hpp"
#include "multiamp/log.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitIo = 3;

constexpr char kOutputDirEnv[] = "MAMP_OUTPUT_DIR";

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mamp::IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mamp::IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw mamp::IoError("failed writing '" + path.string() + "'");
}

std::string Join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

// Config from a file; a missing output_dir falls back to $MAMP_OUTPUT_DIR.
mamp::TrainerConfig ResolveConfig(const fs::path& path) {
  const std::string text = ReadFile(path);
  mamp::TrainerConfig config = mamp::ConfigFromJson(text);
  const auto doc = nlohmann::json::parse(text);
  if (!doc.contains("output_dir")) {
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
      config.output_dir = env;
    }
  }
  return config;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string resume;
};

int RunTrain(const TrainArgs& args) {
  mamp::TrainerConfig config = ResolveConfig(args.config);
  if (args.seed) config.seed = *args.seed;
  mamp::ValidateConfig(config);
  mamp::TrainOptions options;
  if (!args.resume.empty()) {
    if (!fs::exists(args.resume)) {
      throw mamp::IoError("checkpoint '" + args.resume + "' does not exist");
    }
    options.resume = args.resume;
  }
  options.on_epoch = [&](const mamp::EpochReport& r) {
    if (r.epoch % 10 == 0 || r.epoch == config.epochs) {
      std::string line = "epoch " + std::to_string(r.epoch);
      for (std::size_t i = 0; i < r.styles.size(); ++i) {
        line += "  s" + std::to_string(i) + " task " +
                std::to_string(r.styles[i].task_reward_mean) + " style " +
                std::to_string(r.styles[i].style_reward_mean);
      }
      mamp::log::Info(line);
    }
  };
  const auto result = mamp::Train(config, options);
  std::cout << "metrics: " << result.metrics_path.string() << "\n"
            << "checkpoint: " << result.final_checkpoint.string() << "\n"
            << "seed: " << config.seed << "\n";
  return kExitOk;
}

// --- eval ------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  int style = 0;
  int episodes = 10;
  bool stochastic = false;
  std::uint64_t seed = 0;
  int max_steps = 0;
  std::optional<int> switch_to;
};

int RunEval(const EvalArgs& args) {
  const mamp::MultiAmpModel model = mamp::LoadModel(args.checkpoint);
  mamp::EvalOptions opt;
  opt.style = args.style;
  opt.episodes = args.episodes;
  opt.deterministic = !args.stochastic;
  opt.seed = args.seed;
  opt.max_steps = args.max_steps;
  const auto r = mamp::Evaluate(model, opt);
  std::cout << "style: " << r.style << "\n"
            << "episodes: " << r.episodes << "\n"
            << "steps: " << r.steps << "\n"
            << "mean_task_reward: " << r.mean_task_reward << "\n"
            << "task_reward_max: " << model.task(r.style).MaxReward() << "\n"
            << "mean_style_reward: " << r.mean_style_reward << "\n";
  if (r.sweep_steps > 0) {
    std::cout << "sweep_steps: " << r.sweep_steps << "\n"
              << "clockwise_fraction: " << r.clockwise_fraction << "\n"
              << "counterclockwise_fraction: " << r.counterclockwise_fraction
              << "\n"
              << "mean_sweep_sign: " << r.mean_sweep_sign << "\n";
  }
  if (args.switch_to) {
    mamp::SwitchTestOptions so;
    so.from_style = args.style;
    so.to_style = *args.switch_to;
    so.seed = args.seed;
    const auto s = mamp::RunSwitchTest(model, so);
    std::cout << "switch_sign_before: " << s.sign_before << "\n"
              << "switch_sign_after: " << s.sign_after << "\n"
              << "switch_steps_to_flip: " << s.steps_to_flip << "\n";
  }
  return kExitOk;
}

// --- record ----------------------------------------------------------------------

struct RecordArgs {
  std::string checkpoint;
  std::string generator;
  int style = 0;
  int steps = 0;
  std::string out;
  std::string name;
  std::uint64_t seed = 0;
  double dt = 0.02;
  std::vector<double> amplitude;
  std::vector<double> frequency;
  std::vector<double> phase;
  std::vector<double> offset;
};

int RunRecord(const RecordArgs& args) {
  mamp::MotionClip clip;
  if (!args.generator.empty()) {
    if (args.generator != "sinusoid") {
      throw mamp::ValidationError("unknown generator '" + args.generator + "'");
    }
    if (!args.checkpoint.empty()) {
      throw mamp::ValidationError("--generator and --checkpoint are exclusive");
    }
    auto params = mamp::SinusoidParams::DefaultSweep();
    auto apply = [&](const std::vector<double>& v, double mamp::JointSinusoid::*field,
                     const char* flag) {
      if (v.empty()) return;
      if (v.size() != 2) {
        throw mamp::ValidationError(std::string("--") + flag +
                                    " takes one value per joint (2)");
      }
      for (int j = 0; j < 2; ++j) params.joints[j].*field = v[j];
    };
    apply(args.amplitude, &mamp::JointSinusoid::amplitude, "amplitude");
    apply(args.frequency, &mamp::JointSinusoid::frequency, "frequency");
    apply(args.phase, &mamp::JointSinusoid::phase, "phase");
    apply(args.offset, &mamp::JointSinusoid::offset, "offset");
    mamp::ReacherConfig rc;
    rc.dt = args.dt;
    const mamp::TwoLinkReacher reacher(rc);
    mamp::SinusoidSource source(reacher, params, args.dt);
    clip = mamp::RecordClip(source, reacher.DefaultDescriptorFields(), args.steps,
                            args.name.empty() ? "sinusoid-sweep" : args.name);
  } else {
    if (args.checkpoint.empty()) {
      throw mamp::ValidationError("record needs --checkpoint or --generator");
    }
    const mamp::MultiAmpModel model = mamp::LoadModel(args.checkpoint);
    clip = mamp::RecordPolicyClip(
        model, args.style, args.steps, args.seed,
        args.name.empty() ? "policy-style" + std::to_string(args.style) : args.name);
  }
  mamp::SaveClip(clip, args.out);
  std::cout << "wrote " << clip.num_frames() << " frames to " << args.out << "\n";
  return kExitOk;
}

// --- reverse ---------------------------------------------------------------------

int RunReverse(const std::string& in, const std::string& out) {
  const mamp::MotionClip clip = mamp::LoadClip(in);
  const mamp::MotionClip reversed = mamp::ReverseClip(clip);
  mamp::SaveClip(reversed, out);
  std::cout << "wrote " << reversed.name << " (" << reversed.num_frames()
            << " frames) to " << out << "\n";
  return kExitOk;
}

// --- inspect ---------------------------------------------------------------------

void InspectClip(const mamp::MotionClip& clip) {
  std::cout << "type: clip\n"
            << "name: " << clip.name << "\n"
            << "frames: " << clip.num_frames() << "\n"
            << "transitions: " << clip.num_transitions() << "\n"
            << "descriptor_dim: " << clip.descriptor_dim() << "\n"
            << "dt: " << clip.dt << "\n";
  int col = 0;
  for (const auto& f : clip.fields) {
    std::cout << "field " << f.name << " (" << mamp::FieldKindName(f.kind)
              << ", dim " << f.dim << "):";
    for (int j = 0; j < f.dim; ++j, ++col) {
      std::cout << " [" << clip.frames.col(col).minCoeff() << ", "
                << clip.frames.col(col).maxCoeff() << "]";
    }
    std::cout << "\n";
  }
}

void InspectCheckpoint(const fs::path& path) {
  const auto info = mamp::ReadCheckpointInfo(path);
  std::cout << "type: checkpoint\n"
            << "format_version: " << info.version << "\n"
            << "epoch: " << info.epoch << "\n"
            << "config_hash: " << info.config_hash << "\n"
            << "policy_widths: " << Join(info.policy_widths) << "\n"
            << "value_widths: " << Join(info.value_widths) << "\n";
  for (std::size_t i = 0; i < info.discriminator_widths.size(); ++i) {
    std::cout << "discriminator_" << i
              << "_widths: " << Join(info.discriminator_widths[i]) << "\n";
  }
}

int RunInspect(const std::string& in) {
  const std::string text = ReadFile(in);
  if (text.rfind("MAMPCKPT", 0) == 0) {
    InspectCheckpoint(in);
    return kExitOk;
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw mamp::ValidationError("'" + in + "' is not a clip, checkpoint or config");
  }
  if (doc.is_object() && doc.contains("frames")) {
    InspectClip(mamp::ClipFromJson(text));
  } else if (doc.is_object()) {
    const auto config = mamp::ConfigFromJson(text);
    std::cout << mamp::ConfigToJson(config) << "\n";
  } else {
    throw mamp::ValidationError("'" + in + "' is not a clip, checkpoint or config");
  }
  return kExitOk;
}

// --- export-plot-data --------------------------------------------------------------

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseCell(const std::string& cell, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw mamp::ValidationError("metrics line " + std::to_string(line_no) +
                                ": bad number '" + cell + "'");
  }
}

int RunExport(const std::string& metrics_path, const std::string& out_dir) {
  std::ifstream in(metrics_path);
  if (!in) throw mamp::IoError("cannot open '" + metrics_path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw mamp::ValidationError("metrics file '" + metrics_path + "' is empty");
  }
  const auto header = SplitCsv(line);
  const int trailing = 5;
  const int per_style = 4;
  const int cols = static_cast<int>(header.size());
  if (cols < 1 + per_style + trailing || (cols - 1 - trailing) % per_style != 0) {
    throw mamp::ValidationError("metrics header has an unexpected layout");
  }
  const int n = (cols - 1 - trailing) / per_style;
  if (header != SplitCsv(mamp::MetricsHeader(n))) {
    throw mamp::ValidationError("metrics header has an unexpected layout");
  }
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = SplitCsv(line);
    if (static_cast<int>(cells.size()) != cols) {
      throw mamp::ValidationError("metrics line " + std::to_string(line_no) +
                                  " has " + std::to_string(cells.size()) +
                                  " columns, expected " + std::to_string(cols));
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(ParseCell(c, line_no));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw mamp::ValidationError("metrics file '" + metrics_path + "' has no rows");
  }
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
  };
  std::vector<std::pair<fs::path, std::string>> files;
  std::string combined = "epoch";
  for (int i = 0; i < n; ++i) combined += ",style" + std::to_string(i) + "_total_reward";
  combined += "\n";
  std::vector<std::string> curves(n, "epoch,task_reward,style_reward,total_reward\n");
  for (const auto& row : rows) {
    const std::string epoch = fmt(row[0]);
    combined += epoch;
    for (int i = 0; i < n; ++i) {
      const double task = row[1 + per_style * i];
      const double style = row[2 + per_style * i];
      curves[i] += epoch + "," + fmt(task) + "," + fmt(style) + "," + fmt(task + style) + "\n";
      combined += "," + fmt(task + style);
    }
    combined += "\n";
  }
  for (int i = 0; i < n; ++i) {
    files.emplace_back(fs::path(out_dir) / ("style" + std::to_string(i) + "_curve.csv"),
                       curves[i]);
  }
  files.emplace_back(fs::path(out_dir) / "combined_curves.csv", combined);
  for (const auto& [path, text] : files) WriteFile(path, text);
  std::cout << "wrote " << files.size() << " files to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-AMP: multiple adversarial motion priors in one policy"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a policy from a run config");
  train_cmd->add_option("--config", train.config, "Run config (JSON)")->required();
  train_cmd->add_option("--seed", train.seed, "Override the config seed");
  train_cmd->add_option("--resume", train.resume, "Resume from a checkpoint");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint with one style active");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--style", eval.style, "Active style index")->required();
  eval_cmd->add_option("--episodes", eval.episodes, "Episodes to run")->capture_default_str();
  eval_cmd->add_flag("--stochastic", eval.stochastic, "Sample actions instead of using the mean");
  eval_cmd->add_option("--seed", eval.seed, "Evaluation seed")->capture_default_str();
  eval_cmd->add_option("--max-steps", eval.max_steps, "Steps per episode (0 = horizon)");
  eval_cmd->add_option("--switch-to", eval.switch_to,
                       "Also run a mid-episode switch to this style");

  RecordArgs record;
  auto* record_cmd = app.add_subcommand("record", "Record a motion clip");
  record_cmd->add_option("--checkpoint", record.checkpoint, "Policy checkpoint");
  record_cmd->add_option("--generator", record.generator, "Scripted generator (sinusoid)");
  record_cmd->add_option("--style", record.style, "Active style index");
  record_cmd->add_option("--steps", record.steps, "Frames to record")->required();
  record_cmd->add_option("--out", record.out, "Output clip")->required();
  record_cmd->add_option("--name", record.name, "Clip name");
  record_cmd->add_option("--seed", record.seed, "Rollout seed");
  record_cmd->add_option("--dt", record.dt, "Generator sampling period")->capture_default_str();
  record_cmd->add_option("--amplitude", record.amplitude, "Per-joint amplitude (rad)")
      ->delimiter(',');
  record_cmd->add_option("--frequency", record.frequency, "Per-joint frequency (Hz)")
      ->delimiter(',');
  record_cmd->add_option("--phase", record.phase, "Per-joint phase (rad)")->delimiter(',');
  record_cmd->add_option("--offset", record.offset, "Per-joint offset (rad)")->delimiter(',');

  std::string reverse_in, reverse_out;
  auto* reverse_cmd = app.add_subcommand("reverse", "Time-reverse a clip");
  reverse_cmd->add_option("--in", reverse_in, "Input clip")->required();
  reverse_cmd->add_option("--out", reverse_out, "Output clip")->required();

  std::string inspect_in;
  auto* inspect_cmd = app.add_subcommand("inspect", "Summarize a clip, checkpoint or config");
  inspect_cmd->add_option("--in", inspect_in, "File to inspect")->required();

  std::string export_metrics, export_out;
  auto* export_cmd =
      app.add_subcommand("export-plot-data", "Per-style reward curves from a metrics CSV");
  export_cmd->add_option("--metrics", export_metrics, "metrics.csv")->required();
  export_cmd->add_option("--out", export_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (verbose) mamp::log::SetLevel(mamp::log::Level::kDebug);

  try {
    if (*train_cmd) return RunTrain(train);
    if (*eval_cmd) return RunEval(eval);
    if (*record_cmd) return RunRecord(record);
    if (*reverse_cmd) return RunReverse(reverse_in, reverse_out);
    if (*inspect_cmd) return RunInspect(inspect_in);
    if (*export_cmd) return RunExport(export_metrics, export_out);
  } catch (const mamp::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const mamp::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const mamp::IncompatibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const mamp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
