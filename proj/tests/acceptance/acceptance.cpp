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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <CLI11.hpp>

#include "multiamp/adam.hpp"
#include "multiamp/adversary.hpp"
#include "multiamp/config.hpp"
#include "multiamp/envs.hpp"
#include "multiamp/errors.hpp"
#include "multiamp/log.hpp"
#include "multiamp/mlp.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/ppo.hpp"
#include "multiamp/rng.hpp"
#include "multiamp/trainer.hpp"

namespace fs = std::filesystem;
using namespace mamp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Matrix RandomMatrix(Rng& rng, int rows, int cols, double lo = -1, double hi = 1) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(lo, hi);
  return m;
}

double RelErr(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// --- 1 -----------------------------------------------------------------------

Outcome StyleRewardIdentity() {
  using Big = boost::multiprecision::cpp_dec_float_50;
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 10001; ++i) {
    const double x = rng.Uniform(-30.0, 30.0);
    const double oracle = static_cast<double>(boost::multiprecision::log(Big(1) + boost::multiprecision::exp(Big(x))));
    worst = std::max(worst, std::abs(StyleRewardFromLogit(x) - oracle));
  }
  const double at_zero = std::abs(StyleRewardFromLogit(0.0) - std::numbers::ln2);
  return {worst < 1e-12 && at_zero < 1e-12,
          "max err " + Fmt(worst) + ", |r(0) - ln2| = " + Fmt(at_zero)};
}

// --- 2 -----------------------------------------------------------------------

Outcome LossConstants() {
  Rng rng(102);
  bool ok = true;
  std::string detail;
  Mlp zero({12, 32, 32, 1}, Activation::kTanh);
  for (double gp : {0.0, 10.0, 3.7}) {
    const auto loss = ComputeDiscriminatorLoss(zero, RandomMatrix(rng, 12, 64),
                                               RandomMatrix(rng, 12, 64), gp);
    ok = ok && loss.total == 2.0;
    if (gp == 10.0) detail = "zero D loss " + Fmt(loss.total);
  }
  Mlp linear({4, 1}, Activation::kTanh);
  linear.weight(0) << 1.2, -0.4, 1.4, std::sqrt(4.0 - 1.44 - 0.16 - 1.96);
  linear.bias(0)[0] = -0.3;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto loss = ComputeDiscriminatorLoss(
        linear, RandomMatrix(rng, 4, 32, -4, 4), RandomMatrix(rng, 4, 32), 10.0);
    worst = std::max(worst, std::abs(loss.penalty_term - 20.0));
  }
  ok = ok && worst < 1e-9;
  return {ok, detail + ", linear penalty err " + Fmt(worst)};
}

// --- 3 -----------------------------------------------------------------------

// Central differences of f against analytic gradient entries.
template <typename F>
double ProbeParams(Mlp& net, const Vector& analytic, F&& f, int probes, Rng& rng) {
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const auto k = static_cast<Eigen::Index>(rng.UniformIndex(net.num_params()));
    const double h = 1e-5, saved = net.params()[k];
    net.params()[k] = saved + h;
    const double up = f(net);
    net.params()[k] = saved - h;
    const double down = f(net);
    net.params()[k] = saved;
    worst = std::max(worst, RelErr(analytic[k], (up - down) / (2 * h)));
  }
  return worst;
}

Outcome GradientChecks() {
  Rng rng(103);
  double worst = 0.0;
  std::string detail;
  const std::vector<std::vector<int>> shapes = {
      {12, 64, 64, 1}, {15, 64, 64, 2}, {15, 64, 64, 1}, {6, 16, 9, 3}};
  for (const auto& widths : shapes) {
    Mlp net(widths, Activation::kTanh);
    net.Initialize(InitScheme::kUniformFanIn, rng, 1.5, 1.5);
    const int in = widths.front(), out = widths.back();
    std::vector<double> x(in), up(out);
    for (double& v : x) v = rng.Uniform(-1, 1);
    for (double& v : up) v = rng.Uniform(-1, 1);
    auto scalar = [&](const Mlp& m, const std::vector<double>& xx) {
      const auto y = m.Forward(std::span<const double>(xx));
      double s = 0;
      for (int j = 0; j < out; ++j) s += up[j] * y[j];
      return s;
    };
    const auto g = net.Backward(x, up);
    double shape_worst = 0.0;
    // input gradients
    for (int p = 0; p < 100; ++p) {
      const int i = static_cast<int>(rng.UniformIndex(in));
      auto xp = x, xm = x;
      xp[i] += 1e-5;
      xm[i] -= 1e-5;
      const double fd = (scalar(net, xp) - scalar(net, xm)) / 2e-5;
      shape_worst = std::max(shape_worst, RelErr(g.input[i], fd));
    }
    // parameter gradients
    shape_worst = std::max(
        shape_worst,
        ProbeParams(net, g.params, [&](const Mlp& m) { return scalar(m, x); }, 100, rng));
    if (out == 1) {
      // full discriminator loss, which includes the double-backward penalty
      const Matrix motion = RandomMatrix(rng, in, 8), policy = RandomMatrix(rng, in, 8);
      const auto loss = ComputeDiscriminatorLoss(net, motion, policy, 10.0);
      const auto no_gp = ComputeDiscriminatorLoss(net, motion, policy, 0.0);
      shape_worst = std::max(
          shape_worst,
          ProbeParams(net, loss.grads, [&](const Mlp& m) {
            return ComputeDiscriminatorLoss(m, motion, policy, 10.0, false).total;
          }, 100, rng));
      const Vector penalty_grad = loss.grads - no_gp.grads;
      shape_worst = std::max(
          shape_worst,
          ProbeParams(net, penalty_grad, [&](const Mlp& m) {
            return ComputeDiscriminatorLoss(m, motion, policy, 10.0, false).penalty_term;
          }, 100, rng));
    }
    worst = std::max(worst, shape_worst);
  }
  return {worst < 1e-3, "max rel err " + Fmt(worst) + " over " +
                            std::to_string(shapes.size()) + " shapes"};
}

// --- 4 -----------------------------------------------------------------------

Outcome GaeOracle() {
  Rng rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.UniformIndex(32));
    std::vector<double> r(n), v(n);
    std::vector<std::uint8_t> term(n);
    for (int t = 0; t < n; ++t) {
      r[t] = rng.Uniform(-3, 3);
      v[t] = rng.Uniform(-5, 5);
      term[t] = rng.Bernoulli(0.1);
    }
    const double boot = rng.Uniform(-5, 5);
    const double gamma = rng.Uniform(0.5, 1.0), lambda = rng.Uniform(0.0, 1.0);
    const auto g = ComputeGae(r, v, term, boot, gamma, lambda);
    // A_t = sum_k (gamma lambda)^k delta_{t+k}, cut after a terminal step
    for (int t = 0; t < n; ++t) {
      double adv = 0.0, coef = 1.0;
      for (int k = t; k < n; ++k) {
        const double next = term[k] ? 0.0 : (k + 1 < n ? v[k + 1] : boot);
        adv += coef * (r[k] + gamma * next - v[k]);
        if (term[k]) break;
        coef *= gamma * lambda;
      }
      worst = std::max(worst, std::abs(g.advantages[t] - adv));
      worst = std::max(worst, std::abs(g.returns[t] - (adv + v[t])));
    }
  }
  return {worst < 1e-10, "max abs err " + Fmt(worst)};
}

// --- 5 -----------------------------------------------------------------------

Outcome ReversalInvolution() {
  Rng rng(105);
  bool ok = true;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    MotionClip clip;
    clip.name = "clip" + std::to_string(trial);
    clip.dt = 0.02;
    clip.fields = {{"q", FieldKind::kPosition, 2},
                   {"qd", FieldKind::kVelocity, 2},
                   {"ee", FieldKind::kPosition, 2}};
    const int frames = 2 + static_cast<int>(rng.UniformIndex(200));
    clip.frames = RandomMatrix(rng, frames, 6, -10, 10);
    const MotionClip rev = ReverseClip(clip);
    const MotionClip back = ReverseClip(rev);
    ok = back.frames.size() == clip.frames.size() &&
         std::memcmp(back.frames.data(), clip.frames.data(),
                     sizeof(double) * clip.frames.size()) == 0;
    for (int r = 0; r < frames && ok; ++r) {
      for (int c = 0; c < 6; ++c) {
        const double orig = clip.frames(frames - 1 - r, c);
        if (rev.frames(r, c) != ((c == 2 || c == 3) ? -orig : orig)) ok = false;
      }
    }
  }
  return {ok, "100 clips"};
}

// --- 6 -----------------------------------------------------------------------

Outcome SeparableClusters() {
  Rng rng(106);
  const int n = 1000, dim = 4, k = 128;
  Matrix motion(dim, n), policy(dim, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < dim; ++r) {
      motion(r, i) = (r == 0 ? 1.0 : 0.0) + 0.05 * rng.Normal();
      policy(r, i) = (r == 0 ? -1.0 : 0.0) + 0.05 * rng.Normal();
    }
  }
  DiscriminatorConfig cfg;
  Mlp d({dim, 64, 64, 1}, Activation::kTanh);
  d.Initialize(InitScheme::kOrthogonal, rng, std::sqrt(2.0), 1.0);
  Adam opt(static_cast<Eigen::Index>(d.num_params()), {.learning_rate = 1e-3});
  for (int step = 0; step < 500; ++step) {
    Matrix mb(dim, k), pb(dim, k);
    for (int j = 0; j < k; ++j) {
      mb.col(j) = motion.col(static_cast<Eigen::Index>(rng.UniformIndex(n)));
      pb.col(j) = policy.col(static_cast<Eigen::Index>(rng.UniformIndex(n)));
    }
    opt.Step(d.params(), ComputeDiscriminatorLoss(d, mb, pb, cfg.gp_weight).grads);
  }
  const double pos = d.Forward(motion).mean(), neg = d.Forward(policy).mean();
  return {pos > 0.8 && neg < -0.8,
          "motion mean " + Fmt(pos) + ", policy mean " + Fmt(neg)};
}

// --- 7 -----------------------------------------------------------------------

Outcome DataFreeGuard(TrainerConfig cfg, const fs::path& out) {
  cfg.epochs = 50;
  cfg.output_dir = out.string();
  Trainer trainer(cfg);
  std::vector<int> free;
  std::vector<Vector> before;
  for (const auto& slot : trainer.model().slots()) {
    if (slot.data_free()) {
      free.push_back(slot.index());
      before.push_back(slot.discriminator().params());
    }
  }
  if (free.empty()) return {false, "config has no data-free style"};
  long checked = 0;
  bool zero = true;
  for (int e = 0; e < cfg.epochs; ++e) {
    trainer.RunEpoch();
    const RolloutBatch& b = trainer.last_batch();
    for (int i = 0; i < b.size(); ++i) {
      if (std::find(free.begin(), free.end(), b.styles[i]) == free.end()) continue;
      ++checked;
      if (b.style_rewards(i) != 0.0) zero = false;
    }
  }
  bool same = true;
  for (std::size_t k = 0; k < free.size(); ++k) {
    const Vector& now = trainer.model().slots()[free[k]].discriminator().params();
    same = same && now.size() == before[k].size() &&
           std::memcmp(now.data(), before[k].data(), sizeof(double) * now.size()) == 0;
  }
  return {zero && same && checked > 0,
          std::to_string(checked) + " data-free samples, rewards " +
              (zero ? "all 0" : "NONZERO") + ", params " +
              (same ? "unchanged" : "CHANGED")};
}

// --- 8 -----------------------------------------------------------------------

Outcome Allocation() {
  const std::vector<int> weights = {1, 1, 5};
  const auto a = AllocateEnvs(weights, 4096);
  const auto b = AllocateEnvs(weights, 4096);
  const bool ok = a == std::vector<int>{585, 585, 2926} && a == b;
  std::string got;
  for (int v : a) got += (got.empty() ? "" : ",") + std::to_string(v);
  return {ok, "[" + got + "]"};
}

// --- 9, 10, 11 -------------------------------------------------------------------

struct SweepStyles {
  int clockwise = -1;
  int counterclockwise = -1;
  int tracking = -1;
};

// Style roles from the config: the forward clip, its reversal, and the
// data-free pose-holding task.
SweepStyles Roles(const TrainerConfig& cfg) {
  SweepStyles r;
  for (int i = 0; i < cfg.num_styles(); ++i) {
    const auto& s = cfg.styles[i];
    if (s.clips.empty() && s.task.kind == "pose_hold") r.tracking = i;
    if (!s.clips.empty() && s.task.kind == "sweep_speed") {
      (r.clockwise < 0 ? r.clockwise : r.counterclockwise) = i;
    }
  }
  return r;
}

Outcome EndToEnd(const MultiAmpModel& model) {
  const SweepStyles roles = Roles(model.config());
  if (roles.clockwise < 0 || roles.counterclockwise < 0 || roles.tracking < 0) {
    return {false, "config lacks the clockwise/counterclockwise/hold styles"};
  }
  EvalOptions opts;
  opts.episodes = 8;
  opts.seed = 2024;

  opts.style = roles.tracking;
  const EvalReport hold = Evaluate(model, opts);
  const double max_reward = model.task(roles.tracking).MaxReward();
  const bool a = hold.mean_task_reward >= 0.8 * max_reward;

  opts.style = roles.clockwise;
  const EvalReport cw = Evaluate(model, opts);
  opts.style = roles.counterclockwise;
  const EvalReport ccw = Evaluate(model, opts);
  const double agree_cw = cw.clockwise_fraction;
  const double agree_ccw = ccw.counterclockwise_fraction;

  bool switch_ok = true;
  std::string flips;
  for (auto [from, to] : {std::pair{roles.clockwise, roles.counterclockwise},
                          std::pair{roles.counterclockwise, roles.clockwise}}) {
    SwitchTestOptions so;
    so.from_style = from;
    so.to_style = to;
    so.seed = 2024;
    const SwitchTestReport s = RunSwitchTest(model, so);
    const int want_before = from == roles.clockwise ? -1 : 1;
    const bool ok = s.sign_before == want_before && s.sign_after == -want_before &&
                    s.steps_to_flip >= 0 && s.steps_to_flip <= 100;
    switch_ok = switch_ok && ok;
    flips += (flips.empty() ? "" : "/") + std::to_string(s.steps_to_flip);
  }
  const bool b = agree_cw >= 0.9 && agree_ccw >= 0.9 && switch_ok;

  const double s0 = cw.mean_style_reward, s1 = ccw.mean_style_reward;
  const bool c = s0 > 0.0 && std::abs(s1 - s0) <= 0.2 * s0;

  std::string detail = "(a) " + std::string(a ? "ok" : "FAIL") + " hold task " +
                       Fmt(hold.mean_task_reward) + "/" + Fmt(max_reward) +
                       "; (b) " + (b ? "ok" : "FAIL") + " agreement cw " +
                       Fmt(agree_cw) + " ccw " + Fmt(agree_ccw) + ", flip steps " +
                       flips + "; (c) " + (c ? "ok" : "FAIL") + " style reward " +
                       Fmt(s0) + " vs " + Fmt(s1);
  return {a && b && c, detail};
}

Outcome GateFromLogs(const fs::path& run_dir) {
  std::ifstream in(run_dir / "gate_audit.csv");
  std::string line, last;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) return {false, "no gate_audit.csv rows in " + run_dir.string()};
  std::vector<long long> v;
  std::stringstream ss(last);
  for (std::string cell; std::getline(ss, cell, ',');) v.push_back(std::stoll(cell));
  if (v.size() != 6) return {false, "malformed gate_audit.csv"};
  const long long switches = v[1], window = v[2], nonzero = v[3], post = v[4],
                  positive = v[5];
  const bool ok = switches > 0 && window > 0 && nonzero == 0 && positive > 0;
  return {ok, std::to_string(switches) + " switches, " + std::to_string(window) +
                  " in-window samples (" + std::to_string(nonzero) + " nonzero), " +
                  std::to_string(positive) + "/" + std::to_string(post) +
                  " positive after the window"};
}

std::vector<std::string> ReadLines(const fs::path& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string ReadBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Determinism(const TrainerConfig& cfg, const fs::path& run_a,
                    const fs::path& work, int resume_epoch) {
  TrainerConfig b = cfg;
  b.output_dir = (work / "run_b").string();
  fs::remove_all(b.output_dir);
  Train(b);
  const bool same = ReadBytes(run_a / "metrics.csv") ==
                    ReadBytes(fs::path(b.output_dir) / "metrics.csv");

  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%06d.ckpt", resume_epoch);
  const fs::path ckpt = run_a / "checkpoints" / name;
  if (!fs::exists(ckpt)) return {false, "missing " + ckpt.string()};
  TrainerConfig r = cfg;
  r.output_dir = (work / "run_resume").string();
  fs::remove_all(r.output_dir);
  TrainOptions opts;
  opts.resume = ckpt;
  Train(r, opts);
  const auto full = ReadLines(run_a / "metrics.csv");
  const auto resumed = ReadLines(fs::path(r.output_dir) / "metrics.csv");
  bool rows_match = resumed.size() > 1 &&
                    full.size() == static_cast<std::size_t>(resume_epoch) + resumed.size();
  for (std::size_t i = 1; rows_match && i < resumed.size(); ++i) {
    rows_match = resumed[i] == full[resume_epoch + i];
  }
  return {same && rows_match,
          std::string("same-seed metrics ") + (same ? "identical" : "DIFFER") +
              ", resume from epoch " + std::to_string(resume_epoch) + " " +
              (rows_match ? "matches " + std::to_string(resumed.size() - 1) + " rows"
                          : "DIVERGES")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string config_path = "configs/reacher_3style.json";
  std::string work_dir = "acceptance_runs";
  std::vector<int> only;
  bool reuse = false;
  int resume_epoch = 1000;
  app.add_option("--config", config_path, "Run config for the end-to-end criteria")
      ->capture_default_str();
  app.add_option("--work-dir", work_dir, "Where training runs are written")
      ->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("--reuse", reuse, "Reuse an existing run A instead of retraining");
  app.add_option("--resume-epoch", resume_epoch, "Checkpoint epoch for the resume check")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  log::SetLevel(log::Level::kWarning);

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  int failures = 0;
  auto report = [&](int id, const std::string& title, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << " -- "
              << o.detail << " [" << Fmt(secs) << " s]" << std::endl;
  };

  report(1, "style reward is softplus of the logit", StyleRewardIdentity);
  report(2, "discriminator loss constants", LossConstants);
  report(3, "finite-difference gradient checks", GradientChecks);
  report(4, "GAE matches brute-force oracle", GaeOracle);
  report(5, "clip reversal is an involution", ReversalInvolution);
  report(6, "separable-cluster discriminator", SeparableClusters);
  report(8, "environment allocation", Allocation);

  const bool need_cfg = wanted(7) || wanted(9) || wanted(10) || wanted(11);
  TrainerConfig cfg;
  if (need_cfg) {
    try {
      cfg = LoadConfig(config_path);
      ValidateConfig(cfg);
    } catch (const std::exception& e) {
      std::cout << "FAIL  config " << config_path << ": " << e.what() << std::endl;
      return 1;
    }
  }
  const fs::path work = work_dir;
  report(7, "data-free style stays untouched",
         [&] { return DataFreeGuard(cfg, work / "data_free"); });

  const fs::path run_a = work / "run_a";
  bool have_a = false;
  if (wanted(9) || wanted(10) || wanted(11)) {
    TrainerConfig a = cfg;
    a.output_dir = run_a.string();
    if (!(reuse && fs::exists(run_a / "final.ckpt"))) {
      fs::remove_all(run_a);
      const auto start = std::chrono::steady_clock::now();
      try {
        Train(a);
        have_a = true;
      } catch (const std::exception& e) {
        std::cout << "run A failed: " << e.what() << std::endl;
      }
      std::cout << "      run A: " << cfg.epochs << " epochs in "
                << Fmt(std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start).count())
                << " s" << std::endl;
    } else {
      have_a = true;
    }
  }
  auto needs_a = [&](const std::function<Outcome()>& fn) {
    return [&, fn] { return have_a ? fn() : Outcome{false, "run A did not complete"}; };
  };
  report(9, "end-to-end three-style reacher",
         needs_a([&] { return EndToEnd(LoadModel(run_a / "final.ckpt")); }));
  report(10, "post-switch task-reward gate", needs_a([&] { return GateFromLogs(run_a); }));
  report(11, "determinism and resume",
         needs_a([&] { return Determinism(cfg, run_a, work, resume_epoch); }));

  std::cout << (failures == 0 ? "all criteria passed" :
                std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
