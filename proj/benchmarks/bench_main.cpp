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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "multiamp/adversary.hpp"
#include "multiamp/config.hpp"
#include "multiamp/envs.hpp"
#include "multiamp/log.hpp"
#include "multiamp/mlp.hpp"
#include "multiamp/ppo.hpp"
#include "multiamp/rng.hpp"
#include "multiamp/trainer.hpp"

namespace {

using namespace mamp;

Matrix RandomMatrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Uniform(-1, 1);
  return m;
}

Mlp MakeNet(std::vector<int> widths, Rng& rng) {
  Mlp net(std::move(widths), Activation::kTanh);
  net.Initialize(InitScheme::kOrthogonal, rng, std::sqrt(2.0), 1.0);
  return net;
}

void BM_MlpForward(benchmark::State& state) {
  Rng rng(1);
  const int batch = static_cast<int>(state.range(0));
  const Mlp net = MakeNet({15, 64, 64, 2}, rng);
  const Matrix x = RandomMatrix(rng, 15, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.Forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(64)->Arg(2048);

void BM_MlpBackward(benchmark::State& state) {
  Rng rng(2);
  const int batch = static_cast<int>(state.range(0));
  const Mlp net = MakeNet({15, 64, 64, 2}, rng);
  const Matrix x = RandomMatrix(rng, 15, batch);
  const Matrix up = RandomMatrix(rng, 2, batch);
  Vector grads = Vector::Zero(static_cast<Eigen::Index>(net.num_params()));
  for (auto _ : state) {
    MlpTape tape;
    net.Forward(x, tape);
    net.Backward(tape, up, grads, nullptr);
    benchmark::DoNotOptimize(grads.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(2048);

void BM_DiscriminatorLoss(benchmark::State& state) {
  Rng rng(3);
  const int k = static_cast<int>(state.range(0));
  const Mlp d = MakeNet({12, 64, 64, 1}, rng);
  const Matrix motion = RandomMatrix(rng, 12, k), policy = RandomMatrix(rng, 12, k);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ComputeDiscriminatorLoss(d, motion, policy, 10.0));
  }
  state.SetItemsProcessed(state.iterations() * 2 * k);
}
BENCHMARK(BM_DiscriminatorLoss)->Arg(512);

void BM_ReacherStep(benchmark::State& state) {
  TwoLinkReacher env;
  Rng rng(4);
  env.Reset(rng);
  std::vector<double> action = {0.3, -0.2};
  for (auto _ : state) {
    auto r = env.Step(action, Disturbance{});
    if (r.terminated || r.truncated) env.Reset(rng);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_ReacherStep);

void BM_GaeBatch(benchmark::State& state) {
  Rng rng(5);
  const int n = 32;
  std::vector<double> r(n), v(n);
  std::vector<std::uint8_t> term(n, 0);
  for (int t = 0; t < n; ++t) {
    r[t] = rng.Uniform(-1, 1);
    v[t] = rng.Uniform(-1, 1);
  }
  for (auto _ : state) {
    for (int e = 0; e < 256; ++e) benchmark::DoNotOptimize(ComputeGae(r, v, term, 0.5, 0.99, 0.95));
  }
}
BENCHMARK(BM_GaeBatch);

// One training epoch of the shipped three-style config.
void BM_TrainEpoch(benchmark::State& state) {
  log::SetLevel(log::Level::kWarning);
  TrainerConfig cfg =
      LoadConfig(std::string(MULTIAMP_SOURCE_DIR) + "/configs/reacher_3style.json");
  for (auto& s : cfg.styles) {
    for (auto& c : s.clips) c = std::string(MULTIAMP_SOURCE_DIR) + "/" + c;
  }
  cfg.output_dir = (std::filesystem::temp_directory_path() / "multiamp_bench").string();
  Trainer trainer(cfg);
  for (int i = 0; i < 3; ++i) trainer.RunEpoch();  // past the warmup
  for (auto _ : state) benchmark::DoNotOptimize(trainer.RunEpoch());
  state.SetItemsProcessed(state.iterations() * cfg.num_envs * cfg.horizon);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
