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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "multiamp/envs.hpp"
#include "multiamp/errors.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/rng.hpp"

namespace mamp {
namespace {

FieldList QvFields() {
  return {{"q", FieldKind::kPosition, 1}, {"qd", FieldKind::kVelocity, 1}};
}

MotionClip RandomClip(Rng& rng, int frames) {
  MotionClip clip;
  clip.name = "random";
  clip.dt = 0.02;
  clip.fields = {{"q", FieldKind::kPosition, 2},
                 {"qd", FieldKind::kVelocity, 2},
                 {"tag", FieldKind::kOther, 1}};
  clip.frames.resize(frames, 5);
  for (int r = 0; r < frames; ++r) {
    for (int c = 0; c < 5; ++c) clip.frames(r, c) = rng.Uniform(-3.0, 3.0);
  }
  return clip;
}

std::filesystem::path TempPath(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "multiamp_test_motion";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(ExtractDescriptor, ConcatenatesInSpecOrder) {
  TwoLinkReacher reacher;
  State s = reacher.MakeState(std::vector<double>{0.1, 0.2},
                              std::vector<double>{0.0, 0.0});
  s.mutable_field("ee")[0] = 1.8;
  s.mutable_field("ee")[1] = 0.3;
  FieldList spec = {{"q", FieldKind::kPosition, 2},
                    {"qd", FieldKind::kVelocity, 2},
                    {"ee", FieldKind::kPosition, 2}};
  std::vector<double> expected = {0.1, 0.2, 0.0, 0.0, 1.8, 0.3};
  EXPECT_EQ(ExtractDescriptor(s, spec), expected);
  // pure
  EXPECT_EQ(ExtractDescriptor(s, spec), ExtractDescriptor(s, spec));
}

TEST(ExtractDescriptor, FiftyWideDescriptor) {
  auto layout = std::make_shared<StateLayout>();
  FieldList spec;
  for (int i = 0; i < 10; ++i) {
    layout->Add("f" + std::to_string(i), 5);
    spec.push_back({"f" + std::to_string(i), FieldKind::kOther, 5});
  }
  State s(layout, std::vector<double>(50, 1.0));
  EXPECT_EQ(ExtractDescriptor(s, spec).size(), 50u);
  EXPECT_EQ(MakeTransition(s, s, spec).values.size(), 100u);
}

TEST(ExtractDescriptor, EmptySpecRejected) {
  TwoLinkReacher reacher;
  Rng rng(1);
  reacher.Reset(rng);
  EXPECT_THROW(ExtractDescriptor(reacher.state(), {}), SchemaError);
}

TEST(ExtractDescriptor, MissingFieldNamed) {
  TwoLinkReacher reacher;
  Rng rng(1);
  reacher.Reset(rng);
  try {
    ExtractDescriptor(reacher.state(), {{"base_height", FieldKind::kOther, 1}});
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("base_height"), std::string::npos);
  }
}

TEST(MakeTransition, HalvesAndLength) {
  TwoLinkReacher reacher;
  Rng rng(3);
  reacher.Reset(rng);
  const State a = reacher.state();
  const State b = reacher.Step(std::vector<double>{1.0, -1.0}).next;
  const FieldList spec = reacher.DefaultDescriptorFields();
  auto d = MakeTransition(a, b, spec);
  ASSERT_EQ(d.values.size(), 12u);
  EXPECT_EQ(d.descriptor_dim(), 6);
  auto from = ExtractDescriptor(a, spec);
  auto to = ExtractDescriptor(b, spec);
  EXPECT_TRUE(std::equal(from.begin(), from.end(), d.from().begin()));
  EXPECT_TRUE(std::equal(to.begin(), to.end(), d.to().begin()));

  auto same = MakeTransition(a, a, spec);
  EXPECT_TRUE(std::equal(same.from().begin(), same.from().end(),
                         same.to().begin()));
}

TEST(MakeTransition, SchemaMismatch) {
  TwoLinkReacher reacher;
  PointTracker tracker;
  Rng rng(3);
  reacher.Reset(rng);
  tracker.Reset(rng);
  EXPECT_THROW(MakeTransition(reacher.state(), tracker.state(),
                              reacher.DefaultDescriptorFields()),
               SchemaError);
}

TEST(ReverseClip, TwoFrameExample) {
  MotionClip clip{"walk", 0.02, QvFields(), Matrix(2, 2)};
  clip.frames << 0.1, 0.3, 0.2, 0.3;
  MotionClip rev = ReverseClip(clip);
  Matrix expected(2, 2);
  expected << 0.2, -0.3, 0.1, -0.3;
  EXPECT_EQ(rev.frames, expected);
  EXPECT_EQ(rev.dt, clip.dt);
  EXPECT_EQ(rev.name, "walk-reversed");
  EXPECT_EQ(ReverseClip(rev), clip);
}

TEST(ReverseClip, InvolutionAndVelocityNegation) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    MotionClip clip = RandomClip(rng, 2 + static_cast<int>(rng.UniformIndex(40)));
    MotionClip rev = ReverseClip(clip);
    MotionClip back = ReverseClip(rev);
    ASSERT_EQ(back.name, clip.name);
    ASSERT_EQ(std::memcmp(back.frames.data(), clip.frames.data(),
                          sizeof(double) * clip.frames.size()),
              0);
    const int t = clip.num_frames();
    for (int r = 0; r < t; ++r) {
      for (int c = 0; c < 5; ++c) {
        const double orig = clip.frames(t - 1 - r, c);
        const bool velocity = (c == 2 || c == 3);
        ASSERT_EQ(rev.frames(r, c), velocity ? -orig : orig);
      }
    }
  }
}

TEST(ReverseClip, RestingEndBecomesRestingStart) {
  MotionClip clip{"stand", 0.02, QvFields(), Matrix(3, 2)};
  clip.frames << 0.0, 0.5, 0.4, 0.2, 0.5, 0.0;
  MotionClip rev = ReverseClip(clip);
  EXPECT_EQ(rev.frames(0, 1), 0.0);
}

TEST(ReverseClip, NoVelocityFieldsIsPureReversal) {
  MotionClip clip{"pos", 0.1, {{"x", FieldKind::kPosition, 1}}, Matrix(3, 1)};
  clip.frames << 1.0, 2.0, 3.0;
  MotionClip rev = ReverseClip(clip);
  EXPECT_EQ(rev.frames(0, 0), 3.0);
  EXPECT_EQ(rev.frames(1, 0), 2.0);
  EXPECT_EQ(rev.frames(2, 0), 1.0);
}

TEST(SampleTransitions, SingleTransition) {
  MotionClip clip{"one", 0.02, QvFields(), Matrix(2, 2)};
  clip.frames << 1.0, 2.0, 3.0, 4.0;
  MotionDataset ds("s", {clip});
  Rng rng(5);
  auto list = ds.SampleTransitionList(17, rng);
  ASSERT_EQ(list.size(), 17u);
  for (const auto& d : list) {
    EXPECT_EQ(d.values, (std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  }
}

TEST(SampleTransitions, ClipFrequenciesFollowTransitionCounts) {
  // Clip A: 11 frames with q = 0, clip B: 21 frames with q = 1.
  MotionClip a{"a", 0.02, QvFields(), Matrix::Zero(11, 2)};
  MotionClip b{"b", 0.02, QvFields(), Matrix::Ones(21, 2)};
  MotionDataset ds("s", {a, b});
  EXPECT_EQ(ds.total_transitions(), 30);
  Rng rng(9);
  const int n = 100000;
  Matrix draws = ds.SampleTransitions(n, rng);
  int from_b = 0;
  for (int i = 0; i < n; ++i) from_b += draws(0, i) == 1.0;
  const double pb = static_cast<double>(from_b) / n;
  EXPECT_NEAR(pb, 20.0 / 30.0, 0.01);
  EXPECT_NEAR(1.0 - pb, 10.0 / 30.0, 0.01);
  // chi-square with one degree of freedom, p = 0.001 critical value
  const double ea = n / 3.0, eb = 2.0 * n / 3.0;
  const double chi2 = std::pow(n - from_b - ea, 2) / ea +
                      std::pow(from_b - eb, 2) / eb;
  EXPECT_LT(chi2, 10.83);
}

TEST(SampleTransitions, SeedReproducible) {
  Rng g(2);
  MotionDataset ds("s", {RandomClip(g, 30), RandomClip(g, 7)});
  Rng r1(42), r2(42);
  Matrix m1 = ds.SampleTransitions(64, r1);
  Matrix m2 = ds.SampleTransitions(64, r2);
  EXPECT_EQ(m1, m2);
}

TEST(SampleTransitions, ZeroCountAndDataFree) {
  MotionDataset ds("s", {MotionClip{"c", 0.02, QvFields(), Matrix::Zero(3, 2)}});
  Rng rng(1);
  EXPECT_THROW(ds.SampleTransitions(0, rng), ValidationError);
  auto free = MotionDataset::DataFree("free", QvFields());
  EXPECT_TRUE(free.empty());
  EXPECT_THROW(free.SampleTransitions(4, rng), DataFreeError);
}

TEST(MotionDataset, MismatchedFieldsRejected) {
  MotionClip a{"a", 0.02, QvFields(), Matrix::Zero(3, 2)};
  MotionClip b{"b", 0.02,
               {{"q", FieldKind::kPosition, 1}, {"v", FieldKind::kVelocity, 1}},
               Matrix::Zero(3, 2)};
  EXPECT_THROW(MotionDataset("s", {a, b}), SchemaError);
}

TEST(RecordClip, FrameCountAndDt) {
  TwoLinkReacher reacher;
  SinusoidSource source(reacher, SinusoidParams::DefaultSweep(),
                        reacher.control_dt());
  MotionClip clip =
      RecordClip(source, reacher.DefaultDescriptorFields(), 100, "sweep");
  EXPECT_EQ(clip.num_frames(), 100);
  EXPECT_DOUBLE_EQ(clip.dt, 0.02);
  EXPECT_THROW(RecordClip(source, reacher.DefaultDescriptorFields(), 1, "x"),
               ValidationError);
}

TEST(RecordClip, SinusoidVelocityMatchesDifferences) {
  // q(t) = A sin(w t), A = 0.5, w = 2 pi, dt = 0.01
  const double amp = 0.5, w = 2.0 * std::numbers::pi, dt = 0.01;
  SinusoidParams params;
  params.joints[0] = {amp, 1.0, 0.0, 0.0};
  params.joints[1] = {amp, 1.0, 0.0, 0.0};
  ReacherConfig cfg;
  cfg.dt = dt;
  TwoLinkReacher reacher(cfg);
  SinusoidSource source(reacher, params, dt);
  FieldList fields = {{"q", FieldKind::kPosition, 2},
                      {"qd", FieldKind::kVelocity, 2}};
  MotionClip clip = RecordClip(source, fields, 100, "sine");
  ASSERT_EQ(clip.num_frames(), 100);
  const double tol = 2.0 * amp * w * w * dt;
  for (int t = 0; t + 1 < clip.num_frames(); ++t) {
    const double fd = (clip.frames(t + 1, 0) - clip.frames(t, 0)) / dt;
    EXPECT_NEAR(clip.frames(t, 2), fd, tol) << "frame " << t;
  }
}

TEST(ClipFile, RoundTrip) {
  Rng rng(4);
  MotionClip clip = RandomClip(rng, 25);
  clip.frames(3, 1) = 0.1 + 0.2;  // not exactly representable in short form
  const auto path = TempPath("roundtrip.json");
  SaveClip(clip, path);
  MotionClip back = LoadClip(path);
  EXPECT_EQ(back, clip);
  EXPECT_EQ(std::memcmp(back.frames.data(), clip.frames.data(),
                        sizeof(double) * clip.frames.size()),
            0);
}

TEST(ClipFile, WrongWidthNamesFrame) {
  const std::string text = R"({"name": "c", "dt": 0.02,
    "fields": [{"name": "q", "kind": "position", "dim": 1},
               {"name": "qd", "kind": "velocity", "dim": 1}],
    "frames": [[0, 1], [0, 1], [0, 1, 2]]})";
  try {
    ClipFromJson(text);
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("frame 2"), std::string::npos)
        << e.what();
  }
}

TEST(ClipFile, NonFiniteRejected) {
  const std::string text = R"({"name": "c", "dt": 0.02,
    "fields": [{"name": "q", "kind": "position", "dim": 1}],
    "frames": [[0], [NaN]]})";
  EXPECT_THROW(ClipFromJson(text), ValidationError);
  const std::string with_null = R"({"name": "c", "dt": 0.02,
    "fields": [{"name": "q", "kind": "position", "dim": 1}],
    "frames": [[0], [null]]})";
  EXPECT_THROW(ClipFromJson(with_null), Error);
}

TEST(ClipFile, DistinctDiagnostics) {
  EXPECT_THROW(ClipFromJson("{not json"), SchemaError);
  EXPECT_THROW(ClipFromJson(R"({"name": "c", "dt": 0.02, "fields": [],
                                "frames": [], "extra": 1})"),
               SchemaError);
  EXPECT_THROW(LoadClip(TempPath("does_not_exist.json")), IoError);
}

}  // namespace
}  // namespace mamp
