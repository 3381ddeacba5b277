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

#ifndef MULTIAMP_MOTION_HPP_
#define MULTIAMP_MOTION_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "multiamp/mlp.hpp"
#include "multiamp/rng.hpp"

namespace mamp {

// ---------------------------------------------------------------------------
// Named environment states.
// ---------------------------------------------------------------------------

// Ordered set of named slices making up an environment state vector.
class StateLayout {
 public:
  struct Slot {
    std::string name;
    int offset;
    int dim;
  };

  StateLayout() = default;
  StateLayout(std::initializer_list<std::pair<std::string, int>> fields);

  void Add(std::string name, int dim);
  const Slot* Find(std::string_view name) const;
  const std::vector<Slot>& slots() const { return slots_; }
  int size() const { return size_; }

 private:
  std::vector<Slot> slots_;
  int size_ = 0;
};

// Flat state vector plus the layout that names its slices.
class State {
 public:
  State() = default;
  State(std::shared_ptr<const StateLayout> layout, std::vector<double> values);

  const StateLayout& layout() const { return *layout_; }
  const std::shared_ptr<const StateLayout>& layout_ptr() const {
    return layout_;
  }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }

  // Empty optional when the layout has no field of that name.
  std::optional<std::span<const double>> field(std::string_view name) const;
  std::span<double> mutable_field(std::string_view name);
  bool AllFinite() const;

 private:
  std::shared_ptr<const StateLayout> layout_;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Descriptor schema.
// ---------------------------------------------------------------------------

enum class FieldKind { kPosition, kVelocity, kOther };

std::string_view FieldKindName(FieldKind kind);
FieldKind ParseFieldKind(std::string_view name);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kOther;
  int dim = 1;

  bool operator==(const FieldSpec&) const = default;
};

using FieldList = std::vector<FieldSpec>;

// Checks names are unique and dims positive; returns the descriptor width.
int ValidateFields(const FieldList& fields);

// Concatenates the named state fields in list order.
std::vector<double> ExtractDescriptor(const State& state,
                                      const FieldList& fields);

// Descriptor of a single transition: [phi(s_t), phi(s_{t+1})].
struct TransitionDescriptor {
  std::vector<double> values;

  int descriptor_dim() const { return static_cast<int>(values.size()) / 2; }
  std::span<const double> from() const {
    return std::span<const double>(values).first(values.size() / 2);
  }
  std::span<const double> to() const {
    return std::span<const double>(values).last(values.size() / 2);
  }
};

TransitionDescriptor MakeTransition(const State& from, const State& to,
                                    const FieldList& fields);

// Precomputed field offsets for repeated extraction from one layout.
class DescriptorMap {
 public:
  DescriptorMap() = default;
  DescriptorMap(const StateLayout& layout, const FieldList& fields);

  int dim() const { return dim_; }
  void Extract(std::span<const double> state, std::span<double> out) const;

 private:
  std::vector<std::pair<int, int>> ranges_;  // (state offset, length)
  int dim_ = 0;
};

// ---------------------------------------------------------------------------
// Clips and datasets.
// ---------------------------------------------------------------------------

struct MotionClip {
  std::string name;
  double dt = 0.0;
  FieldList fields;
  Matrix frames;  // one row per frame, width = descriptor dim

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int descriptor_dim() const { return static_cast<int>(frames.cols()); }
  int num_transitions() const { return num_frames() - 1; }

  // Throws on any broken invariant (T >= 2, width, finiteness, dt > 0).
  void Validate() const;
  bool operator==(const MotionClip& other) const;
};

// Time-reversed playback: rows in reverse order, velocity-kind columns
// negated. The name toggles a "-reversed" suffix so that reversing twice
// returns an identical clip.
MotionClip ReverseClip(const MotionClip& clip);

MotionClip LoadClip(const std::filesystem::path& path);
void SaveClip(const MotionClip& clip, const std::filesystem::path& path);
MotionClip ClipFromJson(std::string_view text);
std::string ClipToJson(const MotionClip& clip);

// All motion data for one style. An empty clip list marks a data-free style.
class MotionDataset {
 public:
  MotionDataset() = default;
  MotionDataset(std::string style_name, std::vector<MotionClip> clips);

  static MotionDataset DataFree(std::string style_name, FieldList fields);

  const std::string& style_name() const { return style_name_; }
  const std::vector<MotionClip>& clips() const { return clips_; }
  const FieldList& fields() const { return fields_; }
  int descriptor_dim() const { return descriptor_dim_; }
  bool empty() const { return total_transitions_ == 0; }
  long total_transitions() const { return total_transitions_; }

  // count transitions drawn uniformly with replacement across all clips, as
  // columns of a (2 * descriptor_dim) x count matrix.
  Matrix SampleTransitions(int count, Rng& rng) const;
  // Same draws, returned as individual descriptors.
  std::vector<TransitionDescriptor> SampleTransitionList(int count,
                                                         Rng& rng) const;
  // Every consecutive pair of every clip, in clip order.
  Matrix AllTransitions() const;

 private:
  std::string style_name_;
  std::vector<MotionClip> clips_;
  FieldList fields_;
  int descriptor_dim_ = 0;
  std::vector<long> cumulative_;  // transitions up to and including clip i
  long total_transitions_ = 0;
};

// ---------------------------------------------------------------------------
// Recording.
// ---------------------------------------------------------------------------

// Yields successive states of some running process (a policy rollout or a
// scripted generator). Returns an empty optional once the episode has ended.
class StateSource {
 public:
  virtual ~StateSource() = default;
  virtual double dt() const = 0;
  virtual std::optional<State> Next() = 0;
};

// Stores the descriptor of `steps` successive states.
MotionClip RecordClip(StateSource& source, const FieldList& fields, int steps,
                      std::string name);

}  // namespace mamp

#endif  // MULTIAMP_MOTION_HPP_
