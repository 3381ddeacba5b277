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

#include "multiamp/motion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "multiamp/errors.hpp"

namespace mamp {

namespace {
constexpr std::string_view kReversedSuffix = "-reversed";
}  // namespace

// --- StateLayout / State ----------------------------------------------------

StateLayout::StateLayout(
    std::initializer_list<std::pair<std::string, int>> fields) {
  for (const auto& [name, dim] : fields) Add(name, dim);
}

void StateLayout::Add(std::string name, int dim) {
  if (dim <= 0) throw ValidationError("state field '" + name + "' has dim 0");
  if (Find(name) != nullptr) {
    throw ValidationError("duplicate state field '" + name + "'");
  }
  slots_.push_back({std::move(name), size_, dim});
  size_ += dim;
}

const StateLayout::Slot* StateLayout::Find(std::string_view name) const {
  for (const auto& s : slots_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

State::State(std::shared_ptr<const StateLayout> layout,
             std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_ || static_cast<int>(values_.size()) != layout_->size()) {
    throw ValidationError("state vector does not match its layout");
  }
}

std::optional<std::span<const double>> State::field(
    std::string_view name) const {
  const auto* slot = layout_ ? layout_->Find(name) : nullptr;
  if (slot == nullptr) return std::nullopt;
  return std::span<const double>(values_).subspan(slot->offset, slot->dim);
}

std::span<double> State::mutable_field(std::string_view name) {
  const auto* slot = layout_ ? layout_->Find(name) : nullptr;
  if (slot == nullptr) {
    throw SchemaError("state has no field '" + std::string(name) + "'");
  }
  return std::span<double>(values_).subspan(slot->offset, slot->dim);
}

bool State::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

// --- Fields / descriptors ---------------------------------------------------

std::string_view FieldKindName(FieldKind kind) {
  switch (kind) {
    case FieldKind::kPosition:
      return "position";
    case FieldKind::kVelocity:
      return "velocity";
    case FieldKind::kOther:
      return "other";
  }
  return "other";
}

FieldKind ParseFieldKind(std::string_view name) {
  if (name == "position") return FieldKind::kPosition;
  if (name == "velocity") return FieldKind::kVelocity;
  if (name == "other") return FieldKind::kOther;
  throw SchemaError("unknown field kind '" + std::string(name) + "'");
}

int ValidateFields(const FieldList& fields) {
  if (fields.empty()) {
    throw SchemaError("descriptor field list is empty (dimension must be >= 1)");
  }
  std::set<std::string> seen;
  int total = 0;
  for (const auto& f : fields) {
    if (f.name.empty()) throw SchemaError("descriptor field with empty name");
    if (f.dim <= 0) {
      throw SchemaError("descriptor field '" + f.name +
                        "' must have positive dim");
    }
    if (!seen.insert(f.name).second) {
      throw SchemaError("duplicate descriptor field '" + f.name + "'");
    }
    total += f.dim;
  }
  return total;
}

std::vector<double> ExtractDescriptor(const State& state,
                                      const FieldList& fields) {
  const int dim = ValidateFields(fields);
  std::vector<double> out;
  out.reserve(dim);
  for (const auto& f : fields) {
    const auto values = state.field(f.name);
    if (!values) {
      throw SchemaError("state has no descriptor field '" + f.name + "'");
    }
    if (static_cast<int>(values->size()) != f.dim) {
      throw SchemaError("descriptor field '" + f.name + "' has dim " +
                        std::to_string(values->size()) + ", expected " +
                        std::to_string(f.dim));
    }
    out.insert(out.end(), values->begin(), values->end());
  }
  return out;
}

TransitionDescriptor MakeTransition(const State& from, const State& to,
                                    const FieldList& fields) {
  TransitionDescriptor d;
  d.values = ExtractDescriptor(from, fields);
  const auto next = ExtractDescriptor(to, fields);
  d.values.insert(d.values.end(), next.begin(), next.end());
  return d;
}

DescriptorMap::DescriptorMap(const StateLayout& layout,
                             const FieldList& fields) {
  dim_ = ValidateFields(fields);
  for (const auto& f : fields) {
    const auto* slot = layout.Find(f.name);
    if (slot == nullptr) {
      throw SchemaError("state has no descriptor field '" + f.name + "'");
    }
    if (slot->dim != f.dim) {
      throw SchemaError("descriptor field '" + f.name + "' has dim " +
                        std::to_string(slot->dim) + ", expected " +
                        std::to_string(f.dim));
    }
    ranges_.emplace_back(slot->offset, slot->dim);
  }
}

void DescriptorMap::Extract(std::span<const double> state,
                            std::span<double> out) const {
  std::size_t k = 0;
  for (const auto& [offset, len] : ranges_) {
    std::copy_n(state.begin() + offset, len, out.begin() + k);
    k += static_cast<std::size_t>(len);
  }
}

// --- Clips --------------------------------------------------------------------

void MotionClip::Validate() const {
  if (name.empty()) throw SchemaError("clip has an empty name");
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ValidationError("clip '" + name + "' has non-positive dt");
  }
  const int dim = ValidateFields(fields);
  if (frames.rows() < 2) {
    throw ValidationError("clip '" + name + "' needs at least 2 frames");
  }
  if (frames.cols() != dim) {
    throw SchemaError("clip '" + name + "' frames have width " +
                      std::to_string(frames.cols()) + ", fields declare " +
                      std::to_string(dim));
  }
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    for (Eigen::Index j = 0; j < frames.cols(); ++j) {
      if (!std::isfinite(frames(i, j))) {
        throw ValidationError("clip '" + name + "' has a non-finite value at "
                              "frame " + std::to_string(i) + ", column " +
                              std::to_string(j));
      }
    }
  }
}

bool MotionClip::operator==(const MotionClip& other) const {
  return name == other.name && dt == other.dt && fields == other.fields &&
         frames.rows() == other.frames.rows() &&
         frames.cols() == other.frames.cols() &&
         (frames.array() == other.frames.array()).all();
}

MotionClip ReverseClip(const MotionClip& clip) {
  clip.Validate();
  MotionClip out;
  if (clip.name.size() > kReversedSuffix.size() &&
      clip.name.ends_with(kReversedSuffix)) {
    out.name = clip.name.substr(0, clip.name.size() - kReversedSuffix.size());
  } else {
    out.name = clip.name + std::string(kReversedSuffix);
  }
  out.dt = clip.dt;
  out.fields = clip.fields;
  out.frames = clip.frames.colwise().reverse();
  int col = 0;
  for (const auto& f : clip.fields) {
    if (f.kind == FieldKind::kVelocity) {
      out.frames.middleCols(col, f.dim) *= -1.0;
    }
    col += f.dim;
  }
  return out;
}

MotionClip ClipFromJson(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    for (const char* token : {"NaN", "Infinity"}) {
      if (text.find(token) != std::string_view::npos) {
        throw ValidationError(std::string("clip file has a non-finite value (") +
                              token + ")");
      }
    }
    throw SchemaError(std::string("malformed clip file: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("malformed clip file: not an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "name" && key != "dt" && key != "fields" && key != "frames") {
      throw SchemaError("malformed clip file: unknown key '" + key + "'");
    }
  }
  for (const char* key : {"name", "dt", "fields", "frames"}) {
    if (!doc.contains(key)) {
      throw SchemaError(std::string("malformed clip file: missing key '") +
                        key + "'");
    }
  }
  if (!doc["name"].is_string() || !doc["dt"].is_number() ||
      !doc["fields"].is_array() || !doc["frames"].is_array()) {
    throw SchemaError("malformed clip file: wrong value types");
  }
  MotionClip clip;
  clip.name = doc["name"].get<std::string>();
  clip.dt = doc["dt"].get<double>();
  for (const auto& f : doc["fields"]) {
    if (!f.is_object() || f.size() != 3 || !f.contains("name") ||
        !f.contains("kind") || !f.contains("dim") || !f["name"].is_string() ||
        !f["kind"].is_string() || !f["dim"].is_number_integer()) {
      throw SchemaError(
          "malformed clip file: field entries need exactly name, kind, dim");
    }
    clip.fields.push_back({f["name"].get<std::string>(),
                           ParseFieldKind(f["kind"].get<std::string>()),
                           f["dim"].get<int>()});
  }
  const int dim = ValidateFields(clip.fields);
  const auto& frames = doc["frames"];
  clip.frames.resize(static_cast<Eigen::Index>(frames.size()), dim);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& row = frames[i];
    if (!row.is_array()) {
      throw SchemaError("malformed clip file: frame " + std::to_string(i) +
                        " is not an array");
    }
    if (static_cast<int>(row.size()) != dim) {
      throw SchemaError("frame " + std::to_string(i) + " has width " +
                        std::to_string(row.size()) + ", expected " +
                        std::to_string(dim));
    }
    for (int j = 0; j < dim; ++j) {
      if (row[j].is_null()) {
        throw ValidationError("clip has a non-finite value at frame " +
                              std::to_string(i) + ", column " +
                              std::to_string(j));
      }
      if (!row[j].is_number()) {
        throw SchemaError("malformed clip file: frame " + std::to_string(i) +
                          " has a non-numeric entry");
      }
      clip.frames(static_cast<Eigen::Index>(i), j) = row[j].get<double>();
    }
  }
  clip.Validate();
  return clip;
}

std::string ClipToJson(const MotionClip& clip) {
  clip.Validate();
  using nlohmann::json;
  json doc;
  doc["name"] = clip.name;
  doc["dt"] = clip.dt;
  json fields = json::array();
  for (const auto& f : clip.fields) {
    fields.push_back(
        {{"name", f.name}, {"kind", FieldKindName(f.kind)}, {"dim", f.dim}});
  }
  doc["fields"] = std::move(fields);
  json frames = json::array();
  for (Eigen::Index i = 0; i < clip.frames.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < clip.frames.cols(); ++j) {
      row.push_back(clip.frames(i, j));
    }
    frames.push_back(std::move(row));
  }
  doc["frames"] = std::move(frames);
  return doc.dump() + "\n";
}

MotionClip LoadClip(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open clip file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return ClipFromJson(buffer.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void SaveClip(const MotionClip& clip, const std::filesystem::path& path) {
  const std::string text = ClipToJson(clip);
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open clip file '" + path.string() + "' for writing");
  }
  out << text;
  if (!out) throw IoError("failed writing clip file '" + path.string() + "'");
}

// --- Dataset --------------------------------------------------------------

MotionDataset::MotionDataset(std::string style_name,
                             std::vector<MotionClip> clips)
    : style_name_(std::move(style_name)), clips_(std::move(clips)) {
  if (clips_.empty()) {
    throw ValidationError("dataset '" + style_name_ +
                          "' has no clips; use MotionDataset::DataFree");
  }
  fields_ = clips_.front().fields;
  descriptor_dim_ = ValidateFields(fields_);
  const double dt = clips_.front().dt;
  for (const auto& clip : clips_) {
    clip.Validate();
    if (clip.fields != fields_) {
      throw SchemaError("dataset '" + style_name_ + "': clip '" + clip.name +
                        "' has a different field list than '" +
                        clips_.front().name + "'");
    }
    if (clip.dt != dt) {
      throw ValidationError("dataset '" + style_name_ + "': clip '" +
                            clip.name + "' has a different dt");
    }
    total_transitions_ += clip.num_transitions();
    cumulative_.push_back(total_transitions_);
  }
}

MotionDataset MotionDataset::DataFree(std::string style_name,
                                      FieldList fields) {
  MotionDataset d;
  d.style_name_ = std::move(style_name);
  d.descriptor_dim_ = ValidateFields(fields);
  d.fields_ = std::move(fields);
  return d;
}

Matrix MotionDataset::SampleTransitions(int count, Rng& rng) const {
  if (empty()) {
    throw DataFreeError("cannot sample transitions from data-free style '" +
                        style_name_ + "'");
  }
  if (count < 1) throw ValidationError("transition sample count must be >= 1");
  const int d = descriptor_dim_;
  Matrix out(2 * d, count);
  for (int k = 0; k < count; ++k) {
    const long j = static_cast<long>(
        rng.UniformIndex(static_cast<std::uint64_t>(total_transitions_)));
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), j);
    const std::size_t c = static_cast<std::size_t>(it - cumulative_.begin());
    const long first = c == 0 ? 0 : cumulative_[c - 1];
    const Eigen::Index row = j - first;
    out.col(k).head(d) = clips_[c].frames.row(row).transpose();
    out.col(k).tail(d) = clips_[c].frames.row(row + 1).transpose();
  }
  return out;
}

std::vector<TransitionDescriptor> MotionDataset::SampleTransitionList(
    int count, Rng& rng) const {
  const Matrix batch = SampleTransitions(count, rng);
  std::vector<TransitionDescriptor> out(count);
  for (int k = 0; k < count; ++k) {
    out[k].values.assign(batch.col(k).data(),
                         batch.col(k).data() + batch.rows());
  }
  return out;
}

Matrix MotionDataset::AllTransitions() const {
  const int d = descriptor_dim_;
  Matrix out(2 * d, total_transitions_);
  Eigen::Index k = 0;
  for (const auto& clip : clips_) {
    for (int i = 0; i + 1 < clip.num_frames(); ++i, ++k) {
      out.col(k).head(d) = clip.frames.row(i).transpose();
      out.col(k).tail(d) = clip.frames.row(i + 1).transpose();
    }
  }
  return out;
}

// --- Recording --------------------------------------------------------------

MotionClip RecordClip(StateSource& source, const FieldList& fields, int steps,
                      std::string name) {
  if (steps < 2) throw ValidationError("a recording needs at least 2 steps");
  const int dim = ValidateFields(fields);
  MotionClip clip;
  clip.name = std::move(name);
  clip.dt = source.dt();
  clip.fields = fields;
  clip.frames.resize(steps, dim);
  int recorded = 0;
  for (; recorded < steps; ++recorded) {
    auto state = source.Next();
    if (!state) break;
    const auto d = ExtractDescriptor(*state, fields);
    clip.frames.row(recorded) = Eigen::Map<const Eigen::RowVectorXd>(
        d.data(), static_cast<Eigen::Index>(d.size()));
  }
  if (recorded < 2) {
    throw ValidationError("recording ended after " + std::to_string(recorded) +
                          " frame(s); at least 2 are required");
  }
  if (recorded < steps) clip.frames.conservativeResize(recorded, dim);
  clip.Validate();
  return clip;
}

}  // namespace mamp
