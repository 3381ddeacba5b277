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

#include "multiamp/adversary.hpp"

#include <cmath>
#include <string>

#include "multiamp/errors.hpp"
#include "multiamp/log.hpp"

namespace mamp {

double StyleRewardFromLogit(double logit) {
  if (!std::isfinite(logit)) {
    throw DivergenceError("discriminator produced a non-finite logit");
  }
  return std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
}

// --- RunningNormalizer --------------------------------------------------------

RunningNormalizer::RunningNormalizer(int dim)
    : mean_(Vector::Zero(dim)), var_(Vector::Ones(dim)) {}

void RunningNormalizer::Update(const Matrix& transitions) {
  const int d = dim();
  if (transitions.rows() != 2 * d) {
    throw ValidationError("normalizer update: descriptor width mismatch");
  }
  if (transitions.cols() == 0) return;
  Matrix frames(d, 2 * transitions.cols());
  frames << transitions.topRows(d), transitions.bottomRows(d);
  const double n = static_cast<double>(frames.cols());
  const Vector batch_mean = frames.rowwise().mean();
  const Vector batch_var =
      (frames.colwise() - batch_mean).array().square().rowwise().mean();
  if (count_ == 0.0) {
    mean_ = batch_mean;
    var_ = batch_var;
    count_ = n;
    return;
  }
  // Parallel-variance merge of (count_, mean_, var_) with the batch.
  const double total = count_ + n;
  const Vector delta = batch_mean - mean_;
  mean_ += delta * (n / total);
  var_ = (var_ * count_ + batch_var * n +
          delta.cwiseAbs2() * (count_ * n / total)) /
         total;
  count_ = total;
}

Matrix RunningNormalizer::Apply(const Matrix& transitions) const {
  const int d = dim();
  if (transitions.rows() != 2 * d) {
    throw ValidationError("normalizer: descriptor width mismatch");
  }
  Vector shift(2 * d), scale(2 * d);
  shift << mean_, mean_;
  const Vector inv = (var_.array() + kEpsilon).rsqrt();
  scale << inv, inv;
  Matrix out = (transitions.colwise() - shift).array().colwise() *
               scale.array();
  return out.cwiseMax(-kClip).cwiseMin(kClip);
}

void RunningNormalizer::Save(BinaryWriter& out) const {
  out.Magic("NORM");
  out.F64(count_);
  out.Doubles({mean_.data(), static_cast<std::size_t>(mean_.size())});
  out.Doubles({var_.data(), static_cast<std::size_t>(var_.size())});
}

void RunningNormalizer::Load(BinaryReader& in) {
  in.ExpectMagic("NORM", "normalizer state");
  count_ = in.F64();
  in.DoublesInto({mean_.data(), static_cast<std::size_t>(mean_.size())});
  in.DoublesInto({var_.data(), static_cast<std::size_t>(var_.size())});
}

// --- DescriptorBuffer ---------------------------------------------------------

DescriptorBuffer::DescriptorBuffer(int capacity, int width)
    : capacity_(capacity), width_(width) {
  if (capacity <= 0 || width <= 0) {
    throw ValidationError("descriptor buffer needs positive capacity/width");
  }
  storage_.resize(width, capacity);
  sources_.assign(capacity, -1);
}

int DescriptorBuffer::Physical(int logical) const {
  return (head_ + logical) % capacity_;
}

void DescriptorBuffer::Push(std::span<const double> descriptor,
                            int source_style) {
  if (static_cast<int>(descriptor.size()) != width_) {
    throw ValidationError("descriptor width " +
                          std::to_string(descriptor.size()) +
                          " does not match buffer width " +
                          std::to_string(width_));
  }
  int slot;
  if (size_ < capacity_) {
    slot = Physical(size_);
    ++size_;
  } else {
    slot = head_;
    head_ = (head_ + 1) % capacity_;
  }
  storage_.col(slot) =
      Eigen::Map<const Vector>(descriptor.data(), width_);
  sources_[slot] = source_style;
}

std::vector<std::vector<double>> DescriptorBuffer::Contents() const {
  std::vector<std::vector<double>> out;
  out.reserve(size_);
  for (int i = 0; i < size_; ++i) {
    const auto col = storage_.col(Physical(i));
    out.emplace_back(col.data(), col.data() + width_);
  }
  return out;
}

std::vector<int> DescriptorBuffer::SourceStyles() const {
  std::vector<int> out;
  out.reserve(size_);
  for (int i = 0; i < size_; ++i) out.push_back(sources_[Physical(i)]);
  return out;
}

Matrix DescriptorBuffer::Sample(int count, Rng& rng) const {
  if (size_ == 0) throw WarmupError("descriptor buffer is empty");
  if (count < 1) throw ValidationError("sample count must be >= 1");
  Matrix out(width_, count);
  for (int k = 0; k < count; ++k) {
    const int i = static_cast<int>(
        rng.UniformIndex(static_cast<std::uint64_t>(size_)));
    out.col(k) = storage_.col(Physical(i));
  }
  return out;
}

Matrix DescriptorBuffer::Newest(int count) const {
  const int n = std::min(count, size_);
  Matrix out(width_, n);
  for (int k = 0; k < n; ++k) out.col(k) = storage_.col(Physical(size_ - n + k));
  return out;
}

void DescriptorBuffer::Save(BinaryWriter& out) const {
  out.Magic("DBUF");
  out.U64(static_cast<std::uint64_t>(capacity_));
  out.U64(static_cast<std::uint64_t>(width_));
  out.U64(static_cast<std::uint64_t>(size_));
  for (int i = 0; i < size_; ++i) {
    const int p = Physical(i);
    out.Doubles({storage_.col(p).data(), static_cast<std::size_t>(width_)});
    out.I64(sources_[p]);
  }
}

void DescriptorBuffer::Load(BinaryReader& in) {
  in.ExpectMagic("DBUF", "descriptor buffer");
  const auto capacity = in.U64();
  const auto width = in.U64();
  const auto size = in.U64();
  if (static_cast<int>(capacity) != capacity_ ||
      static_cast<int>(width) != width_ || size > capacity) {
    throw IncompatibleError("descriptor buffer shape does not match config");
  }
  head_ = 0;
  size_ = static_cast<int>(size);
  for (int i = 0; i < size_; ++i) {
    in.DoublesInto({storage_.col(i).data(), static_cast<std::size_t>(width_)});
    sources_[i] = static_cast<int>(in.I64());
  }
}

// --- Loss ---------------------------------------------------------------------

DiscriminatorLoss ComputeDiscriminatorLoss(const Mlp& discriminator,
                                           const Matrix& motion_batch,
                                           const Matrix& policy_batch,
                                           double gp_weight, bool with_grads) {
  if (motion_batch.cols() == 0 || policy_batch.cols() == 0) {
    throw ValidationError("discriminator loss needs non-empty batches");
  }
  if (motion_batch.rows() != discriminator.input_dim() ||
      policy_batch.rows() != discriminator.input_dim()) {
    throw ValidationError("discriminator loss: descriptor width mismatch");
  }
  if (gp_weight < 0.0) throw ValidationError("gradient-penalty weight < 0");
  const double nm = static_cast<double>(motion_batch.cols());
  const double np = static_cast<double>(policy_batch.cols());

  DiscriminatorLoss loss;
  MlpTape motion_tape, policy_tape;
  const Matrix dm = discriminator.Forward(motion_batch, motion_tape);
  const Matrix dp = discriminator.Forward(policy_batch, policy_tape);
  loss.motion_term = (dm.array() - 1.0).square().sum() / nm;
  loss.policy_term = (dp.array() + 1.0).square().sum() / np;

  const double penalty_scale = gp_weight / (2.0 * nm);
  if (with_grads) {
    loss.grads = Vector::Zero(static_cast<Eigen::Index>(discriminator.num_params()));
    discriminator.Backward(motion_tape, (2.0 / nm) * (dm.array() - 1.0).matrix(),
                           loss.grads, nullptr);
    discriminator.Backward(policy_tape, (2.0 / np) * (dp.array() + 1.0).matrix(),
                           loss.grads, nullptr);
  }
  if (gp_weight > 0.0) {
    const double squared = discriminator.InputGradSquaredNorm(
        motion_batch, penalty_scale, with_grads ? &loss.grads : nullptr);
    loss.penalty_term = penalty_scale * squared;
  }
  loss.total = loss.motion_term + loss.policy_term + loss.penalty_term;
  return loss;
}

// --- StyleSlot ----------------------------------------------------------------

StyleSlot::StyleSlot(int index, MotionDataset dataset, double env_weight,
                     const DiscriminatorConfig& config, Rng& init_rng)
    : index_(index),
      dataset_(std::move(dataset)),
      env_weight_(env_weight),
      config_(config) {
  if (index < 0) throw ValidationError("style index must be non-negative");
  if (!(env_weight > 0.0)) {
    throw ValidationError("style environment weight must be positive");
  }
  const int d = dataset_.descriptor_dim();
  if (d <= 0) throw ValidationError("style slot needs a descriptor schema");
  std::vector<int> widths = {2 * d};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(1);
  discriminator_ = Mlp(widths, config_.activation);
  discriminator_.Initialize(InitScheme::kOrthogonal, init_rng, std::sqrt(2.0),
                            1.0);
  optimizer_ = Adam(static_cast<Eigen::Index>(discriminator_.num_params()),
                    AdamConfig{.learning_rate = config_.learning_rate});
  buffer_ = DescriptorBuffer(config_.buffer_capacity, 2 * d);
  normalizer_ = RunningNormalizer(d);
}

Matrix StyleSlot::Prepare(const Matrix& raw) const {
  return config_.normalize ? normalizer_.Apply(raw) : raw;
}

double StyleSlot::StyleReward(const TransitionDescriptor& descriptor) const {
  if (static_cast<int>(descriptor.values.size()) != 2 * descriptor_dim()) {
    throw ValidationError("style reward: descriptor width mismatch");
  }
  if (data_free()) return 0.0;
  const Matrix raw = Eigen::Map<const Vector>(
      descriptor.values.data(),
      static_cast<Eigen::Index>(descriptor.values.size()));
  return StyleRewardFromLogit(discriminator_.Forward(Prepare(raw))(0, 0));
}

Vector StyleSlot::StyleRewards(const Matrix& raw) const {
  if (raw.rows() != 2 * descriptor_dim()) {
    throw ValidationError("style reward: descriptor width mismatch");
  }
  if (data_free()) return Vector::Zero(raw.cols());
  const Matrix logits = discriminator_.Forward(Prepare(raw));
  Vector out(raw.cols());
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    out(i) = StyleRewardFromLogit(logits(0, i));
  }
  return out;
}

void StyleSlot::PushPolicyDescriptor(std::span<const double> descriptor,
                                     int source_style) {
  if (source_style != index_) {
    throw ValidationError("descriptor from style " +
                          std::to_string(source_style) +
                          " routed to style slot " + std::to_string(index_));
  }
  buffer_.Push(descriptor, source_style);
}

DiscriminatorLoss StyleSlot::Loss(const Matrix& motion_raw,
                                  const Matrix& policy_raw,
                                  double gp_weight) const {
  if (data_free()) {
    throw DataFreeError("discriminator loss requested for data-free style " +
                        std::to_string(index_));
  }
  return ComputeDiscriminatorLoss(discriminator_, Prepare(motion_raw),
                                  Prepare(policy_raw), gp_weight);
}

std::vector<double> StyleSlot::UpdateDiscriminator(int batch_size,
                                                   int n_updates, Rng& rng) {
  std::vector<double> trace;
  if (data_free()) {
    log::Debug("style " + std::to_string(index_) +
               " is data-free; discriminator update skipped");
    return trace;
  }
  if (n_updates <= 0) return trace;
  if (batch_size < 1) throw ValidationError("discriminator batch size < 1");
  if (buffer_.size() < batch_size) {
    throw WarmupError("style " + std::to_string(index_) + " buffer holds " +
                      std::to_string(buffer_.size()) + " < " +
                      std::to_string(batch_size) + " descriptors");
  }
  trace.reserve(n_updates);
  for (int step = 0; step < n_updates; ++step) {
    const Matrix motion = dataset_.SampleTransitions(batch_size, rng);
    const Matrix policy = buffer_.Sample(batch_size, rng);
    DiscriminatorLoss loss = Loss(motion, policy, config_.gp_weight);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError("discriminator loss of style " +
                            std::to_string(index_) + " is not finite");
    }
    optimizer_.Step(discriminator_.params(), loss.grads);
    trace.push_back(loss.total);
  }
  return trace;
}

double StyleSlot::Accuracy(const Matrix& motion_raw,
                           const Matrix& policy_raw) const {
  if (data_free()) {
    throw DataFreeError("accuracy requested for data-free style " +
                        std::to_string(index_));
  }
  const Matrix dm = discriminator_.Forward(Prepare(motion_raw));
  const Matrix dp = discriminator_.Forward(Prepare(policy_raw));
  const double correct =
      static_cast<double>((dm.array() > 0.0).count() + (dp.array() < 0.0).count());
  return correct / static_cast<double>(dm.cols() + dp.cols());
}

void StyleSlot::Save(BinaryWriter& out) const {
  out.Magic("SLOT");
  out.U64(static_cast<std::uint64_t>(index_));
  discriminator_.Save(out);
  optimizer_.Save(out);
  buffer_.Save(out);
  normalizer_.Save(out);
}

void StyleSlot::Load(BinaryReader& in) {
  in.ExpectMagic("SLOT", "style slot");
  if (in.U64() != static_cast<std::uint64_t>(index_)) {
    throw IncompatibleError("style slot index mismatch");
  }
  Mlp net = Mlp::Load(in);
  if (net.widths() != discriminator_.widths() ||
      net.activation() != discriminator_.activation()) {
    throw IncompatibleError("discriminator architecture of style " +
                            std::to_string(index_) +
                            " does not match the configuration");
  }
  discriminator_ = std::move(net);
  optimizer_.Load(in);
  buffer_.Load(in);
  normalizer_.Load(in);
}

}  // namespace mamp
