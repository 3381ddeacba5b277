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

#ifndef MULTIAMP_ADVERSARY_HPP_
#define MULTIAMP_ADVERSARY_HPP_

#include <span>
#include <vector>

#include "multiamp/adam.hpp"
#include "multiamp/binary_io.hpp"
#include "multiamp/mlp.hpp"
#include "multiamp/motion.hpp"
#include "multiamp/rng.hpp"

namespace mamp {

// Style reward from a discriminator logit: -log(1 - sigmoid(logit)), which is
// softplus(logit), evaluated as max(x, 0) + log1p(exp(-|x|)).
double StyleRewardFromLogit(double logit);

// Running per-feature mean/variance of descriptor frames (phi values). The
// same affine map is applied to both halves of a transition descriptor.
class RunningNormalizer {
 public:
  static constexpr double kEpsilon = 1e-4;
  static constexpr double kClip = 5.0;

  RunningNormalizer() = default;
  explicit RunningNormalizer(int dim);

  int dim() const { return static_cast<int>(mean_.size()); }
  double count() const { return count_; }
  const Vector& mean() const { return mean_; }
  const Vector& variance() const { return var_; }

  // Folds in the frames of a batch of transition descriptors (columns of
  // width 2 * dim; both halves count as samples).
  void Update(const Matrix& transitions);
  // Normalizes transition descriptors (width 2 * dim) column by column.
  Matrix Apply(const Matrix& transitions) const;

  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);

 private:
  double count_ = 0.0;
  Vector mean_;
  Vector var_;
};

// FIFO ring of transition descriptors, each tagged with the style index
// that was active when it was produced.
class DescriptorBuffer {
 public:
  DescriptorBuffer() = default;
  DescriptorBuffer(int capacity, int width);

  int capacity() const { return capacity_; }
  int width() const { return width_; }
  int size() const { return size_; }

  void Push(std::span<const double> descriptor, int source_style);
  // Oldest first.
  std::vector<std::vector<double>> Contents() const;
  std::vector<int> SourceStyles() const;
  // count descriptors drawn uniformly with replacement, as columns.
  Matrix Sample(int count, Rng& rng) const;
  // The most recent count descriptors (or fewer, if the buffer is smaller).
  Matrix Newest(int count) const;

  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);

 private:
  int Physical(int logical) const;

  int capacity_ = 0;
  int width_ = 0;
  int head_ = 0;  // slot of the oldest element
  int size_ = 0;
  Matrix storage_;  // width x capacity
  std::vector<int> sources_;
};

struct DiscriminatorConfig {
  std::vector<int> hidden = {256, 256};
  Activation activation = Activation::kTanh;
  double learning_rate = 1e-4;
  int batch_size = 512;  // K
  int updates_per_epoch = 2;
  double gp_weight = 10.0;
  int buffer_capacity = 100000;
  bool normalize = true;
};

struct DiscriminatorLoss {
  double total = 0.0;
  double motion_term = 0.0;   // mean (D(motion) - 1)^2
  double policy_term = 0.0;   // mean (D(policy) + 1)^2
  double penalty_term = 0.0;  // (w_gp / 2) * mean |grad_d D(motion)|^2
  Vector grads;               // d total / d params (empty if not requested)
};

// Least-squares adversarial loss with a gradient penalty at motion samples.
// Batches are columns of discriminator inputs (already normalized).
DiscriminatorLoss ComputeDiscriminatorLoss(const Mlp& discriminator,
                                           const Matrix& motion_batch,
                                           const Matrix& policy_batch,
                                           double gp_weight,
                                           bool with_grads = true);

// One style: discriminator, policy-side descriptor buffer, motion dataset.
class StyleSlot {
 public:
  StyleSlot(int index, MotionDataset dataset, double env_weight,
            const DiscriminatorConfig& config, Rng& init_rng);

  int index() const { return index_; }
  bool data_free() const { return dataset_.empty(); }
  double env_weight() const { return env_weight_; }
  int descriptor_dim() const { return dataset_.descriptor_dim(); }
  const MotionDataset& dataset() const { return dataset_; }
  const DiscriminatorConfig& config() const { return config_; }

  Mlp& discriminator() { return discriminator_; }
  const Mlp& discriminator() const { return discriminator_; }
  DescriptorBuffer& buffer() { return buffer_; }
  const DescriptorBuffer& buffer() const { return buffer_; }
  RunningNormalizer& normalizer() { return normalizer_; }
  const RunningNormalizer& normalizer() const { return normalizer_; }
  const Adam& optimizer() const { return optimizer_; }

  // Discriminator input for raw descriptors (normalized when enabled).
  Matrix Prepare(const Matrix& raw) const;

  // Exactly 0 for data-free slots; softplus of the logit otherwise.
  double StyleReward(const TransitionDescriptor& descriptor) const;
  // Batched version over raw descriptor columns.
  Vector StyleRewards(const Matrix& raw) const;

  void PushPolicyDescriptor(std::span<const double> descriptor,
                            int source_style);
  void PushPolicyDescriptor(const TransitionDescriptor& descriptor) {
    PushPolicyDescriptor(descriptor.values, index_);
  }

  // Loss on raw descriptor batches. Throws DataFreeError on data-free slots.
  DiscriminatorLoss Loss(const Matrix& motion_raw, const Matrix& policy_raw,
                         double gp_weight) const;

  bool ReadyForUpdates(int batch_size) const {
    return !data_free() && buffer_.size() >= batch_size;
  }

  // n_updates optimizer steps on fresh K-sized samples from the dataset and
  // the policy buffer. Data-free slots are skipped (empty trace). Throws
  // WarmupError when the buffer holds fewer than K descriptors.
  std::vector<double> UpdateDiscriminator(int batch_size, int n_updates,
                                          Rng& rng);

  // Fraction of descriptors scored with the correct sign: motion samples
  // positive, policy samples negative.
  double Accuracy(const Matrix& motion_raw, const Matrix& policy_raw) const;

  void Save(BinaryWriter& out) const;
  void Load(BinaryReader& in);

 private:
  int index_;
  MotionDataset dataset_;
  double env_weight_;
  DiscriminatorConfig config_;
  Mlp discriminator_;
  Adam optimizer_;
  DescriptorBuffer buffer_;
  RunningNormalizer normalizer_;
};

}  // namespace mamp

#endif  // MULTIAMP_ADVERSARY_HPP_
