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

#ifndef MULTIAMP_RNG_HPP_
#define MULTIAMP_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>

namespace mamp {

// Seeded random stream. Uniform and normal draws are implemented on top of
// the raw 64-bit engine so that sequences do not depend on the standard
// library's distribution implementations and carry no hidden cached state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  // Independent stream derived from (seed, stream index).
  static Rng Stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform();
  // Uniform in [lo, hi). Returns lo when lo == hi.
  double Uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t UniformIndex(std::uint64_t n);
  // Standard normal via Box-Muller, one value per call.
  double Normal();
  bool Bernoulli(double p) { return Uniform() < p; }

  // Text form of the full engine state.
  std::string Serialize() const;
  void Deserialize(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mamp

#endif  // MULTIAMP_RNG_HPP_
