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

#include "multiamp/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "multiamp/errors.hpp"

namespace mamp {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::Stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x5eedu};
  Rng rng;
  rng.engine_.seed(seq);
  return rng;
}

double Rng::Uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::Uniform(double lo, double hi) {
  if (lo == hi) return lo;
  return lo + (hi - lo) * Uniform();
}

std::uint64_t Rng::UniformIndex(std::uint64_t n) {
  if (n == 0) throw ValidationError("UniformIndex: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::Normal() {
  // 1 - U lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::Serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::Deserialize(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) throw IncompatibleError("corrupt random-stream state");
}

}  // namespace mamp
