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

#ifndef MULTIAMP_BINARY_IO_HPP_
#define MULTIAMP_BINARY_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mamp {

// Raw little-endian writer used by the checkpoint formats. Doubles are
// written as their 64-bit patterns, so round trips are bit-exact.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void Magic(std::string_view magic);
  void U32(std::uint32_t v);
  void U64(std::uint64_t v);
  void I64(std::int64_t v);
  void F64(double v);
  void String(std::string_view s);
  void Doubles(std::span<const double> values);

 private:
  void Raw(const void* data, std::size_t size);
  std::ostream& out_;
};

// Reader counterpart. Any short read or mismatch raises IncompatibleError.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  void ExpectMagic(std::string_view magic, std::string_view what);
  std::uint32_t U32();
  std::uint64_t U64();
  std::int64_t I64();
  double F64();
  std::string String();
  std::vector<double> Doubles();
  // Reads a length-prefixed vector into a destination of known size.
  void DoublesInto(std::span<double> dest);

 private:
  void Raw(void* data, std::size_t size);
  std::istream& in_;
};

}  // namespace mamp

#endif  // MULTIAMP_BINARY_IO_HPP_
