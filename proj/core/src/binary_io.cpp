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

#include "multiamp/binary_io.hpp"

#include <bit>
#include <istream>
#include <ostream>

#include "multiamp/errors.hpp"

namespace mamp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {
// Guards against allocating absurd sizes from a corrupt length prefix.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;
}  // namespace

void BinaryWriter::Raw(const void* data, std::size_t size) {
  out_.write(static_cast<const char*>(data),
             static_cast<std::streamsize>(size));
  if (!out_) throw IoError("binary write failed");
}

void BinaryWriter::Magic(std::string_view magic) {
  Raw(magic.data(), magic.size());
}
void BinaryWriter::U32(std::uint32_t v) { Raw(&v, sizeof(v)); }
void BinaryWriter::U64(std::uint64_t v) { Raw(&v, sizeof(v)); }
void BinaryWriter::I64(std::int64_t v) { Raw(&v, sizeof(v)); }
void BinaryWriter::F64(double v) { Raw(&v, sizeof(v)); }

void BinaryWriter::String(std::string_view s) {
  U64(s.size());
  Raw(s.data(), s.size());
}

void BinaryWriter::Doubles(std::span<const double> values) {
  U64(values.size());
  Raw(values.data(), values.size_bytes());
}

void BinaryReader::Raw(void* data, std::size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in_.gcount() != static_cast<std::streamsize>(size)) {
    throw IncompatibleError("unexpected end of binary data");
  }
}

void BinaryReader::ExpectMagic(std::string_view magic, std::string_view what) {
  std::string got(magic.size(), '\0');
  in_.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (in_.gcount() != static_cast<std::streamsize>(got.size()) ||
      got != magic) {
    throw IncompatibleError("not a " + std::string(what) +
                            " (bad magic header)");
  }
}

std::uint32_t BinaryReader::U32() {
  std::uint32_t v;
  Raw(&v, sizeof(v));
  return v;
}
std::uint64_t BinaryReader::U64() {
  std::uint64_t v;
  Raw(&v, sizeof(v));
  return v;
}
std::int64_t BinaryReader::I64() {
  std::int64_t v;
  Raw(&v, sizeof(v));
  return v;
}
double BinaryReader::F64() {
  double v;
  Raw(&v, sizeof(v));
  return v;
}

std::string BinaryReader::String() {
  const std::uint64_t n = U64();
  if (n > kMaxElements) throw IncompatibleError("corrupt string length");
  std::string s(n, '\0');
  Raw(s.data(), n);
  return s;
}

std::vector<double> BinaryReader::Doubles() {
  const std::uint64_t n = U64();
  if (n > kMaxElements) throw IncompatibleError("corrupt array length");
  std::vector<double> v(n);
  Raw(v.data(), n * sizeof(double));
  return v;
}

void BinaryReader::DoublesInto(std::span<double> dest) {
  const std::uint64_t n = U64();
  if (n != dest.size()) {
    throw IncompatibleError("array length " + std::to_string(n) +
                            " does not match expected " +
                            std::to_string(dest.size()));
  }
  Raw(dest.data(), dest.size_bytes());
}

}  // namespace mamp
