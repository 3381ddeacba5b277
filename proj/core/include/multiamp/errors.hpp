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

#ifndef MULTIAMP_ERRORS_HPP_
#define MULTIAMP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mamp {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration (bad shapes, out-of-range indices, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A state or clip does not match the declared field layout.
class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite values appeared during training or simulation.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or blob written by an incompatible version or configuration.
class IncompatibleError : public Error {
 public:
  using Error::Error;
};

// Sampling requested from a style slot that has no motion data.
class DataFreeError : public Error {
 public:
  using Error::Error;
};

// Policy-side buffer does not yet hold enough descriptors.
class WarmupError : public Error {
 public:
  using Error::Error;
};

}  // namespace mamp

#endif  // MULTIAMP_ERRORS_HPP_
