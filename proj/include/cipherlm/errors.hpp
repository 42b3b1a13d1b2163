// Copyright 2026 The cipherlm Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace cipherlm {

/// Root of every exception thrown by the library. Messages never contain
/// passkey bytes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (bad magic, truncation, duplicate tokens, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Objects that are individually valid but do not fit together.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters: empty passkey, nglide == 0, bad dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Reflection normal too close to zero for the reflection to be defined.
class DegenerateAxisError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class AdaptationError : public Error {
 public:
  using Error::Error;
};

/// Client and server disagree about the token stream or wire payload.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

class StartupError : public Error {
 public:
  using Error::Error;
};

}  // namespace cipherlm
