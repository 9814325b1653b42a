// Copyright 2026 The antforge Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace antforge {

// Root of every error thrown by the library. The CLI maps subclasses onto
// process exit codes (config 2, data 3, everything else 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid architecture, hyperparameter, or config file content.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad argument values handed to an operation (labels out of range, zero
// direction vectors, empty batches).
class InputError : public Error {
 public:
  using Error::Error;
};

// Misuse of a stateful object, e.g. running backward twice on one tape.
class StateError : public Error {
 public:
  using Error::Error;
};

// Dataset files: missing, malformed, or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

class WrongMagicError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedDataError : public DataError {
 public:
  using DataError::DataError;
};

class CountMismatchError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

class FingerprintMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class TruncatedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace antforge
