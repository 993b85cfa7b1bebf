// tlab/errors.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TLAB_ERRORS_HPP_
#define TLAB_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace tlab {

// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Broken preconditions: dimension mismatches, malformed configs,
// out-of-range parameters, missing pairings.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient. The message carries a
// diagnostic payload (stage, utterance, epoch) assembled at the throw site.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Filesystem and serialization failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint file with an unknown or incompatible format version.
class CheckpointVersionError : public IoError {
 public:
  using IoError::IoError;
};

// Checkpoint file that is truncated or structurally damaged.
class CheckpointCorruptError : public IoError {
 public:
  using IoError::IoError;
};

// Process exit codes used by the command line tools.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitValidation = 2,
  kExitDivergence = 3,
  kExitIo = 4,
};

}  // namespace tlab

#endif  // TLAB_ERRORS_HPP_
