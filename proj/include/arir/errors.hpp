/*
Copyright 2026 The arir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef ARIR_ERRORS_HPP_
#define ARIR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace arir {

// Error classes. Each maps to a distinct process exit status in the CLI.
enum class ErrorKind {
  kConfig = 2,
  kUnsupportedInput = 3,
  kLoad = 4,
  kNoDirectSound = 5,
  kGeometry = 6,
  kRateMismatch = 7,
  kTrajectory = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

struct UnsupportedInputError : Error {
  explicit UnsupportedInputError(const std::string& what)
      : Error(ErrorKind::kUnsupportedInput, what) {}
};

struct NoDirectSoundError : Error {
  explicit NoDirectSoundError(const std::string& what)
      : Error(ErrorKind::kNoDirectSound, what) {}
};

struct GeometryError : Error {
  explicit GeometryError(const std::string& what)
      : Error(ErrorKind::kGeometry, what) {}
};

struct RateMismatchError : Error {
  explicit RateMismatchError(const std::string& what)
      : Error(ErrorKind::kRateMismatch, what) {}
};

struct TrajectoryError : Error {
  explicit TrajectoryError(const std::string& what)
      : Error(ErrorKind::kTrajectory, what) {}
};

// File loading failures. The reason distinguishes the cases callers and tests
// care about without a class per format quirk.
enum class LoadFailure {
  kOpen,
  kMalformedHeader,
  kUnsupportedFormat,
  kChannelCount,
  kVersion,
  kChecksum,
  kInvariant,
};

class LoadError : public Error {
 public:
  LoadError(LoadFailure failure, const std::string& what)
      : Error(ErrorKind::kLoad, what), failure_(failure) {}

  LoadFailure failure() const { return failure_; }

 private:
  LoadFailure failure_;
};

}  // namespace arir

#endif  // ARIR_ERRORS_HPP_
