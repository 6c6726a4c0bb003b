// Copyright (c) 2026 The redforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace redforge {

// Process exit codes used by the command line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kStage = 3,
  kProtocol = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const { return ExitCode::kStage; }
};

// A value violates a documented domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kConfig; }
};

// Malformed or invalid manifest content; line is 1-based, 0 when unknown.
class ManifestError : public Error {
 public:
  ManifestError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kProtocol; }
};

// A pipeline stage failed on a specific item.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& item,
             const std::string& what)
      : Error("stage '" + stage + "' failed on '" + item + "': " + what),
        stage_(stage),
        item_(item) {}
  const std::string& stage() const { return stage_; }
  const std::string& item() const { return item_; }

 private:
  std::string stage_;
  std::string item_;
};

}  // namespace redforge
