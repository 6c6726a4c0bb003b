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

#include <optional>
#include <string>
#include <sys/types.h>

namespace redforge {

// Child process running `/bin/sh -c command` with its standard streams
// attached. Standard error is drained while waiting on standard output and
// kept (last 64 KiB) for diagnostics.
class Subprocess {
 public:
  explicit Subprocess(const std::string& command);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  enum class ReadStatus { kLine, kTimeout, kClosed };
  struct ReadResult {
    ReadStatus status = ReadStatus::kClosed;
    std::string line;  // without the trailing newline
  };

  // False when the child has closed its input.
  bool write_line(const std::string& line);
  ReadResult read_line(double timeout_s);

  void close_stdin();
  void kill();
  // Waits up to timeout_s for the child to exit; returns the wait status.
  std::optional<int> wait(double timeout_s);
  bool running();

  const std::string& stderr_text() const { return stderr_; }
  pid_t pid() const { return pid_; }
  const std::string& command() const { return command_; }

 private:
  void drain_stderr();

  std::string command_;
  pid_t pid_ = -1;
  int in_fd_ = -1;   // our end of the child's stdin
  int out_fd_ = -1;  // child's stdout
  int err_fd_ = -1;  // child's stderr
  std::string out_buf_;
  std::string stderr_;
  std::optional<int> status_;
};

std::string describe_wait_status(int status);

}  // namespace redforge
