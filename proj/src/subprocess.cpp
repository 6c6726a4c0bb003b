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

#include "redforge/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "redforge/error.hpp"

namespace redforge {

namespace {

constexpr std::size_t kStderrKeep = 64 * 1024;

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  const auto left =
      std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now())
          .count();
  return left < 0 ? 0 : static_cast<int>(left);
}

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

}  // namespace

Subprocess::Subprocess(const std::string& command) : command_(command) {
  // stdin is a socket so writes to a dead child fail with EPIPE instead of
  // raising SIGPIPE (send with MSG_NOSIGNAL).
  int in_pair[2];
  int out_pipe[2];
  int err_pipe[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0) {
    throw Error("socketpair failed: " + std::string(std::strerror(errno)));
  }
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    throw Error("pipe failed: " + std::string(std::strerror(errno)));
  }
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(in_pair[0]);
    ::close(in_pair[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw Error("pipe failed: " + std::string(std::strerror(errno)));
  }
  pid_ = ::fork();
  if (pid_ < 0) {
    throw Error("fork failed: " + std::string(std::strerror(errno)));
  }
  if (pid_ == 0) {
    ::dup2(in_pair[1], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pair[1]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  in_fd_ = in_pair[0];
  out_fd_ = out_pipe[0];
  err_fd_ = err_pipe[0];
  ::fcntl(err_fd_, F_SETFL, ::fcntl(err_fd_, F_GETFL) | O_NONBLOCK);
}

Subprocess::~Subprocess() {
  close_stdin();
  if (!wait(0.2)) {
    kill();
  }
  close_fd(out_fd_);
  close_fd(err_fd_);
}

bool Subprocess::write_line(const std::string& line) {
  if (in_fd_ < 0) return false;
  std::string data = line;
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n =
        ::send(in_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

void Subprocess::drain_stderr() {
  if (err_fd_ < 0) return;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(err_fd_, buf, sizeof buf);
    if (n > 0) {
      stderr_.append(buf, static_cast<std::size_t>(n));
      if (stderr_.size() > kStderrKeep) {
        stderr_.erase(0, stderr_.size() - kStderrKeep);
      }
      continue;
    }
    if (n == 0) close_fd(err_fd_);
    return;
  }
}

Subprocess::ReadResult Subprocess::read_line(double timeout_s) {
  const auto deadline =
      Clock::now() + std::chrono::microseconds(static_cast<long long>(timeout_s * 1e6));
  for (;;) {
    const auto nl = out_buf_.find('\n');
    if (nl != std::string::npos) {
      ReadResult r{ReadStatus::kLine, out_buf_.substr(0, nl)};
      out_buf_.erase(0, nl + 1);
      return r;
    }
    if (out_fd_ < 0) {
      drain_stderr();
      return {ReadStatus::kClosed, {}};
    }
    pollfd fds[2] = {{out_fd_, POLLIN, 0}, {err_fd_, POLLIN, 0}};
    const int wait_ms = remaining_ms(deadline);
    const int rc = ::poll(fds, err_fd_ >= 0 ? 2 : 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error("poll failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) {
      drain_stderr();
      return {ReadStatus::kTimeout, {}};
    }
    if (err_fd_ >= 0 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr();
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[65536];
      const ssize_t n = ::read(out_fd_, buf, sizeof buf);
      if (n > 0) {
        out_buf_.append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        close_fd(out_fd_);
      }
    }
  }
}

void Subprocess::close_stdin() { close_fd(in_fd_); }

void Subprocess::kill() {
  if (pid_ > 0 && !status_) {
    ::kill(pid_, SIGKILL);
    wait(5.0);
  }
}

std::optional<int> Subprocess::wait(double timeout_s) {
  if (status_) return status_;
  if (pid_ <= 0) return std::nullopt;
  const auto deadline =
      Clock::now() + std::chrono::microseconds(static_cast<long long>(timeout_s * 1e6));
  for (;;) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      status_ = status;
      drain_stderr();
      return status_;
    }
    if (r < 0 && errno != EINTR) return std::nullopt;
    if (Clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

bool Subprocess::running() { return !wait(0.0); }

std::string describe_wait_status(int status) {
  if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
  if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
  return "status " + std::to_string(status);
}

}  // namespace redforge
