// Copyright 2026 The esdd Authors
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

#include "esdd/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "esdd/error.hpp"

namespace esdd {
namespace {

using Clock = std::chrono::steady_clock;

std::vector<char*> c_argv(const std::vector<std::string>& argv) {
  std::vector<char*> out;
  for (const auto& a : argv) out.push_back(const_cast<char*>(a.c_str()));
  out.push_back(nullptr);
  return out;
}

int remaining_ms(Clock::time_point deadline, bool bounded) {
  if (!bounded) return -1;
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

int decode_status(int status) {
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

// Spawns argv with the three standard streams redirected to fresh pipes.
int spawn(const std::vector<std::string>& argv, int* in_w, int* out_r, int* err_r) {
  if (argv.empty()) fail(ErrorKind::Argument, "empty command");
  int in_p[2], out_p[2], err_p[2] = {-1, -1};
  if (pipe(in_p) || pipe(out_p) || (err_r && pipe(err_p))) {
    fail(ErrorKind::Io, std::string("pipe: ") + std::strerror(errno));
  }
  pid_t pid = fork();
  if (pid < 0) fail(ErrorKind::Io, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_p[0], 0);
    dup2(out_p[1], 1);
    if (err_r) dup2(err_p[1], 2);
    close(in_p[0]); close(in_p[1]); close(out_p[0]); close(out_p[1]);
    if (err_r) { close(err_p[0]); close(err_p[1]); }
    auto args = c_argv(argv);
    execvp(args[0], args.data());
    std::fprintf(stderr, "exec %s: %s\n", args[0], std::strerror(errno));
    _exit(127);
  }
  close(in_p[0]);
  close(out_p[1]);
  if (err_r) close(err_p[1]);
  *in_w = in_p[1];
  *out_r = out_p[0];
  if (err_r) *err_r = err_p[0];
  return pid;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input,
                          double timeout_s) {
  signal(SIGPIPE, SIG_IGN);
  int in_w, out_r, err_r;
  pid_t pid = spawn(argv, &in_w, &out_r, &err_r);
  ProcessResult result;
  const bool bounded = timeout_s > 0;
  const auto deadline = Clock::now() + std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));

  std::size_t written = 0;
  if (input.empty()) {
    close(in_w);
    in_w = -1;
  } else {
    fcntl(in_w, F_SETFL, O_NONBLOCK);
  }
  bool out_open = true, err_open = true;
  char buf[4096];
  while (out_open || err_open) {
    pollfd fds[3];
    int n = 0;
    int out_i = -1, err_i = -1, in_i = -1;
    if (out_open) { fds[n] = {out_r, POLLIN, 0}; out_i = n++; }
    if (err_open) { fds[n] = {err_r, POLLIN, 0}; err_i = n++; }
    if (in_w >= 0) { fds[n] = {in_w, POLLOUT, 0}; in_i = n++; }
    int rc = poll(fds, n, remaining_ms(deadline, bounded));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) {
      result.timed_out = true;
      kill(pid, SIGKILL);
      break;
    }
    auto drain = [&](int idx, int fd, std::string& sink, bool& open) {
      if (idx < 0 || !(fds[idx].revents & (POLLIN | POLLHUP | POLLERR))) return;
      ssize_t got = read(fd, buf, sizeof(buf));
      if (got > 0) sink.append(buf, static_cast<std::size_t>(got));
      else open = false;
    };
    drain(out_i, out_r, result.out, out_open);
    drain(err_i, err_r, result.err, err_open);
    if (in_i >= 0 && (fds[in_i].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t put = write(in_w, input.data() + written, input.size() - written);
      if (put > 0) written += static_cast<std::size_t>(put);
      if (put < 0 || written == input.size()) {
        close(in_w);
        in_w = -1;
      }
    }
  }
  if (in_w >= 0) close(in_w);
  close(out_r);
  close(err_r);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = decode_status(status);
  return result;
}

LineProcess::LineProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {}

LineProcess::~LineProcess() { stop(); }

void LineProcess::start() {
  signal(SIGPIPE, SIG_IGN);
  pid_ = spawn(argv_, &to_child_, &from_child_, nullptr);
  pending_.clear();
}

void LineProcess::stop() {
  if (pid_ < 0) return;
  close(to_child_);
  close(from_child_);
  kill(pid_, SIGTERM);
  int status;
  waitpid(pid_, &status, 0);
  pid_ = -1;
}

std::string LineProcess::exchange(std::string_view line, double timeout_s) {
  if (pid_ < 0) start();
  std::string msg(line);
  msg.push_back('\n');
  std::size_t off = 0;
  while (off < msg.size()) {
    ssize_t put = write(to_child_, msg.data() + off, msg.size() - off);
    if (put < 0) {
      if (errno == EINTR) continue;
      stop();
      fail(ErrorKind::Io, "subprocess closed its input");
    }
    off += static_cast<std::size_t>(put);
  }
  const bool bounded = timeout_s > 0;
  const auto deadline = Clock::now() + std::chrono::milliseconds(static_cast<long>(timeout_s * 1000));
  char buf[4096];
  while (true) {
    auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return reply;
    }
    pollfd fd{from_child_, POLLIN, 0};
    int rc = poll(&fd, 1, remaining_ms(deadline, bounded));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) {
      stop();
      fail(ErrorKind::Io, "subprocess reply timed out");
    }
    ssize_t got = read(from_child_, buf, sizeof(buf));
    if (got <= 0) {
      stop();
      fail(ErrorKind::Io, "subprocess exited before replying");
    }
    pending_.append(buf, static_cast<std::size_t>(got));
  }
}

}  // namespace esdd
