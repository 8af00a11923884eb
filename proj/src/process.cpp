#include "seqstory/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "seqstory/error.hpp"

extern char** environ;

namespace seqstory {

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fd, O_CLOEXEC) != 0) throw PipelineError("pipe() failed");
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  void close_read() {
    if (fd[0] >= 0) ::close(fd[0]);
    fd[0] = -1;
  }
  void close_write() {
    if (fd[1] >= 0) ::close(fd[1]);
    fd[1] = -1;
  }
};

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, std::string_view input) {
  if (argv.empty()) throw PipelineError("empty command");
  Pipe in, out, err;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.fd[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.fd[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err.fd[1], STDERR_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    throw PipelineError(
        fmt::format("cannot start '{}': {}", argv[0], std::strerror(rc)));
  }
  in.close_read();
  out.close_write();
  err.close_write();

  // A child that exits without reading stdin must not kill us.
  ::signal(SIGPIPE, SIG_IGN);

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) in.close_write();
  else ::fcntl(in.fd[1], F_SETFL, ::fcntl(in.fd[1], F_GETFL) | O_NONBLOCK);

  std::array<char, 65536> buf{};
  while (out.fd[0] >= 0 || err.fd[0] >= 0) {
    std::array<pollfd, 3> fds{};
    nfds_t n = 0;
    int out_slot = -1, err_slot = -1, in_slot = -1;
    if (out.fd[0] >= 0) { fds[n] = {out.fd[0], POLLIN, 0}; out_slot = static_cast<int>(n++); }
    if (err.fd[0] >= 0) { fds[n] = {err.fd[0], POLLIN, 0}; err_slot = static_cast<int>(n++); }
    if (in.fd[1] >= 0) { fds[n] = {in.fd[1], POLLOUT, 0}; in_slot = static_cast<int>(n++); }
    if (::poll(fds.data(), n, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    auto drain = [&](int slot, Pipe& p, std::string& sink) {
      if (slot < 0 || fds[slot].revents == 0) return;
      ssize_t got = ::read(p.fd[0], buf.data(), buf.size());
      if (got > 0) {
        sink.append(buf.data(), static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        p.close_read();
      }
    };
    drain(out_slot, out, result.out);
    drain(err_slot, err, result.err);
    if (in_slot >= 0 && fds[in_slot].revents != 0) {
      if (fds[in_slot].revents & (POLLERR | POLLHUP)) {
        in.close_write();
      } else {
        ssize_t put = ::write(in.fd[1], input.data() + written, input.size() - written);
        if (put > 0) written += static_cast<std::size_t>(put);
        else if (errno != EINTR && errno != EAGAIN) in.close_write();
        if (written == input.size()) in.close_write();
      }
    }
  }
  in.close_write();

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw PipelineError("waitpid failed");
  }
  if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  return result;
}

}  // namespace seqstory
