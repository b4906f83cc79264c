#include "codesynth/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>

#include "codesynth/errors.hpp"

namespace codesynth {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct Pipe {
  int rd = -1, wr = -1;
  Pipe() {
    int fds[2];
    // O_CLOEXEC matters: children spawned concurrently from other threads
    // must not inherit this pipe, or its EOF would wait for them too
    if (::pipe2(fds, O_CLOEXEC) != 0)
      throw SandboxSpawnError(std::string("pipe: ") + std::strerror(errno));
    rd = fds[0];
    wr = fds[1];
  }
  ~Pipe() {
    close_rd();
    close_wr();
  }
  void close_rd() {
    if (rd >= 0) ::close(rd);
    rd = -1;
  }
  void close_wr() {
    if (wr >= 0) ::close(wr);
    wr = -1;
  }
};

void set_nonblock(int fd) {
  int fl = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, fl | O_NONBLOCK);
}

int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Reads until EAGAIN/EOF. Returns false once the pipe is exhausted (closed).
void drain_pipe(Pipe& p, std::string& sink, size_t cap, bool* truncated) {
  char buf[8192];
  while (p.rd >= 0) {
    ssize_t n = ::read(p.rd, buf, sizeof(buf));
    if (n > 0) {
      if (sink.size() < cap) {
        size_t take = std::min(static_cast<size_t>(n), cap - sink.size());
        sink.append(buf, take);
        if (take < static_cast<size_t>(n) && truncated) *truncated = true;
      } else if (truncated) {
        *truncated = true;
      }
      continue;
    }
    if (n == 0) p.close_rd();  // EOF
    break;                     // EOF, EAGAIN or error
  }
}

}  // namespace

SpawnResult run_process(const SpawnOptions& opts) {
  if (opts.argv.empty()) throw SandboxSpawnError("empty argv");
  ignore_sigpipe_once();

  Pipe in, out, err;
  const int64_t t0 = now_ms();

  pid_t pid = ::fork();
  if (pid < 0)
    throw SandboxSpawnError(std::string("fork: ") + std::strerror(errno));

  if (pid == 0) {
    // child: own process group so the parent can kill the whole tree
    ::setpgid(0, 0);
    ::dup2(in.rd, STDIN_FILENO);
    ::dup2(out.wr, STDOUT_FILENO);
    ::dup2(err.wr, STDERR_FILENO);
    in.close_rd();
    in.close_wr();
    out.close_rd();
    out.close_wr();
    err.close_rd();
    err.close_wr();
    if (!opts.working_dir.empty() && ::chdir(opts.working_dir.c_str()) != 0)
      ::_exit(126);
    std::vector<char*> argv;
    for (const auto& a : opts.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }

  ::setpgid(pid, pid);  // may lose the race with the child; both set it
  in.close_rd();
  out.close_wr();
  err.close_wr();
  set_nonblock(in.wr);
  set_nonblock(out.rd);
  set_nonblock(err.rd);

  SpawnResult res;
  size_t stdin_off = 0;
  bool killed = false;
  int64_t killed_at = 0;
  const int64_t deadline = t0 + opts.deadline_ms;

  while (in.wr >= 0 || out.rd >= 0 || err.rd >= 0) {
    // pipes can stay open if a process escaped the group; don't wait forever
    if (killed && now_ms() - killed_at > 2000) break;
    struct pollfd fds[3];
    int nfds = 0;
    int idx_in = -1, idx_out = -1, idx_err = -1;
    if (in.wr >= 0) {
      idx_in = nfds;
      fds[nfds++] = {in.wr, POLLOUT, 0};
    }
    if (out.rd >= 0) {
      idx_out = nfds;
      fds[nfds++] = {out.rd, POLLIN, 0};
    }
    if (err.rd >= 0) {
      idx_err = nfds;
      fds[nfds++] = {err.rd, POLLIN, 0};
    }

    int64_t remain = deadline - now_ms();
    if (remain <= 0) {
      if (!killed) {
        ::kill(-pid, SIGKILL);
        killed = true;
        killed_at = now_ms();
        res.timed_out = true;
      }
      remain = 50;  // drain whatever is left after the kill
    }
    int rc = ::poll(fds, static_cast<nfds_t>(nfds),
                    static_cast<int>(std::min<int64_t>(remain, 200)));
    if (rc < 0 && errno != EINTR) break;

    if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (stdin_off >= opts.stdin_data.size() ||
          (fds[idx_in].revents & (POLLERR | POLLHUP))) {
        in.close_wr();
      } else {
        ssize_t n = ::write(in.wr, opts.stdin_data.data() + stdin_off,
                            opts.stdin_data.size() - stdin_off);
        if (n > 0)
          stdin_off += static_cast<size_t>(n);
        else if (n < 0 && errno != EAGAIN && errno != EINTR)
          in.close_wr();
        if (stdin_off >= opts.stdin_data.size()) in.close_wr();
      }
    }
    if (idx_out >= 0 && (fds[idx_out].revents & (POLLIN | POLLHUP | POLLERR)))
      drain_pipe(out, res.out, opts.max_stdout_bytes, &res.stdout_truncated);
    if (idx_err >= 0 && (fds[idx_err].revents & (POLLIN | POLLHUP | POLLERR)))
      drain_pipe(err, res.err, opts.max_stderr_bytes, nullptr);
  }

  // reap, enforcing the deadline if the child ignores pipe closure
  int status = 0;
  while (true) {
    pid_t w = ::waitpid(pid, &status, WNOHANG);
    if (w == pid) break;
    if (w < 0 && errno != EINTR) break;
    if (now_ms() > deadline && !killed) {
      ::kill(-pid, SIGKILL);
      killed = true;
      killed_at = now_ms();
      res.timed_out = true;
    }
    if (killed && now_ms() - killed_at > 5000) break;  // unreapable child
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  if (killed) ::kill(-pid, SIGKILL);  // sweep stragglers in the group

  if (WIFEXITED(status))
    res.exit_code = WEXITSTATUS(status);
  else if (WIFSIGNALED(status))
    res.signal = WTERMSIG(status);
  res.duration_ms = static_cast<double>(now_ms() - t0);
  return res;
}

}  // namespace codesynth
