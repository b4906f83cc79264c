// The fixed runner program executed by the child interpreter. It reads one
// JSON job document on stdin and writes exactly one JSON result line to the
// original stdout; everything the executed code prints goes to /dev/null.
//
// Containment, enforced inside the child:
//   - filesystem writes outside the job working directory are denied
//   - socket creation is denied
//   - process creation (fork/exec/system/subprocess) is denied
//   - rlimit backstops for CPU time, file size and address space
// The parent still hard-kills the process group at the deadline, so a child
// that defeats the in-process timers cannot outlive wall_clock_ms + grace.

#include "codesynth/runner_py.hpp"

namespace codesynth {

const char* kRunnerProgram = R"PYRUNNER(
import sys, os, json, signal, time, resource

def main():
    raw = sys.stdin.buffer.read()
    job = json.loads(raw)
    mode = job["mode"]
    wall_ms = int(job.get("wall_clock_ms", 5000))

    # keep the protocol channel private: results go to the original stdout,
    # anything the executed code prints goes to /dev/null
    result_fd = os.dup(1)
    devnull = os.open(os.devnull, os.O_WRONLY)
    os.dup2(devnull, 1)
    os.close(devnull)

    workdir = os.path.realpath(os.getcwd())

    try:
        cpu = max(1, wall_ms // 1000 + 1)
        resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
        resource.setrlimit(resource.RLIMIT_FSIZE, (32 << 20, 32 << 20))
        resource.setrlimit(resource.RLIMIT_AS, (1 << 30, 1 << 30))
    except (ValueError, OSError):
        pass

    def _inside(path):
        p = os.path.realpath(os.path.abspath(os.fsdecode(path)))
        return p == workdir or p.startswith(workdir + os.sep) or p == os.devnull

    def _deny(event, args):
        if event == "open":
            path, fmode, flags = args[0], args[1], args[2]
            writes = False
            if isinstance(fmode, str) and any(c in fmode for c in "wax+"):
                writes = True
            if isinstance(flags, int) and (flags & (os.O_WRONLY | os.O_RDWR |
                                                    os.O_CREAT | os.O_TRUNC |
                                                    os.O_APPEND)):
                writes = True
            if writes and isinstance(path, (str, bytes)) and not _inside(path):
                raise RuntimeError("write outside working directory denied")
        elif event in ("os.remove", "os.unlink", "os.rename", "os.rmdir",
                       "os.mkdir", "os.link", "os.symlink", "os.truncate",
                       "shutil.rmtree", "shutil.move"):
            if args and isinstance(args[0], (str, bytes)) and not _inside(args[0]):
                raise RuntimeError("filesystem mutation outside working directory denied")
        elif event.startswith("socket."):
            raise RuntimeError("network access denied")
        elif event in ("os.fork", "os.forkpty", "os.posix_spawn", "os.spawn",
                       "os.exec", "os.system", "subprocess.Popen", "os.startfile"):
            raise RuntimeError("process creation denied")

    sys.addaudithook(_deny)

    deadline = time.monotonic() + wall_ms / 1000.0

    class StageTimeout(Exception):
        pass

    def _on_alarm(sig, frame):
        raise StageTimeout()

    signal.signal(signal.SIGALRM, _on_alarm)

    def run_with_deadline(fn):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise StageTimeout()
        signal.setitimer(signal.ITIMER_REAL, remaining)
        try:
            return fn()
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0)

    INT64_MIN, INT64_MAX = -(1 << 63), (1 << 63) - 1

    def _check_str(s):
        try:
            s.encode("utf-8")
        except UnicodeEncodeError:
            raise ValueError("string is not valid unicode")
        return s

    def encode(v):
        if v is None:
            return None
        if isinstance(v, bool):
            raise ValueError("bool is not an interchange type")
        if isinstance(v, int):
            if INT64_MIN <= v <= INT64_MAX:
                return v
            raise ValueError("integer exceeds the interchange range")
        if isinstance(v, str):
            return _check_str(v)
        if isinstance(v, list):
            if all(isinstance(e, int) and not isinstance(e, bool) and
                   INT64_MIN <= e <= INT64_MAX for e in v):
                return list(v)
            if all(isinstance(e, str) for e in v):
                return [_check_str(e) for e in v]
            raise ValueError("mixed or nested list")
        raise ValueError(type(v).__name__ + " is not an interchange type")

    def finish(obj):
        os.write(result_fd, (json.dumps(obj) + "\n").encode("utf-8"))
        os._exit(0)

    if mode == "trace":
        code, stages, inputs = job["code"], job["stages"], job["inputs"]
        ns = {}
        exec_timeout = False
        try:
            run_with_deadline(lambda: exec(compile(code, "<candidate>", "exec"), ns))
        except SyntaxError as e:
            finish({"status": "compile_error", "detail": str(e)[:300]})
        except StageTimeout:
            exec_timeout = True
        except BaseException as e:
            finish({"status": "compile_error",
                    "detail": type(e).__name__ + ": " + str(e)[:300]})

        traces = []
        job_timed_out = exec_timeout
        for v in inputs:
            if job_timed_out or time.monotonic() >= deadline:
                traces.append({"stages": [], "status": "TIMEOUT", "final": None})
                job_timed_out = True
                continue
            recs = []
            cur = v
            status = "OK"
            final = None
            completed = True
            for fname in stages:
                rec = {"fn": fname, "in": cur}
                try:
                    fn = ns.get(fname)
                    if fn is None:
                        raise NameError("name '%s' is not defined" % fname)
                    res = run_with_deadline(lambda: fn(cur))
                except StageTimeout:
                    rec["status"] = "TIMEOUT"
                    recs.append(rec)
                    status = "TIMEOUT"
                    job_timed_out = True
                    completed = False
                    break
                except BaseException as e:
                    rec["status"] = "RAISED"
                    rec["detail"] = type(e).__name__ + ": " + str(e)[:200]
                    recs.append(rec)
                    status = "RAISED"
                    completed = False
                    break
                try:
                    enc = encode(res)
                except ValueError as e:
                    finish({"status": "serialization_failure",
                            "detail": "stage %s: %s" % (fname, e)})
                rec["status"] = "OK"
                rec["out"] = enc
                recs.append(rec)
                cur = enc
            if completed:
                final = cur
            traces.append({"stages": recs, "status": status, "final": final})
        finish({"status": "ok", "traces": traces})

    elif mode == "judge":
        code, tests = job["code"], job["tests"]
        ns = {}
        total = len(tests)
        passed = 0
        detail = ""
        imported = True
        try:
            run_with_deadline(lambda: exec(compile(code, "<submission>", "exec"), ns))
        except StageTimeout:
            imported = False
            detail = "timeout while loading the submission"
        except BaseException as e:
            imported = False
            detail = "error at import time: " + type(e).__name__ + ": " + str(e)[:300]
        if imported:
            for t in tests:
                try:
                    run_with_deadline(lambda: exec(compile(t, "<test>", "exec"), ns))
                    passed += 1
                except StageTimeout:
                    detail = "timeout in: " + t[:240]
                    break
                except AssertionError:
                    detail = "assertion failed: " + t[:300]
                    break
                except BaseException as e:
                    detail = type(e).__name__ + ": " + str(e)[:160] + " in: " + t[:200]
                    break
        reward = 1 if (imported and total > 0 and passed == total) else 0
        finish({"status": "ok", "reward": reward, "tests_total": total,
                "tests_passed": passed, "failure_detail": detail})

    else:
        finish({"status": "bad_job", "detail": "unknown mode " + str(mode)})

main()
)PYRUNNER";

}  // namespace codesynth
