#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "codesynth/sandbox.hpp"

namespace codesynth {

struct JudgeRequest {
  std::string code;
  std::vector<std::string> tests;
  std::optional<int64_t> wall_clock_ms;  // capped by server policy
};

struct ServicePolicy {
  size_t pool_size = 8;
  size_t queue_bound = 0;            // 0 = 4 * pool_size
  size_t max_code_bytes = 256 * 1024;
  int64_t wall_clock_cap_ms = 30000;
  ExecLimits default_limits;

  size_t effective_queue_bound() const {
    return queue_bound == 0 ? pool_size * 4 : queue_bound;
  }
};

// HTTP judge service:
//   POST /judge  {code, tests: [..], limits?: {wall_clock_ms?}}
//                -> {reward, tests_total, tests_passed, failure_detail,
//                    duration_ms}
//   GET  /health -> {status, queue_depth, pool_size}
// Requests beyond the queue bound get 429 with a Retry-After hint.
class JudgeService {
 public:
  explicit JudgeService(ServicePolicy policy = {});
  ~JudgeService();

  JudgeService(const JudgeService&) = delete;
  JudgeService& operator=(const JudgeService&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Throws BindFailureError. Returns the bound port.
  int start(const std::string& host, int port);

  // Stops accepting and drains in-flight jobs.
  void stop();

  int port() const;
  size_t queue_depth() const;

  // The same judgement a local run_unit_tests call would produce; used by
  // the HTTP handler and directly by tests. Throws ValidationError.
  JudgeResult handle_judge(const JudgeRequest& req) const;

  const ServicePolicy& policy() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace codesynth
