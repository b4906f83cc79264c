#include "codesynth/service.hpp"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "codesynth/errors.hpp"

namespace codesynth {

namespace {

// FIFO admission gate: at most pool_size jobs run, at most queue_bound wait.
class Gate {
 public:
  Gate(size_t pool, size_t bound) : pool_(pool), bound_(bound) {}

  bool try_enter() {
    std::unique_lock<std::mutex> lk(mu_);
    if (waiting_.size() >= bound_) return false;
    const uint64_t ticket = next_ticket_++;
    waiting_.push_back(ticket);
    cv_.wait(lk, [&] {
      return waiting_.front() == ticket && running_ < pool_;
    });
    waiting_.pop_front();
    ++running_;
    cv_.notify_all();  // wake the next ticket behind us
    return true;
  }

  void leave() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      --running_;
    }
    cv_.notify_all();
  }

  size_t depth() const {
    std::lock_guard<std::mutex> lk(mu_);
    return waiting_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<uint64_t> waiting_;
  uint64_t next_ticket_ = 0;
  size_t running_ = 0;
  const size_t pool_;
  const size_t bound_;
};

JudgeRequest parse_request(const std::string& body, size_t max_code_bytes) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed request body: ") + e.what());
  }
  JudgeRequest req;
  if (!j.contains("code") || !j["code"].is_string())
    throw ValidationError("missing code field");
  req.code = j["code"].get<std::string>();
  if (req.code.size() > max_code_bytes)
    throw ValidationError("code exceeds " + std::to_string(max_code_bytes) +
                          " bytes");
  if (!j.contains("tests") || !j["tests"].is_array() || j["tests"].empty())
    throw ValidationError("tests must be a non-empty array");
  for (const auto& t : j["tests"]) {
    if (!t.is_string()) throw ValidationError("tests entries must be strings");
    req.tests.push_back(t.get<std::string>());
  }
  if (j.contains("limits") && j["limits"].is_object() &&
      j["limits"].contains("wall_clock_ms"))
    req.wall_clock_ms = j["limits"]["wall_clock_ms"].get<int64_t>();
  return req;
}

}  // namespace

struct JudgeService::Impl {
  explicit Impl(ServicePolicy p)
      : policy(std::move(p)),
        gate(policy.pool_size, policy.effective_queue_bound()),
        sandbox() {}

  ServicePolicy policy;
  Gate gate;
  SandboxRunner sandbox;
  httplib::Server server;
  std::thread serve_thread;
  int bound_port = -1;
};

JudgeService::JudgeService(ServicePolicy policy)
    : impl_(std::make_unique<Impl>(std::move(policy))) {
  auto& srv = impl_->server;
  // enough handler threads that queued requests can block in the gate
  const size_t handlers =
      impl_->policy.pool_size + impl_->policy.effective_queue_bound() + 4;
  srv.new_task_queue = [handlers] {
    return new httplib::ThreadPool(handlers);
  };

  srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    Json j;
    j["status"] = "ok";
    j["queue_depth"] = impl_->gate.depth();
    j["pool_size"] = impl_->policy.pool_size;
    res.set_content(j.dump(), "application/json");
  });

  srv.Post("/judge", [this](const httplib::Request& req,
                            httplib::Response& res) {
    JudgeRequest jr;
    try {
      jr = parse_request(req.body, impl_->policy.max_code_bytes);
    } catch (const ValidationError& e) {
      Json j;
      j["error"] = e.what();
      res.status = 400;
      res.set_content(j.dump(), "application/json");
      return;
    }
    if (!impl_->gate.try_enter()) {
      Json j;
      j["error"] = "queue full, retry later";
      res.status = 429;
      res.set_header("Retry-After", "1");
      res.set_content(j.dump(), "application/json");
      return;
    }
    try {
      JudgeResult out = handle_judge(jr);
      Json j;
      j["reward"] = out.reward;
      j["tests_total"] = out.tests_total;
      j["tests_passed"] = out.tests_passed;
      j["failure_detail"] = out.failure_detail;
      j["duration_ms"] = static_cast<int64_t>(out.duration_ms);
      res.set_content(j.dump(), "application/json");
    } catch (const Error& e) {
      Json j;
      j["error"] = e.what();
      res.status = 500;
      res.set_content(j.dump(), "application/json");
    }
    impl_->gate.leave();
  });
}

JudgeService::~JudgeService() { stop(); }

int JudgeService::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    impl_->bound_port = srv.bind_to_any_port(host);
    if (impl_->bound_port < 0) throw BindFailureError(host + ":0");
  } else {
    if (!srv.bind_to_port(host, port))
      throw BindFailureError(host + ":" + std::to_string(port));
    impl_->bound_port = port;
  }
  impl_->serve_thread = std::thread([this] {
    impl_->server.listen_after_bind();
  });
  srv.wait_until_ready();
  return impl_->bound_port;
}

void JudgeService::stop() {
  if (impl_->serve_thread.joinable()) {
    impl_->server.stop();
    impl_->serve_thread.join();
  }
}

int JudgeService::port() const { return impl_->bound_port; }

size_t JudgeService::queue_depth() const { return impl_->gate.depth(); }

const ServicePolicy& JudgeService::policy() const { return impl_->policy; }

JudgeResult JudgeService::handle_judge(const JudgeRequest& req) const {
  if (req.tests.empty()) throw ValidationError("tests must be non-empty");
  if (req.code.size() > impl_->policy.max_code_bytes)
    throw ValidationError("code too large");
  ExecLimits limits = impl_->policy.default_limits;
  if (req.wall_clock_ms)
    limits.wall_clock_ms =
        std::min<int64_t>(*req.wall_clock_ms, impl_->policy.wall_clock_cap_ms);
  return impl_->sandbox.run_unit_tests(req.code, req.tests, limits);
}

}  // namespace codesynth
