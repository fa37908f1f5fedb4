#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "carbonsched/errors.hpp"
#include "carbonsched/service.hpp"

namespace carbonsched {

// HTTP front of the demo service. GET /avg returns {"value": N}; an optional
// force parameter overrides the scheduled strategy. The schedule file is
// re-read when its mtime changes, checked at most once per second, and
// swapped in as a whole so no request sees a half-loaded schedule.
class AvgService {
public:
  AvgService(std::vector<std::int64_t> dataset, std::filesystem::path schedule_path)
      : dataset_(std::move(dataset)), schedule_path_(std::move(schedule_path)) {
    if (dataset_.empty()) throw ValidationError("service dataset is empty");
    reload_schedule();
  }

  // Pure request core, also used directly by tests: returns (status, body).
  std::pair<int, std::string> handle_avg(const std::optional<std::string>& force, TimeOfDay now) {
    std::shared_ptr<const ScheduleFile> schedule = snapshot();
    std::string name;
    try {
      name = lookup_strategy(*schedule, now, force);
    } catch (const ValidationError& e) {
      if (force) return {400, error_body(e.what())};
      return {500, error_body(e.what())};
    }
    int step = 0;
    try {
      step = strategy_step(name);
    } catch (const ValidationError& e) {
      return {500, error_body(e.what())};  // schedule names a strategy we do not serve
    }
    nlohmann::json body;
    body["value"] = approx_average(dataset_, step);
    return {200, body.dump()};
  }

  void install_routes(httplib::Server& server) {
    server.Get("/avg", [this](const httplib::Request& req, httplib::Response& res) {
      maybe_reload();
      std::optional<std::string> force;
      if (req.has_param("force")) force = req.get_param_value("force");
      auto [status, body] = handle_avg(force, current_time_of_day());
      res.status = status;
      res.set_content(body, "application/json");
    });
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.status = 200;
      res.set_content("ok", "text/plain");
    });
  }

  std::shared_ptr<const ScheduleFile> snapshot() {
    std::lock_guard<std::mutex> lock(mutex_);
    return schedule_;
  }

  void reload_schedule() {
    auto fresh = std::make_shared<const ScheduleFile>(load_schedule(schedule_path_));
    for (const auto& name : fresh->entries) strategy_step(name);
    std::lock_guard<std::mutex> lock(mutex_);
    schedule_ = std::move(fresh);
    mtime_ = std::filesystem::last_write_time(schedule_path_);
  }

  void maybe_reload() {
    using clock = std::chrono::steady_clock;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      const auto now = clock::now();
      if (now - last_check_ < std::chrono::seconds(1)) return;
      last_check_ = now;
    }
    std::error_code ec;
    const auto mtime = std::filesystem::last_write_time(schedule_path_, ec);
    if (ec) return;  // keep serving the last good schedule
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (mtime == mtime_) return;
    }
    try {
      reload_schedule();
    } catch (const Error&) {
      // Malformed rewrite in progress; retry on a later request.
    }
  }

private:
  static std::string error_body(const std::string& message) {
    nlohmann::json body;
    body["error"] = message;
    return body.dump();
  }

  std::vector<std::int64_t> dataset_;
  std::filesystem::path schedule_path_;
  std::mutex mutex_;
  std::shared_ptr<const ScheduleFile> schedule_;
  std::filesystem::file_time_type mtime_;
  std::chrono::steady_clock::time_point last_check_ = std::chrono::steady_clock::now();
};

}  // namespace carbonsched
