#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace udi {

/// Seconds-resolution wall time used for sessions, grants, audit and store writes.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

inline std::int64_t to_unix(Timestamp t) noexcept { return t.time_since_epoch().count(); }
inline Timestamp from_unix(std::int64_t s) noexcept { return Timestamp{Seconds{s}}; }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::time_point_cast<Seconds>(std::chrono::system_clock::now());
  }
};

/// Virtual clock: only moves when told to. Every TTL in the system is
/// evaluated against an injected clock so expiry is testable without sleeping.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = from_unix(0)) : now_(to_unix(start)) {}

  Timestamp now() const override { return from_unix(now_.load()); }
  void set(Timestamp t) { now_.store(to_unix(t)); }
  void advance(Seconds by) { now_.fetch_add(by.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace udi
