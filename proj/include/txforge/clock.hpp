// Copyright 2026 The txforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <utility>

namespace txforge {

/// Milliseconds on whichever timeline a session runs on.
using Millis = std::int64_t;

/// Time source with a task scheduler. Scheduled tasks run on the thread that
/// calls sleep_for(), in due-time order; ties run in scheduling order.
class Clock {
 public:
  using Task = std::function<void()>;

  virtual ~Clock() = default;
  virtual Millis now() const = 0;
  /// Lets `ms` pass, running every task that falls due on the way.
  virtual void sleep_for(Millis ms) = 0;

  /// Returns an id usable with cancel().
  std::uint64_t schedule_at(Millis due, Task task);
  std::uint64_t schedule_after(Millis delay, Task task) { return schedule_at(now() + delay, std::move(task)); }
  void cancel(std::uint64_t id);
  std::size_t pending_tasks() const;

 protected:
  /// Pops the earliest task due at or before `limit`.
  bool pop_due(Millis limit, Millis& due, Task& task);
  std::optional<Millis> next_due() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<Millis, std::uint64_t>, Task> tasks_;
  std::uint64_t next_id_ = 1;
};

/// Virtual time: sleeping advances the clock instantly.
class SimClock final : public Clock {
 public:
  explicit SimClock(Millis start = 0) : now_(start) {}
  Millis now() const override { return now_; }
  void sleep_for(Millis ms) override;

 private:
  Millis now_;
};

/// Real time measured from construction.
class WallClock final : public Clock {
 public:
  WallClock();
  Millis now() const override;
  void sleep_for(Millis ms) override;

 private:
  std::int64_t origin_ns_;
};

}  // namespace txforge
