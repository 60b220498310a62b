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

#include "txforge/clock.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <thread>

namespace txforge {

std::uint64_t Clock::schedule_at(Millis due, Task task) {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  tasks_.emplace(std::make_pair(due, id), std::move(task));
  return id;
}

void Clock::cancel(std::uint64_t id) {
  std::lock_guard lock(mu_);
  std::erase_if(tasks_, [id](const auto& kv) { return kv.first.second == id; });
}

std::size_t Clock::pending_tasks() const {
  std::lock_guard lock(mu_);
  return tasks_.size();
}

bool Clock::pop_due(Millis limit, Millis& due, Task& task) {
  std::lock_guard lock(mu_);
  if (tasks_.empty() || tasks_.begin()->first.first > limit) return false;
  auto it = tasks_.begin();
  due = it->first.first;
  task = std::move(it->second);
  tasks_.erase(it);
  return true;
}

std::optional<Millis> Clock::next_due() const {
  std::lock_guard lock(mu_);
  if (tasks_.empty()) return std::nullopt;
  return tasks_.begin()->first.first;
}

void SimClock::sleep_for(Millis ms) {
  const Millis target = now_ + std::max<Millis>(ms, 0);
  Millis due = 0;
  Task task;
  while (pop_due(target, due, task)) {
    now_ = std::max(now_, due);
    task();
  }
  now_ = target;
}

WallClock::WallClock()
    : origin_ns_(std::chrono::steady_clock::now().time_since_epoch().count()) {}

Millis WallClock::now() const {
  const auto ns = std::chrono::steady_clock::now().time_since_epoch().count() - origin_ns_;
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::nanoseconds(ns)).count();
}

void WallClock::sleep_for(Millis ms) {
  const Millis target = now() + std::max<Millis>(ms, 0);
  while (true) {
    Millis due = 0;
    Task task;
    if (pop_due(std::min(now(), target), due, task)) {
      task();
      continue;
    }
    const Millis current = now();
    if (current >= target) return;
    Millis wake = target;
    if (auto next = next_due()) wake = std::min(wake, *next);
    std::this_thread::sleep_for(std::chrono::milliseconds(std::max<Millis>(wake - current, 1)));
  }
}

}  // namespace txforge
