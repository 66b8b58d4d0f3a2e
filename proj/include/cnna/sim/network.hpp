/*
 * Copyright 2026 The CNNA Simulator Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// A Kahn-style process network. Each actor is a coroutine that only
// communicates through bounded single-producer/single-consumer channels and
// blocks on a full push or an empty pop. The network steps one runnable
// actor at a time; which one is chosen is up to the Interleaving policy, so
// tests can run the same network under different schedules and capacities
// and compare outputs.

#pragma once

#include <algorithm>
#include <coroutine>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cnna/error.hpp"

namespace cnna::sim {

class Process {
 public:
  struct promise_type {
    std::exception_ptr error;
    std::function<bool()> can_resume;  // set while blocked on a channel

    Process get_return_object() { return Process(std::coroutine_handle<promise_type>::from_promise(*this)); }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_always final_suspend() noexcept { return {}; }
    void return_void() noexcept {}
    void unhandled_exception() noexcept { error = std::current_exception(); }
  };

  using Handle = std::coroutine_handle<promise_type>;

  Process() = default;
  explicit Process(Handle h) : handle_(h) {}
  Process(Process&& o) noexcept : handle_(std::exchange(o.handle_, {})) {}
  Process& operator=(Process&& o) noexcept {
    if (this != &o) {
      if (handle_) handle_.destroy();
      handle_ = std::exchange(o.handle_, {});
    }
    return *this;
  }
  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;
  ~Process() {
    if (handle_) handle_.destroy();
  }

  bool done() const noexcept { return !handle_ || handle_.done(); }
  bool runnable() const {
    if (done()) return false;
    const auto& f = handle_.promise().can_resume;
    return !f || f();
  }
  void resume() {
    handle_.promise().can_resume = nullptr;
    handle_.resume();
    if (auto e = handle_.promise().error) std::rethrow_exception(e);
  }

 private:
  Handle handle_;
};

struct TraceEvent {
  std::uint64_t step;
  std::string channel;
  const char* op;  // "push" or "pop"
  std::size_t occupancy;
  bool last;
};

class Trace {
 public:
  void record(TraceEvent e) { events_.push_back(std::move(e)); }
  const std::vector<TraceEvent>& events() const noexcept { return events_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }
  std::uint64_t step() const noexcept { return step_; }

  void write_csv(std::ostream& os) const {
    os << "step,channel,event,occupancy,last\n";
    for (const auto& e : events_) {
      os << e.step << ',' << e.channel << ',' << e.op << ',' << e.occupancy << ',' << (e.last ? 1 : 0) << '\n';
    }
  }

 private:
  std::vector<TraceEvent> events_;
  std::uint64_t step_ = 0;
};

namespace detail {
template <typename T>
bool is_last(const T& v) {
  if constexpr (requires { v.last; }) {
    return v.last;
  } else {
    return false;
  }
}
}  // namespace detail

template <typename T>
class Channel {
 public:
  Channel(std::string name, std::size_t capacity) : name_(std::move(name)), capacity_(capacity) {
    if (capacity_ == 0) throw InputError("channel capacity must be >= 1");
  }
  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  // Awaiters hold only a channel pointer; a pushed value is staged in the
  // channel until there is room for it.
  struct PushAwaiter {
    Channel* ch;
    bool await_ready() const noexcept { return ch->q_.size() < ch->capacity_; }
    void await_suspend(Process::Handle h) {
      h.promise().can_resume = [c = ch] { return c->q_.size() < c->capacity_; };
    }
    void await_resume() { ch->commit(); }
  };

  struct PopAwaiter {
    Channel* ch;
    bool await_ready() const noexcept { return !ch->q_.empty(); }
    void await_suspend(Process::Handle h) {
      h.promise().can_resume = [c = ch] { return !c->q_.empty(); };
    }
    T await_resume() { return ch->take(); }
  };

  PushAwaiter push(const T& value) {
    stage(T(value));
    return PushAwaiter{this};
  }
  PushAwaiter push(T&& value) {
    stage(std::move(value));
    return PushAwaiter{this};
  }
  PopAwaiter pop() { return PopAwaiter{this}; }

  void attach(Trace* t) noexcept { trace_ = t; }

  const std::string& name() const noexcept { return name_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return q_.size(); }
  std::uint64_t pushed() const noexcept { return pushed_; }
  std::uint64_t popped() const noexcept { return popped_; }
  std::uint64_t lasts_popped() const noexcept { return lasts_popped_; }
  std::size_t peak() const noexcept { return peak_; }

 private:
  void stage(T v) {
    if (staged_) throw SimulationFault("channel " + name_ + " has two writers");
    staged_.emplace(std::move(v));
  }
  void commit() {
    T v = std::move(*staged_);
    staged_.reset();
    put(std::move(v));
  }
  void put(T v) {
    if (q_.size() >= capacity_) throw SimulationFault("channel " + name_ + " overflow");
    const bool last = detail::is_last(v);
    q_.push_back(std::move(v));
    ++pushed_;
    peak_ = std::max(peak_, q_.size());
    if (trace_) trace_->record({trace_->step(), name_, "push", q_.size(), last});
  }
  T take() {
    T v = std::move(q_.front());
    q_.pop_front();
    ++popped_;
    if (detail::is_last(v)) ++lasts_popped_;
    if (trace_) trace_->record({trace_->step(), name_, "pop", q_.size(), detail::is_last(v)});
    return v;
  }

  std::string name_;
  std::size_t capacity_;
  std::deque<T> q_;
  std::optional<T> staged_;
  std::uint64_t pushed_ = 0;
  std::uint64_t popped_ = 0;
  std::uint64_t lasts_popped_ = 0;
  std::size_t peak_ = 0;
  Trace* trace_ = nullptr;
};

// Chooses which runnable actor to step next.
class Interleaving {
 public:
  enum class Kind { round_robin, reverse, random };

  static Interleaving round_robin() { return Interleaving(Kind::round_robin, 0); }
  static Interleaving reverse() { return Interleaving(Kind::reverse, 0); }
  static Interleaving random(std::uint64_t seed) { return Interleaving(Kind::random, seed); }

  // `runnable` holds actor indices in ascending order and is never empty.
  std::size_t pick(const std::vector<std::size_t>& runnable) {
    switch (kind_) {
      case Kind::round_robin: {
        for (auto i : runnable) {
          if (i >= next_) {
            next_ = i + 1;
            return i;
          }
        }
        next_ = runnable.front() + 1;
        return runnable.front();
      }
      case Kind::reverse: return runnable.back();
      case Kind::random: {
        std::uniform_int_distribution<std::size_t> d(0, runnable.size() - 1);
        return runnable[d(rng_)];
      }
    }
    return runnable.front();
  }

 private:
  Interleaving(Kind k, std::uint64_t seed) : kind_(k), rng_(seed) {}

  Kind kind_;
  std::size_t next_ = 0;
  std::mt19937_64 rng_;
};

class Network {
 public:
  void spawn(std::string name, Process p) {
    names_.push_back(std::move(name));
    procs_.push_back(std::move(p));
  }

  void attach(Trace* t) noexcept { trace_ = t; }

  // Runs until every actor has finished. Returns the number of steps taken.
  std::uint64_t run(Interleaving policy = Interleaving::round_robin()) {
    std::vector<std::size_t> ready;
    std::uint64_t steps = 0;
    for (;;) {
      ready.clear();
      bool all_done = true;
      for (std::size_t i = 0; i < procs_.size(); ++i) {
        if (!procs_[i].done()) all_done = false;
        if (procs_[i].runnable()) ready.push_back(i);
      }
      if (all_done) return steps;
      if (ready.empty()) {
        std::string blocked;
        for (std::size_t i = 0; i < procs_.size(); ++i) {
          if (!procs_[i].done()) blocked += (blocked.empty() ? "" : ", ") + names_[i];
        }
        throw SimulationFault("deadlock: blocked actors [" + blocked + "]");
      }
      const auto i = policy.pick(ready);
      if (trace_) trace_->set_step(steps);
      procs_[i].resume();
      ++steps;
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Process> procs_;
  Trace* trace_ = nullptr;
};

}  // namespace cnna::sim
