// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <coroutine>
#include <exception>
#include <utility>

namespace ccsim {

/// Coroutine handle for a rank program (or one of its block sub-tasks).
///
/// Tasks start suspended; a transport scheduler resumes them. On the
/// virtual-time transport a task suspends at every unsatisfied wait and is
/// resumed by the event loop. On the concurrent transport awaitables block
/// inside await_ready instead, so a single resume runs the task to
/// completion on its worker thread.
class Task {
 public:
  struct promise_type {
    std::exception_ptr error;
    // Exactly one of these is used: a parent awaiting this task via
    // `co_await child()`, or a scheduler hook for root/parallel tasks.
    std::coroutine_handle<> continuation;
    void (*on_done)(promise_type&) noexcept = nullptr;
    void* hook = nullptr;

    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    struct FinalAwaiter {
      bool await_ready() noexcept { return false; }
      std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
        auto& p = h.promise();
        if (p.continuation) return p.continuation;
        if (p.on_done != nullptr) p.on_done(p);
        return std::noop_coroutine();
      }
      void await_resume() noexcept {}
    };
    FinalAwaiter final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { error = std::current_exception(); }
  };

  using Handle = std::coroutine_handle<promise_type>;

  Task() = default;
  explicit Task(Handle h) : handle_(h) {}
  Task(Task&& o) noexcept : handle_(std::exchange(o.handle_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      destroy();
      handle_ = std::exchange(o.handle_, {});
    }
    return *this;
  }
  Task(const Task&) = delete;
  Task& operator=(const Task&) = delete;
  ~Task() { destroy(); }

  Handle handle() const { return handle_; }
  bool valid() const { return static_cast<bool>(handle_); }
  bool done() const { return handle_.done(); }
  promise_type& promise() const { return handle_.promise(); }

  /// Serial composition: `co_await child()` starts the child and resumes the
  /// caller when it finishes, rethrowing any child error.
  struct Awaiter {
    Handle h;
    bool await_ready() const noexcept { return !h || h.done(); }
    std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
      h.promise().continuation = parent;
      return h;
    }
    void await_resume() const {
      if (h && h.promise().error) std::rethrow_exception(h.promise().error);
    }
  };
  Awaiter operator co_await() const noexcept { return Awaiter{handle_}; }

 private:
  void destroy() {
    if (handle_) {
      handle_.destroy();
      handle_ = {};
    }
  }

  Handle handle_;
};

}  // namespace ccsim
