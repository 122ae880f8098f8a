// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Transport abstraction shared by the virtual-time and concurrent engines.
//
// Ranks communicate exclusively through symmetric regions: arrays of 8-byte
// words that every rank allocates in the same order with the same sizes.
// A word is the atomic wire unit (4B data + 4B flag); put_words moves whole
// words, so payloads are 8-byte multiples by construction and a reader never
// observes a torn word. Deliveries between one (src, dst) pair stay in issue
// order.

#pragma once

#include <coroutine>
#include <cstdint>
#include <functional>
#include <vector>

#include "ccsim/cost_model.hpp"
#include "ccsim/errors.hpp"
#include "ccsim/task.hpp"
#include "ccsim/topology.hpp"

namespace ccsim {

using RegionId = int;

enum class TransportMode { VirtualTime, Concurrent };

inline const char* to_string(TransportMode m) {
  return m == TransportMode::VirtualTime ? "virtual-time" : "concurrent";
}

inline TransportMode transport_mode_from_string(const std::string& s) {
  if (s == "virtual-time" || s == "virtual") return TransportMode::VirtualTime;
  if (s == "concurrent") return TransportMode::Concurrent;
  throw InvalidArgumentError("unknown transport '" + s +
                             "' (expected virtual-time|concurrent)");
}

/// One delivery: `time_us,src,dst,region,offset,bytes` when serialized.
struct TraceRecord {
  double time_us = 0.0;
  int src = 0;
  int dst = 0;
  RegionId region = 0;
  std::uint64_t byte_offset = 0;
  std::uint64_t bytes = 0;
};

struct RunStats {
  std::uint64_t puts_issued = 0;
  std::uint64_t deliveries = 0;
  std::uint64_t bytes_issued = 0;
  std::uint64_t bytes_delivered = 0;
};

struct RunOptions {
  std::uint64_t seed = 0;
  // Concurrent transport: per-message injected delay drawn uniformly from
  // [0, delay_max_us]; 0 disables injection.
  double delay_max_us = 0.0;
  // Concurrent transport: a wait that makes no progress for this long is
  // treated as a deadlock.
  double timeout_s = 5.0;
  bool keep_trace = false;
};

struct RunReport {
  // Per global rank: completion time of the rank's program, in microseconds
  // (virtual time or wall time depending on the transport).
  std::vector<double> finish_us;
  RunStats stats;
  std::vector<TraceRecord> trace;
  // Virtual-time only: hash of every region's final contents, for
  // bit-identical determinism checks.
  std::uint64_t region_hash = 0;
};

inline std::uint32_t word_data(std::uint64_t w) { return static_cast<std::uint32_t>(w); }
inline std::uint32_t word_flag(std::uint64_t w) {
  return static_cast<std::uint32_t>(w >> 32);
}
inline std::uint64_t make_word(std::uint32_t data, std::uint32_t flag) {
  return static_cast<std::uint64_t>(data) | (static_cast<std::uint64_t>(flag) << 32);
}

class Ctx;

/// Awaitable: resolves once the flag half of `region[idx]` equals `expected`.
struct WordWait {
  Ctx* ctx;
  RegionId region;
  std::size_t idx;
  std::uint32_t expected;

  bool await_ready();
  void await_suspend(std::coroutine_handle<> h);
  void await_resume() {}
};

/// Awaitable: resolves once the full 64-bit counter at `region[slot]` is
/// >= `expected`. `peer` is only used to label deadlock diagnoses.
struct CounterWait {
  Ctx* ctx;
  RegionId region;
  std::size_t slot;
  std::uint64_t expected;
  int peer;

  bool await_ready();
  void await_suspend(std::coroutine_handle<> h);
  void await_resume() {}
};

/// Awaitable: runs child tasks to completion. The virtual-time engine
/// interleaves them as cooperatively scheduled tasks; the concurrent engine
/// runs them as real sub-workers.
struct ParallelWait {
  Ctx* ctx = nullptr;
  std::vector<Task> children;
  // Scheduler state (virtual-time engine).
  std::size_t remaining = 0;
  std::exception_ptr error;
  std::coroutine_handle<> parent;
  void* engine = nullptr;

  bool await_ready();
  void await_suspend(std::coroutine_handle<> h);
  void await_resume() {
    if (error) std::rethrow_exception(error);
  }
};

/// Per-rank view of a transport: the only interface rank programs use.
class Ctx {
 public:
  virtual ~Ctx() = default;

  const ClusterTopology& topo() const { return topo_; }
  RankId self() const { return self_; }
  int global() const { return global_; }
  int world() const { return topo_.world_size(); }

  /// Symmetric allocation: every rank must allocate the same sequence of
  /// region sizes. Words start zeroed.
  virtual RegionId alloc_region(std::size_t words) = 0;

  /// Read one word of an own region.
  virtual std::uint64_t load_word(RegionId r, std::size_t idx) = 0;
  virtual void read_words(RegionId r, std::size_t word_off, std::uint64_t* dst,
                          std::size_t n) = 0;

  /// Non-blocking one-sided write of whole words into `dst`'s region.
  /// Returns immediately; the payload becomes visible after the transport's
  /// link delay, atomically per word and in issue order per (src, dst) pair.
  virtual void put_words(RankId dst, RegionId r, std::size_t word_off,
                         const std::uint64_t* src, std::size_t n) = 0;

  /// Monotone (max) store into `dst`'s counter region, visible immediately.
  /// Counters model the sequence-number synchronization side channel.
  virtual void publish_counter(RankId dst, RegionId r, std::size_t slot,
                               std::uint64_t value) = 0;

  /// Current time in microseconds (virtual or wall).
  virtual double now_us() = 0;

  WordWait wait_word(RegionId r, std::size_t idx, std::uint32_t flag) {
    return WordWait{this, r, idx, flag};
  }
  CounterWait wait_counter_ge(RegionId r, std::size_t slot, std::uint64_t v, int peer) {
    return CounterWait{this, r, slot, v, peer};
  }
  ParallelWait run_tasks(std::vector<Task> children) {
    ParallelWait p;
    p.ctx = this;
    p.children = std::move(children);
    return p;
  }

 protected:
  friend struct WordWait;
  friend struct CounterWait;
  friend struct ParallelWait;

  // Awaitable hooks. The concurrent engine blocks inside the *_ready hooks
  // (so tasks never suspend); the virtual-time engine registers waiters and
  // suspends.
  virtual bool word_wait_ready(RegionId r, std::size_t idx, std::uint32_t expected) = 0;
  virtual void word_wait_suspend(RegionId r, std::size_t idx, std::uint32_t expected,
                                 std::coroutine_handle<> h) = 0;
  virtual bool counter_wait_ready(RegionId r, std::size_t slot, std::uint64_t expected) = 0;
  virtual void counter_wait_suspend(RegionId r, std::size_t slot, std::uint64_t expected,
                                    int peer, std::coroutine_handle<> h) = 0;
  virtual bool parallel_ready(ParallelWait& p) = 0;
  virtual void parallel_suspend(ParallelWait& p, std::coroutine_handle<> h) = 0;

  ClusterTopology topo_;
  RankId self_;
  int global_ = 0;
};

inline bool WordWait::await_ready() { return ctx->word_wait_ready(region, idx, expected); }
inline void WordWait::await_suspend(std::coroutine_handle<> h) {
  ctx->word_wait_suspend(region, idx, expected, h);
}
inline bool CounterWait::await_ready() {
  return ctx->counter_wait_ready(region, slot, expected);
}
inline void CounterWait::await_suspend(std::coroutine_handle<> h) {
  ctx->counter_wait_suspend(region, slot, expected, peer, h);
}
inline bool ParallelWait::await_ready() { return ctx->parallel_ready(*this); }
inline void ParallelWait::await_suspend(std::coroutine_handle<> h) {
  ctx->parallel_suspend(*this, h);
}

/// A rank program: one coroutine per rank, identical across ranks modulo
/// the rank identity available through the context.
using RankProgram = std::function<Task(Ctx&)>;

/// Sequence-number synchronization: publish `value` into each listed peer's
/// counter slot for this rank, then wait until every listed peer's published
/// counter reaches `target`. Waits only on the listed peers, never on all
/// ranks; an absent peer blocks exactly its waiters.
inline Task publish_and_wait_peers(Ctx& ctx, RegionId counters,
                                   std::vector<RankId> peers, std::uint64_t value,
                                   std::uint64_t target) {
  for (const RankId& p : peers) {
    ctx.publish_counter(p, counters, static_cast<std::size_t>(ctx.global()), value);
  }
  for (const RankId& p : peers) {
    const int pg = p.global(ctx.topo());
    co_await ctx.wait_counter_ge(counters, static_cast<std::size_t>(pg), target, pg);
  }
}

}  // namespace ccsim
