// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Concurrent transport: one worker thread per rank (plus one per extra data
// block inside a collective), communicating through shared word arrays.
//
// Every word is a std::atomic<uint64_t>; puts store words in ascending index
// order with release semantics and waits load with acquire, so a reader that
// observes a flag also observes the data half of that word and every earlier
// word of the same message. An optional delivery thread injects a seeded
// uniform delay per message while preserving per-pair issue order, which is
// what the schedule-fuzzing tests drive.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "ccsim/transport.hpp"

namespace ccsim {

/// Internal signal: the run is being torn down (fault or deadlock elsewhere).
struct RunAborted : std::exception {
  const char* what() const noexcept override { return "run aborted"; }
};

class ConcurrentEngine {
 public:
  ConcurrentEngine(const ClusterTopology& topo, const RunOptions& opts)
      : topo_(topo), opts_(opts), rng_(opts.seed) {
    topo_.validate();
    const int ng = topo_.world_size();
    cells_ = std::vector<Cell>(static_cast<std::size_t>(ng));
    pair_last_.assign(static_cast<std::size_t>(ng) * ng, Clock::time_point{});
  }

  RunReport run(const RankProgram& program) {
    const int ng = topo_.world_size();
    const bool delayed = opts_.delay_max_us > 0.0;
    if (delayed) delivery_thread_ = std::thread([this] { delivery_loop(); });

    std::vector<std::unique_ptr<RankCtx>> ctxs;
    std::vector<Task> mains(static_cast<std::size_t>(ng));
    std::vector<double> finish_us(static_cast<std::size_t>(ng), 0.0);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(ng));
    for (int g = 0; g < ng; ++g) ctxs.push_back(std::make_unique<RankCtx>(this, g));

    start_ = Clock::now();
    {
      std::vector<std::thread> workers;
      workers.reserve(ng);
      for (int g = 0; g < ng; ++g) {
        workers.emplace_back([&, g] {
          try {
            mains[g] = program(*ctxs[g]);
            mains[g].handle().resume();  // runs to completion; waits block inline
            if (mains[g].promise().error) errors[g] = mains[g].promise().error;
          } catch (...) {
            errors[g] = std::current_exception();
          }
          finish_us[g] = us_since_start();
          if (errors[g]) note_error(errors[g]);
        });
      }
      for (auto& w : workers) w.join();
    }

    if (delayed) {
      {
        std::lock_guard<std::mutex> lk(pending_mu_);
        stop_delivery_ = true;
      }
      pending_cv_.notify_all();
      delivery_thread_.join();
    }

    // Prefer a concrete fault over secondary aborts; report deadlocks with
    // the aggregated blocked set.
    for (int g = 0; g < ng; ++g) {
      if (!errors[g]) continue;
      try {
        std::rethrow_exception(errors[g]);
      } catch (const RunAborted&) {
        continue;
      } catch (...) {
        std::rethrow_exception(errors[g]);
      }
    }
    if (delivery_fault_) std::rethrow_exception(delivery_fault_);
    if (deadlock_.load()) {
      std::lock_guard<std::mutex> lk(blocked_mu_);
      auto blocked = blocked_;
      std::sort(blocked.begin(), blocked.end(),
                [](const BlockedRank& a, const BlockedRank& b) {
                  return a.global_rank < b.global_rank;
                });
      throw DeadlockError(std::move(blocked));
    }

    RunReport report;
    report.finish_us = std::move(finish_us);
    report.stats.puts_issued = puts_issued_.load();
    report.stats.bytes_issued = bytes_issued_.load();
    report.stats.deliveries = deliveries_.load();
    report.stats.bytes_delivered = bytes_delivered_.load();
    {
      std::lock_guard<std::mutex> lk(trace_mu_);
      report.trace = std::move(trace_);
    }
    return report;
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct Region {
    std::unique_ptr<std::atomic<std::uint64_t>[]> words;
    std::size_t n = 0;
  };

  struct Cell {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<Region> regions;
  };

  struct PendingMsg {
    Clock::time_point due;
    std::uint64_t order = 0;
    int src = 0;
    int dst = 0;
    RegionId region = 0;
    std::size_t word_off = 0;
    std::vector<std::uint64_t> payload;
  };

  struct PendingAfter {
    bool operator()(const PendingMsg& a, const PendingMsg& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.order > b.order;
    }
  };

  class RankCtx final : public Ctx {
   public:
    RankCtx(ConcurrentEngine* eng, int global) : eng_(eng) {
      topo_ = eng->topo_;
      global_ = global;
      self_ = RankId::from_global(global, topo_);
    }

    RegionId alloc_region(std::size_t words) override {
      Cell& c = eng_->cells_[global_];
      std::lock_guard<std::mutex> lk(c.mu);
      Region r;
      r.words = std::make_unique<std::atomic<std::uint64_t>[]>(words);
      for (std::size_t i = 0; i < words; ++i) r.words[i].store(0, std::memory_order_relaxed);
      r.n = words;
      c.regions.push_back(std::move(r));
      c.cv.notify_all();
      return static_cast<RegionId>(c.regions.size() - 1);
    }

    std::uint64_t load_word(RegionId r, std::size_t idx) override {
      auto* w = eng_->own_words(global_, r, idx, 1);
      return w[idx].load(std::memory_order_acquire);
    }

    void read_words(RegionId r, std::size_t off, std::uint64_t* dst,
                    std::size_t n) override {
      auto* w = eng_->own_words(global_, r, off, n);
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = w[off + i].load(std::memory_order_acquire);
      }
    }

    void put_words(RankId dst, RegionId r, std::size_t word_off, const std::uint64_t* src,
                   std::size_t n) override {
      eng_->issue_put(global_, dst, r, word_off, src, n);
    }

    void publish_counter(RankId dst, RegionId r, std::size_t slot,
                         std::uint64_t value) override {
      eng_->publish(global_, dst, r, slot, value);
    }

    double now_us() override { return eng_->us_since_start(); }

   protected:
    bool word_wait_ready(RegionId r, std::size_t idx, std::uint32_t expected) override {
      auto* w = eng_->own_words(global_, r, idx, 1);
      BlockedRank b;
      b.global_rank = global_;
      b.kind = BlockedRank::Kind::FlagWait;
      b.region = r;
      b.word_index = idx;
      b.expected = expected;
      eng_->blocking_wait(
          [&] { return word_flag(w[idx].load(std::memory_order_acquire)) == expected; },
          b);
      return true;
    }
    void word_wait_suspend(RegionId, std::size_t, std::uint32_t,
                           std::coroutine_handle<>) override {
      throw std::logic_error("concurrent waits never suspend");
    }
    bool counter_wait_ready(RegionId r, std::size_t slot, std::uint64_t expected) override {
      auto* w = eng_->own_words(global_, r, slot, 1);
      BlockedRank b;
      b.global_rank = global_;
      b.kind = BlockedRank::Kind::SeqWait;
      b.expected = expected;
      eng_->blocking_wait(
          [&] { return w[slot].load(std::memory_order_acquire) >= expected; }, b);
      return true;
    }
    void counter_wait_suspend(RegionId, std::size_t, std::uint64_t, int peer,
                              std::coroutine_handle<>) override {
      (void)peer;
      throw std::logic_error("concurrent waits never suspend");
    }
    bool parallel_ready(ParallelWait& p) override {
      if (p.children.empty()) return true;
      std::vector<std::thread> workers;
      workers.reserve(p.children.size() - 1);
      for (std::size_t i = 1; i < p.children.size(); ++i) {
        auto h = p.children[i].handle();
        workers.emplace_back([h] { h.resume(); });
      }
      p.children[0].handle().resume();
      for (auto& w : workers) w.join();
      // Prefer a concrete fault over a secondary abort signal.
      std::exception_ptr first;
      for (Task& child : p.children) {
        if (!child.promise().error) continue;
        if (!first) first = child.promise().error;
        try {
          std::rethrow_exception(child.promise().error);
        } catch (const RunAborted&) {
          continue;
        } catch (...) {
          std::rethrow_exception(child.promise().error);
        }
      }
      if (first) std::rethrow_exception(first);
      return true;
    }
    void parallel_suspend(ParallelWait&, std::coroutine_handle<>) override {
      throw std::logic_error("concurrent parallel never suspends");
    }

   private:
    ConcurrentEngine* eng_;
  };

  double us_since_start() const {
    return std::chrono::duration<double, std::micro>(Clock::now() - start_).count();
  }

  // CounterWait diagnostics carry the peer rank; fill it in before waiting.
  template <typename Pred>
  void blocking_wait(Pred pred, BlockedRank diag) {
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(opts_.timeout_s));
    int spins = 0;
    while (true) {
      if (pred()) return;
      if (abort_.load(std::memory_order_relaxed)) {
        if (deadlock_.load()) note_blocked(diag);
        throw RunAborted{};
      }
      if (++spins < 64) {
        continue;
      } else if (spins < 1024) {
        std::this_thread::yield();
      } else {
        std::this_thread::sleep_for(std::chrono::microseconds(100));
        if (Clock::now() > deadline) {
          note_blocked(diag);
          deadlock_.store(true);
          abort_all();
          throw RunAborted{};
        }
      }
    }
  }

  void note_blocked(const BlockedRank& b) {
    std::lock_guard<std::mutex> lk(blocked_mu_);
    for (const auto& e : blocked_) {
      if (e.global_rank == b.global_rank) return;
    }
    blocked_.push_back(b);
  }

  void note_error(std::exception_ptr e) {
    try {
      std::rethrow_exception(e);
    } catch (const RunAborted&) {
      return;  // secondary; someone else already aborted
    } catch (...) {
      abort_all();
    }
  }

  void abort_all() {
    abort_.store(true);
    for (auto& c : cells_) c.cv.notify_all();
    pending_cv_.notify_all();
  }

  std::atomic<std::uint64_t>* own_words(int rank, RegionId r, std::size_t off,
                                        std::size_t n) {
    Cell& c = cells_[rank];
    std::lock_guard<std::mutex> lk(c.mu);
    if (r < 0 || static_cast<std::size_t>(r) >= c.regions.size() ||
        off + n > c.regions[r].n) {
      throw ProtocolFaultError(rank, "access to unknown region or word");
    }
    return c.regions[r].words.get();
  }

  // Resolve a destination region for a write, waiting briefly for symmetric
  // allocation to catch up on the destination rank.
  std::atomic<std::uint64_t>* dst_words(int src, int dst, RegionId r, std::size_t off,
                                        std::size_t n) {
    if (r < 0) throw ProtocolFaultError(src, "put to unknown region");
    Cell& c = cells_[dst];
    std::unique_lock<std::mutex> lk(c.mu);
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(opts_.timeout_s));
    while (static_cast<std::size_t>(r) >= c.regions.size()) {
      if (abort_.load()) throw RunAborted{};
      if (c.cv.wait_until(lk, deadline) == std::cv_status::timeout) {
        throw ProtocolFaultError(src, "put to region never allocated on rank " +
                                          std::to_string(dst));
      }
    }
    if (off + n > c.regions[r].n) {
      throw ProtocolFaultError(src, "out-of-bounds put into region " + std::to_string(r));
    }
    return c.regions[r].words.get();
  }

  void publish(int src, RankId dst_id, RegionId r, std::size_t slot, std::uint64_t value) {
    if (dst_id.node_rank < 0 || dst_id.node_rank >= topo_.nodes ||
        dst_id.local_rank < 0 || dst_id.local_rank >= topo_.gpus_per_node) {
      throw ProtocolFaultError(src, "counter publish to rank outside the topology");
    }
    auto* w = dst_words(src, dst_id.global(topo_), r, slot, 1);
    std::uint64_t cur = w[slot].load(std::memory_order_relaxed);
    while (cur < value && !w[slot].compare_exchange_weak(cur, value,
                                                         std::memory_order_release,
                                                         std::memory_order_relaxed)) {
    }
  }

  void deliver(int src, int dst, RegionId r, std::size_t word_off,
               const std::uint64_t* payload, std::size_t n) {
    auto* w = dst_words(src, dst, r, word_off, n);
    for (std::size_t i = 0; i < n; ++i) {
      w[word_off + i].store(payload[i], std::memory_order_release);
    }
    deliveries_.fetch_add(1, std::memory_order_relaxed);
    bytes_delivered_.fetch_add(n * 8, std::memory_order_relaxed);
    if (opts_.keep_trace) {
      std::lock_guard<std::mutex> lk(trace_mu_);
      trace_.push_back(TraceRecord{us_since_start(), src, dst, r, word_off * 8, n * 8});
    }
  }

  void issue_put(int src, RankId dst_id, RegionId r, std::size_t word_off,
                 const std::uint64_t* payload, std::size_t n) {
    if (dst_id.node_rank < 0 || dst_id.node_rank >= topo_.nodes ||
        dst_id.local_rank < 0 || dst_id.local_rank >= topo_.gpus_per_node) {
      throw ProtocolFaultError(src, "put to rank outside the topology");
    }
    const int dst = dst_id.global(topo_);
    puts_issued_.fetch_add(1, std::memory_order_relaxed);
    bytes_issued_.fetch_add(n * 8, std::memory_order_relaxed);

    if (opts_.delay_max_us <= 0.0) {
      deliver(src, dst, r, word_off, payload, n);
      return;
    }

    PendingMsg m;
    m.src = src;
    m.dst = dst;
    m.region = r;
    m.word_off = word_off;
    m.payload.assign(payload, payload + n);
    {
      std::lock_guard<std::mutex> lk(pending_mu_);
      const double delay_us = std::uniform_real_distribution<double>(
          0.0, opts_.delay_max_us)(rng_);
      auto due = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double, std::micro>(delay_us));
      auto& last = pair_last_[static_cast<std::size_t>(src) * topo_.world_size() + dst];
      if (due < last) due = last;  // keep per-pair issue order
      last = due;
      m.due = due;
      m.order = next_order_++;
      pending_.push_back(std::move(m));
      std::push_heap(pending_.begin(), pending_.end(), PendingAfter{});
    }
    pending_cv_.notify_one();
  }

  void delivery_loop() {
    std::unique_lock<std::mutex> lk(pending_mu_);
    while (true) {
      if (pending_.empty()) {
        if (stop_delivery_) return;
        pending_cv_.wait(lk);
        continue;
      }
      const auto due = pending_.front().due;
      if (Clock::now() < due) {
        pending_cv_.wait_until(lk, due);
        continue;
      }
      std::pop_heap(pending_.begin(), pending_.end(), PendingAfter{});
      PendingMsg m = std::move(pending_.back());
      pending_.pop_back();
      lk.unlock();
      try {
        deliver(m.src, m.dst, m.region, m.word_off, m.payload.data(), m.payload.size());
      } catch (const RunAborted&) {
        // tear-down in progress; drop remaining traffic
      } catch (...) {
        delivery_fault_ = std::current_exception();
        note_error(delivery_fault_);
      }
      lk.lock();
    }
  }

  ClusterTopology topo_;
  RunOptions opts_;
  std::vector<Cell> cells_;
  Clock::time_point start_;

  std::atomic<bool> abort_{false};
  std::atomic<bool> deadlock_{false};
  std::mutex blocked_mu_;
  std::vector<BlockedRank> blocked_;

  std::mutex pending_mu_;
  std::condition_variable pending_cv_;
  std::vector<PendingMsg> pending_;
  std::vector<Clock::time_point> pair_last_;
  std::uint64_t next_order_ = 0;
  bool stop_delivery_ = false;
  std::thread delivery_thread_;
  std::mt19937_64 rng_;
  std::exception_ptr delivery_fault_;

  std::atomic<std::uint64_t> puts_issued_{0};
  std::atomic<std::uint64_t> deliveries_{0};
  std::atomic<std::uint64_t> bytes_issued_{0};
  std::atomic<std::uint64_t> bytes_delivered_{0};

  std::mutex trace_mu_;
  std::vector<TraceRecord> trace_;
};

}  // namespace ccsim
