// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic virtual-time transport.
//
// A single-threaded discrete-event engine drives all rank tasks. The clock
// is integer picoseconds so that latency-only runs are exact: summing K link
// latencies gives exactly K * alpha_ps with no floating-point drift.
//
// Link model: each directed (src, dst) pair is an independent serializing
// alpha-beta channel. A put of b bytes starts transmitting when the pair is
// free, occupies it for b/beta, then lands alpha later. An isolated message
// is therefore visible exactly alpha + b/beta after issue, and deliveries
// per pair stay in issue order. Counter publishes are modeled as visible at
// the publisher's current virtual time (the sequence-number side channel
// overlaps with useful work in a real system; see the fused-payload
// collectives for how this is used).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "ccsim/transport.hpp"

namespace ccsim {

class VirtualTimeEngine {
 public:
  VirtualTimeEngine(const ClusterTopology& topo, const CostParams& params,
                    const RunOptions& opts)
      : topo_(topo), opts_(opts) {
    topo_.validate();
    params.validate();
    alpha_intra_ps_ = seconds_to_ps(params.alpha_intra);
    alpha_inter_ps_ = seconds_to_ps(params.alpha_inter);
    beta_intra_ = params.beta_intra;
    beta_inter_ = params.beta_inter;
    const int ng = topo_.world_size();
    pair_busy_ps_.assign(static_cast<std::size_t>(ng) * ng, 0);
  }

  RunReport run(const RankProgram& program) {
    const int ng = topo_.world_size();
    cells_.clear();
    cells_.reserve(ng);
    for (int g = 0; g < ng; ++g) {
      cells_.push_back(std::make_unique<Cell>());
      Cell& c = *cells_.back();
      c.engine = this;
      c.global = g;
      c.ctx = std::make_unique<RankCtx>(this, g);
    }
    for (int g = 0; g < ng; ++g) {
      Cell& c = *cells_[g];
      c.main = program(*c.ctx);
      auto& p = c.main.promise();
      p.hook = &c;
      p.on_done = &Cell::main_done;
      ready_.push_back(c.main.handle());
    }

    event_loop();

    if (fault_) std::rethrow_exception(fault_);

    bool all_done = true;
    for (auto& c : cells_) all_done = all_done && c->done;
    if (!all_done) {
      std::vector<BlockedRank> blocked;
      for (auto& c : cells_) {
        for (const Waiter& w : c->waiters) {
          BlockedRank b;
          b.global_rank = c->global;
          if (w.counter) {
            b.kind = BlockedRank::Kind::SeqWait;
            b.peer_rank = w.peer;
            b.expected = w.expected;
          } else {
            b.kind = BlockedRank::Kind::FlagWait;
            b.region = w.region;
            b.word_index = w.idx;
            b.expected = w.expected;
          }
          blocked.push_back(b);
        }
      }
      throw DeadlockError(std::move(blocked));
    }

    RunReport report;
    report.finish_us.resize(ng);
    for (int g = 0; g < ng; ++g) report.finish_us[g] = ps_to_us(cells_[g]->finish_ps);
    report.stats = stats_;
    report.trace = std::move(trace_);
    report.region_hash = region_hash();
    return report;
  }

  /// FNV-1a over every region of every rank; lets tests assert bit-identical
  /// end-of-run buffer state across reruns.
  std::uint64_t region_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
      }
    };
    for (const auto& c : cells_) {
      for (const auto& r : c->regions) {
        for (std::uint64_t w : r.words) mix(w);
      }
    }
    return h;
  }

  static std::int64_t seconds_to_ps(double s) {
    return static_cast<std::int64_t>(std::llround(s * 1e12));
  }
  static double ps_to_us(std::int64_t ps) { return static_cast<double>(ps) / 1e6; }

 private:
  struct Region {
    std::vector<std::uint64_t> words;
  };

  struct Waiter {
    bool counter = false;
    RegionId region = 0;
    std::size_t idx = 0;
    std::uint64_t expected = 0;
    int peer = -1;
    std::coroutine_handle<> h;
  };

  class RankCtx;

  struct Cell {
    VirtualTimeEngine* engine = nullptr;
    int global = 0;
    std::unique_ptr<RankCtx> ctx;
    std::vector<Region> regions;
    std::vector<Waiter> waiters;
    Task main;
    bool done = false;
    std::int64_t finish_ps = 0;

    static void main_done(Task::promise_type& p) noexcept {
      auto* cell = static_cast<Cell*>(p.hook);
      cell->done = true;
      cell->finish_ps = cell->engine->now_ps_;
      if (p.error) cell->engine->set_fault(p.error);
    }
  };

  struct Delivery {
    std::int64_t t_ps = 0;
    std::uint64_t order = 0;
    int src = 0;
    int dst = 0;
    RegionId region = 0;
    std::size_t word_off = 0;
    std::vector<std::uint64_t> payload;
    // Counter publishes ride the event queue with zero delay so they apply
    // after every task runnable at the current instant (symmetric allocation
    // happens in those slices), while still being visible at the same time.
    bool counter = false;
    std::uint64_t counter_value = 0;
  };

  struct DeliveryAfter {
    bool operator()(const Delivery& a, const Delivery& b) const {
      if (a.t_ps != b.t_ps) return a.t_ps > b.t_ps;
      return a.order > b.order;
    }
  };

  class RankCtx final : public Ctx {
   public:
    RankCtx(VirtualTimeEngine* eng, int global) : eng_(eng) {
      topo_ = eng->topo_;
      global_ = global;
      self_ = RankId::from_global(global, topo_);
    }

    RegionId alloc_region(std::size_t words) override {
      auto& regions = eng_->cells_[global_]->regions;
      regions.push_back(Region{std::vector<std::uint64_t>(words, 0)});
      return static_cast<RegionId>(regions.size() - 1);
    }

    std::uint64_t load_word(RegionId r, std::size_t idx) override {
      return own_region(r, idx, 1)[idx];
    }

    void read_words(RegionId r, std::size_t off, std::uint64_t* dst,
                    std::size_t n) override {
      const auto& w = own_region(r, off, n);
      std::copy(w.begin() + off, w.begin() + off + n, dst);
    }

    void put_words(RankId dst, RegionId r, std::size_t word_off, const std::uint64_t* src,
                   std::size_t n) override {
      eng_->issue_put(global_, dst, r, word_off, src, n);
    }

    void publish_counter(RankId dst, RegionId r, std::size_t slot,
                         std::uint64_t value) override {
      eng_->publish(global_, dst, r, slot, value);
    }

    double now_us() override { return ps_to_us(eng_->now_ps_); }

   protected:
    bool word_wait_ready(RegionId r, std::size_t idx, std::uint32_t expected) override {
      return word_flag(own_region(r, idx, 1)[idx]) == expected;
    }
    void word_wait_suspend(RegionId r, std::size_t idx, std::uint32_t expected,
                           std::coroutine_handle<> h) override {
      eng_->cells_[global_]->waiters.push_back(
          Waiter{false, r, idx, expected, -1, h});
    }
    bool counter_wait_ready(RegionId r, std::size_t slot, std::uint64_t expected) override {
      return own_region(r, slot, 1)[slot] >= expected;
    }
    void counter_wait_suspend(RegionId r, std::size_t slot, std::uint64_t expected,
                              int peer, std::coroutine_handle<> h) override {
      eng_->cells_[global_]->waiters.push_back(Waiter{true, r, slot, expected, peer, h});
    }
    bool parallel_ready(ParallelWait& p) override { return p.children.empty(); }
    void parallel_suspend(ParallelWait& p, std::coroutine_handle<> h) override {
      p.parent = h;
      p.engine = eng_;
      p.remaining = p.children.size();
      for (Task& child : p.children) {
        auto& cp = child.promise();
        cp.hook = &p;
        cp.on_done = &VirtualTimeEngine::child_done;
        eng_->ready_.push_back(child.handle());
      }
    }

   private:
    const std::vector<std::uint64_t>& own_region(RegionId r, std::size_t off,
                                                 std::size_t n) {
      auto& regions = eng_->cells_[global_]->regions;
      if (r < 0 || static_cast<std::size_t>(r) >= regions.size() ||
          off + n > regions[r].words.size()) {
        throw ProtocolFaultError(global_, "access to unknown region or word");
      }
      return regions[r].words;
    }

    VirtualTimeEngine* eng_;
  };

  static void child_done(Task::promise_type& p) noexcept {
    auto* pw = static_cast<ParallelWait*>(p.hook);
    auto* eng = static_cast<VirtualTimeEngine*>(pw->engine);
    if (p.error) {
      if (!pw->error) pw->error = p.error;
      eng->set_fault(p.error);
    }
    if (--pw->remaining == 0) eng->ready_.push_back(pw->parent);
  }

  void set_fault(std::exception_ptr e) {
    if (!fault_) fault_ = e;
  }

  void issue_put(int src, RankId dst_id, RegionId r, std::size_t word_off,
                 const std::uint64_t* src_words, std::size_t n) {
    if (dst_id.node_rank < 0 || dst_id.node_rank >= topo_.nodes ||
        dst_id.local_rank < 0 || dst_id.local_rank >= topo_.gpus_per_node) {
      throw ProtocolFaultError(src, "put to rank outside the topology");
    }
    const int dst = dst_id.global(topo_);
    const bool intra =
        RankId::from_global(src, topo_).node_rank == dst_id.node_rank;
    const std::int64_t alpha = intra ? alpha_intra_ps_ : alpha_inter_ps_;
    const double beta = intra ? beta_intra_ : beta_inter_;
    const std::uint64_t bytes = static_cast<std::uint64_t>(n) * 8;
    const std::int64_t xmit =
        std::isfinite(beta)
            ? static_cast<std::int64_t>(std::llround(static_cast<double>(bytes) / beta * 1e12))
            : 0;

    std::int64_t& busy = pair_busy_ps_[static_cast<std::size_t>(src) * topo_.world_size() + dst];
    const std::int64_t start = std::max(now_ps_, busy);
    busy = start + xmit;
    const std::int64_t deliver_at = busy + alpha;

    Delivery d;
    d.t_ps = deliver_at;
    d.order = next_order_++;
    d.src = src;
    d.dst = dst;
    d.region = r;
    d.word_off = word_off;
    d.payload.assign(src_words, src_words + n);
    heap_.push_back(std::move(d));
    std::push_heap(heap_.begin(), heap_.end(), DeliveryAfter{});

    stats_.puts_issued += 1;
    stats_.bytes_issued += bytes;
  }

  void publish(int src, RankId dst_id, RegionId r, std::size_t slot, std::uint64_t value) {
    if (dst_id.node_rank < 0 || dst_id.node_rank >= topo_.nodes ||
        dst_id.local_rank < 0 || dst_id.local_rank >= topo_.gpus_per_node) {
      throw ProtocolFaultError(src, "counter publish to rank outside the topology");
    }
    Delivery d;
    d.t_ps = now_ps_;
    d.order = next_order_++;
    d.src = src;
    d.dst = dst_id.global(topo_);
    d.region = r;
    d.word_off = slot;
    d.counter = true;
    d.counter_value = value;
    heap_.push_back(std::move(d));
    std::push_heap(heap_.begin(), heap_.end(), DeliveryAfter{});
  }

  void apply_delivery(Delivery& d) {
    Cell& cell = *cells_[d.dst];
    if (d.region < 0 || static_cast<std::size_t>(d.region) >= cell.regions.size()) {
      set_fault(std::make_exception_ptr(
          ProtocolFaultError(d.src, "put to unknown region " + std::to_string(d.region))));
      return;
    }
    auto& words = cell.regions[d.region].words;
    if (d.counter) {
      if (d.word_off >= words.size()) {
        set_fault(std::make_exception_ptr(ProtocolFaultError(
            d.src, "counter publish to unknown slot in region " +
                       std::to_string(d.region))));
        return;
      }
      words[d.word_off] = std::max(words[d.word_off], d.counter_value);
      wake_satisfied(cell);
      return;
    }
    if (d.word_off + d.payload.size() > words.size()) {
      set_fault(std::make_exception_ptr(
          ProtocolFaultError(d.src, "out-of-bounds put into region " +
                                        std::to_string(d.region))));
      return;
    }
    std::copy(d.payload.begin(), d.payload.end(), words.begin() + d.word_off);
    stats_.deliveries += 1;
    stats_.bytes_delivered += d.payload.size() * 8;
    if (opts_.keep_trace) {
      trace_.push_back(TraceRecord{ps_to_us(d.t_ps), d.src, d.dst, d.region,
                                   d.word_off * 8, d.payload.size() * 8});
    }
    wake_satisfied(cell);
  }

  void wake_satisfied(Cell& cell) {
    for (std::size_t i = 0; i < cell.waiters.size();) {
      const Waiter& w = cell.waiters[i];
      const auto& words = cell.regions[w.region].words;
      const bool ok = w.counter ? (words[w.idx] >= w.expected)
                                : (word_flag(words[w.idx]) == w.expected);
      if (ok) {
        ready_.push_back(w.h);
        cell.waiters.erase(cell.waiters.begin() + i);
      } else {
        ++i;
      }
    }
  }

  void event_loop() {
    while (true) {
      while (!ready_.empty() && !fault_) {
        auto h = ready_.front();
        ready_.pop_front();
        h.resume();
      }
      if (fault_ || heap_.empty()) break;
      std::pop_heap(heap_.begin(), heap_.end(), DeliveryAfter{});
      Delivery d = std::move(heap_.back());
      heap_.pop_back();
      now_ps_ = d.t_ps;
      apply_delivery(d);
    }
  }

  ClusterTopology topo_;
  RunOptions opts_;
  std::int64_t alpha_intra_ps_ = 0;
  std::int64_t alpha_inter_ps_ = 0;
  double beta_intra_ = INFINITY;
  double beta_inter_ = INFINITY;

  std::vector<std::unique_ptr<Cell>> cells_;
  std::vector<Delivery> heap_;
  std::deque<std::coroutine_handle<>> ready_;
  std::vector<std::int64_t> pair_busy_ps_;
  std::int64_t now_ps_ = 0;
  std::uint64_t next_order_ = 0;
  std::exception_ptr fault_;
  RunStats stats_;
  std::vector<TraceRecord> trace_;
};

}  // namespace ccsim
