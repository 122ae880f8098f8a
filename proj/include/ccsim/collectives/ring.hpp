// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat ring all-reduce over all NG ranks: reduce-scatter then all-gather,
// 2(NG-1) sends per rank. Ring positions are laid out local-rank-major
// (position p -> rank (p mod N, p div N)) so that for N >= 2 every hop
// crosses nodes, matching the cost model's all-inter-tier assumption.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ccsim/collectives/ring_schedule.hpp"
#include "ccsim/transport.hpp"

namespace ccsim {

template <Element T>
class RingAllreduce {
 public:
  RingAllreduce(Ctx& ctx, std::size_t max_elems) : ctx_(ctx), max_elems_(max_elems) {
    const ClusterTopology& topo = ctx.topo();
    p_ = topo.world_size();
    ring_.reserve(p_);
    for (int p = 0; p < p_; ++p) {
      ring_.push_back(RankId{p % topo.nodes, p / topo.nodes});
    }
    pos_ = ctx.self().local_rank * topo.nodes + ctx.self().node_rank;
    ce_max_ = ceil_div(std::max<std::size_t>(max_elems, 1), p_);
    slot_stride_ = rawwire::words_for(ce_max_) + 1;
    counters_ = ctx.alloc_region(p_);
    rs_slots_ = ctx.alloc_region(p_ * slot_stride_);
    ag_slots_ = ctx.alloc_region(p_ * slot_stride_);
    acc_.resize(static_cast<std::size_t>(p_) * ce_max_);
  }

  std::uint32_t sequence() const { return seq_; }

  Task run(std::span<const T> in, std::span<T> out) {
    if (in.size() != out.size()) {
      throw InvalidArgumentError("ring: input and output lengths differ");
    }
    if (in.size() > max_elems_) {
      throw InvalidArgumentError("ring: vector longer than the preallocated maximum");
    }
    const std::size_t n = in.size();
    if (p_ == 1 || n == 0) {
      std::copy(in.begin(), in.end(), out.begin());
      co_return;
    }

    const std::uint32_t call = ++seq_;
    // Reuse guard: tell the upstream neighbor we reached this call (so it may
    // write into our slots) and wait for the downstream consumer of our own
    // writes to have finished the previous call. Also carries the vector
    // length so mismatched calls fault instead of deadlocking.
    const int me = ctx_.global();
    const int next = ring_[detail::ring_mod(pos_ + 1, p_)].global(ctx_.topo());
    ctx_.publish_counter(ring_[detail::ring_mod(pos_ - 1, p_)], counters_,
                         static_cast<std::size_t>(me), seq_len_word(call, n));
    co_await ctx_.wait_counter_ge(counters_, static_cast<std::size_t>(next),
                                  seq_len_word(call, 0), next);
    check_peer_length(ctx_, counters_, next, call, n, "ring");

    const std::size_t ce = ceil_div(n, p_);
    const std::size_t padded = ce * static_cast<std::size_t>(p_);
    std::copy(in.begin(), in.end(), acc_.begin());
    std::fill(acc_.begin() + n, acc_.begin() + padded, T{});

    std::span<T> work(acc_.data(), padded);
    co_await detail::ring_reduce_scatter_phase<T>(ctx_, ring_, pos_, rs_slots_,
                                                  slot_stride_, work, ce, call);
    co_await detail::ring_all_gather_phase<T>(ctx_, ring_, pos_, ag_slots_, slot_stride_,
                                              work, ce, call);
    std::copy(acc_.begin(), acc_.begin() + n, out.begin());
  }

  /// Global rank at a ring position (shared with test oracles).
  static RankId position_rank(int pos, const ClusterTopology& topo) {
    return RankId{pos % topo.nodes, pos / topo.nodes};
  }

  static std::uint64_t seq_len_word(std::uint32_t seq, std::size_t len) {
    return (static_cast<std::uint64_t>(seq) << 32) | (len & 0xffffffffull);
  }

  static void check_peer_length(Ctx& ctx, RegionId counters, int peer, std::uint32_t call,
                                std::size_t n, const char* who) {
    const std::uint64_t v = ctx.load_word(counters, static_cast<std::size_t>(peer));
    if ((v >> 32) == call && (v & 0xffffffffull) != (n & 0xffffffffull)) {
      throw ProtocolFaultError(ctx.global(), std::string(who) +
                                                 ": vector length mismatch with rank " +
                                                 std::to_string(peer));
    }
  }

 private:
  static std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

  Ctx& ctx_;
  std::size_t max_elems_;
  int p_ = 1;
  int pos_ = 0;
  std::vector<RankId> ring_;
  std::size_t ce_max_ = 1;
  std::size_t slot_stride_ = 2;
  RegionId counters_ = -1;
  RegionId rs_slots_ = -1;
  RegionId ag_slots_ = -1;
  std::uint32_t seq_ = 0;
  std::vector<T> acc_;
};

}  // namespace ccsim
