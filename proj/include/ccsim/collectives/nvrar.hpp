// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical recursive-doubling all-reduce (nvrar) in three phases:
//
//   1. intra-node ring reduce-scatter: rank g ends with chunk g of the
//      node-local sum (|M|/G elements),
//   2. inter-node recursive doubling on the shard: log2(N) steps; at step l
//      rank (r_n, r_g) exchanges its running partial with (r_n xor 2^l, r_g)
//      as fused 8-byte words (4B data + 4B sequence flag) and reduces,
//   3. intra-node ring all-gather of the globally reduced shards.
//
// Reuse safety across back-to-back calls comes from a per-call sequence
// number: flags embed it, every step has its own pre-allocated receive
// buffer, and before the first inter-node send each rank waits for exactly
// its xor-peers to reach the same sequence number (never a global barrier).
// The intra-node slot regions alternate by call parity instead, which the
// phase ordering makes safe without widening that peer set.
//
// Inside a call the shard is split into `blocks` independent ranges, each
// sent in chunks of at most `chunk_bytes`. A chunk reduced at step l is
// forwarded to the step l+1 peer immediately, so chunks pipeline across
// steps; per-step receive buffers are what allow a step l+1 chunk to land
// while its target is still finishing step l.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ccsim/collectives/ring.hpp"
#include "ccsim/collectives/ring_schedule.hpp"
#include "ccsim/transport.hpp"

namespace ccsim {

/// Per-rank persistent state for nvrar: sequence counter plus the
/// pre-allocated per-step send/receive buffer sets sized for `max_elems`.
template <Element T>
class NvrarAllreduce {
 public:
  NvrarAllreduce(Ctx& ctx, std::size_t max_elems) : ctx_(ctx), max_elems_(max_elems) {
    const ClusterTopology& topo = ctx.topo();
    topo.require_power_of_two_nodes("nvrar");
    n_ = topo.nodes;
    g_ = topo.gpus_per_node;
    steps_ = log2_exact(n_);
    node_ = ctx.self().node_rank;
    local_ = ctx.self().local_rank;

    shard_max_ = ceil_div(std::max<std::size_t>(max_elems, 1), g_);
    counters_ = ctx.alloc_region(topo.world_size());
    if (g_ > 1) {
      const std::size_t slot = rawwire::words_for(shard_max_) + 1;
      slot_stride_ = slot;
      for (int parity = 0; parity < 2; ++parity) {
        rs_slots_[parity] = ctx.alloc_region(static_cast<std::size_t>(g_) * slot);
        ag_slots_[parity] = ctx.alloc_region(static_cast<std::size_t>(g_) * slot);
      }
      node_ring_.reserve(g_);
      for (int g = 0; g < g_; ++g) node_ring_.push_back(RankId{node_, g});
    }
    if (steps_ > 0) {
      recv_.reserve(steps_);
      for (int l = 0; l < steps_; ++l) {
        recv_.push_back(ctx.alloc_region(shard_max_));
      }
      send_.assign(static_cast<std::size_t>(steps_) + 1,
                   std::vector<std::uint64_t>(shard_max_));
      peers_.reserve(steps_);
      for (int l = 0; l < steps_; ++l) {
        peers_.push_back(RankId{node_ ^ (1 << l), local_});
      }
    }
    acc_.resize(static_cast<std::size_t>(g_) * shard_max_);
  }

  std::uint32_t sequence() const { return seq_; }

  /// Full three-phase all-reduce. Inputs shorter than a multiple of G
  /// elements are zero-padded for the shard split and trimmed on output.
  Task run(std::span<const T> in, std::span<T> out, const NvrarConfig& cfg) {
    cfg.validate();
    if (in.size() != out.size()) {
      throw InvalidArgumentError("nvrar: input and output lengths differ");
    }
    if (in.size() > max_elems_) {
      throw InvalidArgumentError("nvrar: vector longer than the preallocated maximum");
    }
    const std::size_t n = in.size();
    if (n == 0) {
      ++seq_;
      co_return;
    }

    const std::uint32_t call = seq_ + 1;
    const std::size_t shard = ceil_div(n, g_);
    const std::size_t padded = shard * static_cast<std::size_t>(g_);

    std::copy(in.begin(), in.end(), acc_.begin());
    std::fill(acc_.begin() + n, acc_.begin() + padded, T{});
    std::span<T> work(acc_.data(), padded);

    if (g_ > 1) {
      co_await detail::ring_reduce_scatter_phase<T>(ctx_, node_ring_, local_,
                                                    rs_slots_[call % 2], slot_stride_,
                                                    work, shard, call);
    }
    std::span<T> my_shard = work.subspan(static_cast<std::size_t>(local_) * shard, shard);

    seq_ = call;

    if (steps_ > 0) {
      co_await sync_peers(call, n);
      pack_fused_into<T>(my_shard, call, send_[0].data());
      co_await rd_blocks(call, shard, cfg);
      unpack_into(std::span<const std::uint64_t>(send_[steps_].data(), shard), call,
                  my_shard);
    }

    if (g_ > 1) {
      co_await detail::ring_all_gather_phase<T>(ctx_, node_ring_, local_,
                                                ag_slots_[call % 2], slot_stride_, work,
                                                shard, call);
    }
    std::copy(acc_.begin(), acc_.begin() + n, out.begin());
  }

  /// Inter-node phase only: `packed` must hold this rank's shard packed with
  /// sequence number sequence()+1. Returns the packed reduced shard.
  Task rd_inter(std::span<const std::uint64_t> packed, std::span<std::uint64_t> out,
                const NvrarConfig& cfg) {
    cfg.validate();
    if (packed.size() != out.size() || packed.size() > shard_max_) {
      throw InvalidArgumentError("rd_inter: bad shard length");
    }
    const std::uint32_t call = ++seq_;
    const std::size_t w = packed.size();
    if (steps_ == 0) {
      std::copy(packed.begin(), packed.end(), out.begin());
      co_return;
    }
    co_await sync_peers(call, w);
    for (std::size_t i = 0; i < w; ++i) {
      if (word_flag(packed[i]) != call) {
        throw ProtocolFaultError(ctx_.global(),
                                 "rd_inter: shard packed with wrong sequence number");
      }
      send_[0][i] = packed[i];
    }
    co_await rd_blocks(call, w, cfg);
    std::copy(send_[steps_].begin(), send_[steps_].begin() + w, out.begin());
  }

  /// Step-l exchange peers, exposed for tests and diagnostics.
  const std::vector<RankId>& peers() const { return peers_; }

 private:
  static std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

  Task sync_peers(std::uint32_t call, std::size_t len) {
    co_await publish_and_wait_peers(ctx_, counters_, peers_,
                                    RingAllreduce<T>::seq_len_word(call, len),
                                    RingAllreduce<T>::seq_len_word(call, 0));
    for (const RankId& p : peers_) {
      RingAllreduce<T>::check_peer_length(ctx_, counters_, p.global(ctx_.topo()), call,
                                          len, "nvrar");
    }
  }

  Task rd_blocks(std::uint32_t call, std::size_t shard_words, const NvrarConfig& cfg) {
    const std::size_t b = static_cast<std::size_t>(cfg.blocks);
    const std::size_t chunk_words = cfg.chunk_bytes / 8;
    if (b == 1) {
      co_await rd_block(call, 0, shard_words, chunk_words);
      co_return;
    }
    std::vector<Task> children;
    children.reserve(b);
    const std::size_t base = shard_words / b;
    const std::size_t rem = shard_words % b;
    std::size_t w0 = 0;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t span = base + (i < rem ? 1 : 0);
      children.push_back(rd_block(call, w0, w0 + span, chunk_words));
      w0 += span;
    }
    co_await ctx_.run_tasks(std::move(children));
  }

  // One block's pipeline over words [w0, w1): issue all step-0 chunk puts,
  // then wait/reduce/forward chunk by chunk. The forward to step l+1 happens
  // as soon as a chunk is reduced, which is what lets the last chunk drain
  // through all steps in one chunk-time per step.
  Task rd_block(std::uint32_t call, std::size_t w0, std::size_t w1,
                std::size_t chunk_words) {
    if (w0 >= w1) co_return;
    const std::size_t cw = std::min<std::size_t>(chunk_words, w1 - w0);
    for (std::size_t q = w0; q < w1; q += cw) {
      const std::size_t len = std::min(cw, w1 - q);
      ctx_.put_words(peers_[0], recv_[0], q, send_[0].data() + q, len);
    }
    // Blocks may run as real sub-workers; scratch must be block-local.
    std::vector<std::uint64_t> inbox(cw);
    for (int l = 0; l < steps_; ++l) {
      for (std::size_t q = w0; q < w1; q += cw) {
        const std::size_t len = std::min(cw, w1 - q);
        co_await ctx_.wait_word(recv_[l], q + len - 1, call);
        ctx_.read_words(recv_[l], q, inbox.data(), len);
        for (std::size_t i = 0; i < len; ++i) {
          send_[l + 1][q + i] = fused_add<T>(inbox[i], send_[l][q + i], call);
        }
        if (l + 1 < steps_) {
          ctx_.put_words(peers_[l + 1], recv_[l + 1], q, send_[l + 1].data() + q, len);
        }
      }
    }
  }

  void unpack_into(std::span<const std::uint64_t> words, std::uint32_t call,
                   std::span<T> out) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (word_flag(words[i]) != call) {
        throw ProtocolFaultError(ctx_.global(), "nvrar unpack: stale or missing data");
      }
      out[i] = elem_from_bits<T>(word_data(words[i]));
    }
  }

  Ctx& ctx_;
  std::size_t max_elems_;
  int n_ = 1;
  int g_ = 1;
  int steps_ = 0;
  int node_ = 0;
  int local_ = 0;
  std::size_t shard_max_ = 1;
  std::size_t slot_stride_ = 0;
  RegionId counters_ = -1;
  RegionId rs_slots_[2] = {-1, -1};
  RegionId ag_slots_[2] = {-1, -1};
  std::vector<RegionId> recv_;
  std::vector<std::vector<std::uint64_t>> send_;
  std::vector<RankId> peers_;
  std::vector<RankId> node_ring_;
  std::uint32_t seq_ = 0;
  std::vector<T> acc_;
};

/// Standalone intra-node ring reduce-scatter: rank g of the participant list
/// ends with chunk g of the node-local sum. Participants must share a node.
template <Element T>
class IntraReduceScatter {
 public:
  IntraReduceScatter(Ctx& ctx, std::size_t max_elems, std::vector<RankId> participants)
      : ctx_(ctx), max_elems_(max_elems), ring_(std::move(participants)) {
    init_ring(ctx, ring_, pos_);
    ce_max_ = (std::max<std::size_t>(max_elems, 1) + ring_.size() - 1) / ring_.size();
    slot_stride_ = rawwire::words_for(ce_max_) + 1;
    counters_ = ctx.alloc_region(ctx.topo().world_size());
    slots_ = ctx.alloc_region(ring_.size() * slot_stride_);
    acc_.resize(ring_.size() * ce_max_);
  }

  /// `out` receives this rank's shard: ceil(n / G) elements.
  Task run(std::span<const T> in, std::span<T> out) {
    const std::size_t n = in.size();
    if (n == 0 || n > max_elems_) {
      throw InvalidArgumentError("intra reduce-scatter: bad vector length");
    }
    const std::size_t ce = (n + ring_.size() - 1) / ring_.size();
    if (out.size() != ce) {
      throw InvalidArgumentError("intra reduce-scatter: shard output must be ceil(n/G)");
    }
    const std::uint32_t call = ++seq_;
    co_await guard(ctx_, ring_, pos_, counters_, call, n);
    const std::size_t padded = ce * ring_.size();
    std::copy(in.begin(), in.end(), acc_.begin());
    std::fill(acc_.begin() + n, acc_.begin() + padded, T{});
    co_await detail::ring_reduce_scatter_phase<T>(ctx_, ring_, pos_, slots_, slot_stride_,
                                                  std::span<T>(acc_.data(), padded), ce,
                                                  call);
    std::copy(acc_.begin() + pos_ * ce, acc_.begin() + (pos_ + 1) * ce, out.begin());
  }

  static void init_ring(Ctx& ctx, const std::vector<RankId>& ring, int& pos) {
    if (ring.empty()) throw InvalidArgumentError("intra collective: empty participant list");
    pos = -1;
    for (std::size_t i = 0; i < ring.size(); ++i) {
      if (ring[i].node_rank != ring[0].node_rank) {
        throw ProtocolFaultError(ctx.global(),
                                 "intra collective: cross-node participant " +
                                     to_string(ring[i]));
      }
      if (ring[i] == ctx.self()) pos = static_cast<int>(i);
    }
    if (pos < 0) {
      throw ProtocolFaultError(ctx.global(), "intra collective: caller not a participant");
    }
  }

  /// Publish to the upstream neighbor, wait for the downstream consumer.
  static Task guard(Ctx& ctx, const std::vector<RankId>& ring, int pos, RegionId counters,
                    std::uint32_t call, std::size_t n) {
    const int p = static_cast<int>(ring.size());
    if (p == 1) co_return;
    const RankId prev = ring[detail::ring_mod(pos - 1, p)];
    const RankId next = ring[detail::ring_mod(pos + 1, p)];
    ctx.publish_counter(prev, counters, static_cast<std::size_t>(ctx.global()),
                        RingAllreduce<T>::seq_len_word(call, n));
    const int ng = next.global(ctx.topo());
    co_await ctx.wait_counter_ge(counters, static_cast<std::size_t>(ng),
                                 RingAllreduce<T>::seq_len_word(call, 0), ng);
    RingAllreduce<T>::check_peer_length(ctx, counters, ng, call, n, "intra");
  }

 private:
  Ctx& ctx_;
  std::size_t max_elems_;
  std::vector<RankId> ring_;
  int pos_ = 0;
  std::size_t ce_max_ = 1;
  std::size_t slot_stride_ = 2;
  RegionId counters_ = -1;
  RegionId slots_ = -1;
  std::uint32_t seq_ = 0;
  std::vector<T> acc_;
};

/// Standalone intra-node ring all-gather: concatenates equal-length shards
/// in participant order.
template <Element T>
class IntraAllGather {
 public:
  IntraAllGather(Ctx& ctx, std::size_t max_shard_elems, std::vector<RankId> participants)
      : ctx_(ctx), max_shard_(max_shard_elems), ring_(std::move(participants)) {
    IntraReduceScatter<T>::init_ring(ctx, ring_, pos_);
    slot_stride_ = rawwire::words_for(std::max<std::size_t>(max_shard_, 1)) + 1;
    counters_ = ctx.alloc_region(ctx.topo().world_size());
    slots_ = ctx.alloc_region(ring_.size() * slot_stride_);
    acc_.resize(ring_.size() * std::max<std::size_t>(max_shard_, 1));
  }

  Task run(std::span<const T> shard, std::span<T> out) {
    const std::size_t ce = shard.size();
    if (ce == 0 || ce > max_shard_) {
      throw InvalidArgumentError("intra all-gather: bad shard length");
    }
    if (out.size() != ce * ring_.size()) {
      throw InvalidArgumentError("intra all-gather: output must be G * shard");
    }
    const std::uint32_t call = ++seq_;
    co_await IntraReduceScatter<T>::guard(ctx_, ring_, pos_, counters_, call, ce);
    std::copy(shard.begin(), shard.end(), acc_.begin() + pos_ * ce);
    co_await detail::ring_all_gather_phase<T>(ctx_, ring_, pos_, slots_, slot_stride_,
                                              std::span<T>(acc_.data(), ce * ring_.size()),
                                              ce, call);
    std::copy(acc_.begin(), acc_.begin() + out.size(), out.begin());
  }

 private:
  Ctx& ctx_;
  std::size_t max_shard_;
  std::vector<RankId> ring_;
  int pos_ = 0;
  std::size_t slot_stride_ = 2;
  RegionId counters_ = -1;
  RegionId slots_ = -1;
  std::uint32_t seq_ = 0;
  std::vector<T> acc_;
};

}  // namespace ccsim
