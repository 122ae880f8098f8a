// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical tree all-reduce baseline: an intra-node chain reduce to each
// node leader, a binomial-tree reduce across node leaders to node 0, and the
// mirrored broadcast back out. A single binary tree (not a double tree): in
// the small-message latency regime its critical path matches the model, and
// that regime is what this baseline exists for.
//
// Reduction order: within a node, rank g adds the accumulated partial of
// rank g+1 into its own copy (leader ends with in_0 + (in_1 + (... ))); in
// round i across nodes, node n adds node (n + 2^i)'s partial into its own.

#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "ccsim/collectives/ring_schedule.hpp"
#include "ccsim/collectives/ring.hpp"
#include "ccsim/transport.hpp"

namespace ccsim {

template <Element T>
class TreeAllreduce {
 public:
  TreeAllreduce(Ctx& ctx, std::size_t max_elems) : ctx_(ctx), max_elems_(max_elems) {
    const ClusterTopology& topo = ctx.topo();
    topo.require_power_of_two_nodes("tree all-reduce");
    n_ = topo.nodes;
    g_ = topo.gpus_per_node;
    rounds_ = log2_exact(n_);
    node_ = ctx.self().node_rank;
    local_ = ctx.self().local_rank;

    vw_max_ = rawwire::words_for(std::max<std::size_t>(max_elems, 1));
    const std::size_t slot = vw_max_ + 1;
    counters_ = ctx.alloc_region(topo.world_size());
    chain_up_ = ctx.alloc_region(slot);
    chain_down_ = ctx.alloc_region(slot);
    reduce_slots_ = ctx.alloc_region(static_cast<std::size_t>(rounds_) * slot);
    bcast_ = ctx.alloc_region(slot);
    slot_stride_ = slot;

    // Every rank this rank exchanges data with, used by the reuse guard.
    if (local_ > 0) partners_.push_back(RankId{node_, local_ - 1});
    if (local_ < g_ - 1) partners_.push_back(RankId{node_, local_ + 1});
    if (local_ == 0) {
      for (int i = 0; i < rounds_; ++i) {
        const int span = 1 << i;
        if ((node_ & (2 * span - 1)) == span) {
          partners_.push_back(RankId{node_ - span, 0});  // reduce target / bcast source
          break;
        }
        if ((node_ & (2 * span - 1)) == 0) {
          partners_.push_back(RankId{node_ + span, 0});  // reduce source / bcast target
        }
      }
    }
    acc_.resize(std::max<std::size_t>(max_elems, 1));
  }

  std::uint32_t sequence() const { return seq_; }

  Task run(std::span<const T> in, std::span<T> out) {
    if (in.size() != out.size()) {
      throw InvalidArgumentError("tree: input and output lengths differ");
    }
    if (in.size() > max_elems_) {
      throw InvalidArgumentError("tree: vector longer than the preallocated maximum");
    }
    const std::size_t n = in.size();
    if (ctx_.world() == 1 || n == 0) {
      std::copy(in.begin(), in.end(), out.begin());
      co_return;
    }

    const std::uint32_t call = ++seq_;
    for (const RankId& p : partners_) {
      ctx_.publish_counter(p, counters_, static_cast<std::size_t>(ctx_.global()),
                           RingAllreduce<T>::seq_len_word(call, n));
    }
    for (const RankId& p : partners_) {
      const int pg = p.global(ctx_.topo());
      co_await ctx_.wait_counter_ge(counters_, static_cast<std::size_t>(pg),
                                    RingAllreduce<T>::seq_len_word(call, 0), pg);
      RingAllreduce<T>::check_peer_length(ctx_, counters_, pg, call, n, "tree");
    }

    std::copy(in.begin(), in.end(), acc_.begin());
    std::span<T> acc(acc_.data(), n);
    const std::size_t vw = rawwire::words_for(n);

    // Chain reduce toward the node leader.
    if (g_ > 1) {
      if (local_ < g_ - 1) {
        co_await recv_into(chain_up_, 0, call, acc, /*reduce=*/true);
      }
      if (local_ > 0) {
        send_to(RankId{node_, local_ - 1}, chain_up_, 0, call, acc, vw);
      }
    }

    if (local_ == 0 && n_ > 1) {
      // Binomial reduce to node 0.
      for (int i = 0; i < rounds_; ++i) {
        const int span = 1 << i;
        if ((node_ & (2 * span - 1)) == span) {
          send_to(RankId{node_ - span, 0}, reduce_slots_,
                  static_cast<std::size_t>(i) * slot_stride_, call, acc, vw);
          break;
        }
        if ((node_ & (2 * span - 1)) == 0) {
          co_await recv_into(reduce_slots_, static_cast<std::size_t>(i) * slot_stride_,
                             call, acc, /*reduce=*/true);
        }
      }
      // Mirrored broadcast from node 0.
      if (node_ != 0) {
        co_await recv_into(bcast_, 0, call, acc, /*reduce=*/false);
      }
      const int received_round = node_ == 0 ? rounds_ : lowest_bit(node_);
      for (int j = received_round - 1; j >= 0; --j) {
        send_to(RankId{node_ + (1 << j), 0}, bcast_, 0, call, acc, vw);
      }
    }

    // Chain broadcast away from the node leader.
    if (g_ > 1) {
      if (local_ > 0) {
        co_await recv_into(chain_down_, 0, call, acc, /*reduce=*/false);
      }
      if (local_ < g_ - 1) {
        send_to(RankId{node_, local_ + 1}, chain_down_, 0, call, acc, vw);
      }
    }

    std::copy(acc_.begin(), acc_.begin() + n, out.begin());
  }

 private:
  static int lowest_bit(int v) {
    int i = 0;
    while (((v >> i) & 1) == 0) ++i;
    return i;
  }

  void send_to(RankId dst, RegionId region, std::size_t word_off, std::uint32_t call,
               std::span<const T> acc, std::size_t vw) {
    wire_.resize(vw + 1);
    rawwire::pack<T>(acc, wire_.data());
    wire_[vw] = make_word(0, call);
    ctx_.put_words(dst, region, word_off, wire_.data(), vw + 1);
  }

  Task recv_into(RegionId region, std::size_t word_off, std::uint32_t call,
                 std::span<T> acc, bool reduce) {
    const std::size_t vw = rawwire::words_for(acc.size());
    co_await ctx_.wait_word(region, word_off + vw, call);
    inbox_.resize(vw);
    ctx_.read_words(region, word_off, inbox_.data(), vw);
    if (reduce) {
      incoming_.resize(acc.size());
      rawwire::unpack<T>(inbox_.data(), std::span<T>(incoming_.data(), acc.size()));
      for (std::size_t i = 0; i < acc.size(); ++i) {
        acc[i] = elem_add(acc[i], incoming_[i]);
      }
    } else {
      rawwire::unpack<T>(inbox_.data(), acc);
    }
  }

  Ctx& ctx_;
  std::size_t max_elems_;
  int n_ = 1;
  int g_ = 1;
  int rounds_ = 0;
  int node_ = 0;
  int local_ = 0;
  std::size_t vw_max_ = 1;
  std::size_t slot_stride_ = 2;
  RegionId counters_ = -1;
  RegionId chain_up_ = -1;
  RegionId chain_down_ = -1;
  RegionId reduce_slots_ = -1;
  RegionId bcast_ = -1;
  std::uint32_t seq_ = 0;
  std::vector<RankId> partners_;
  std::vector<T> acc_;
  std::vector<std::uint64_t> wire_;
  std::vector<std::uint64_t> inbox_;
  std::vector<T> incoming_;
};

}  // namespace ccsim
