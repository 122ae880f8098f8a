// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared ring schedules. Both the flat ring all-reduce and the intra-node
// phases of the hierarchical all-reduce run these over their own participant
// lists and slot regions.
//
// Slot layout: one slot per ring position, `slot_stride` words each. A slot
// holds the raw chunk (two elements per word) followed by one flag word.
// Position p ends the reduce-scatter owning chunk p.
//
// Reduction order (pinned for reproducible float32 runs): chunk c collects
// contributions along the ring starting at position c+1, each hop adding the
// local copy to the partial received so far; the owner applies its own copy
// last. In symbols: c owns in[c] + (in[c-1] + (... + (in[c+2] + in[c+1]))).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ccsim/collectives/fused.hpp"
#include "ccsim/transport.hpp"

namespace ccsim::detail {

inline int ring_mod(int a, int m) { return ((a % m) + m) % m; }

/// Reduce-scatter over `ring`: G-1 steps, each sending one chunk's running
/// partial to the next position. `acc` holds ring.size()*ce elements and is
/// reduced in place; afterwards chunk `pos` of acc is globally reduced.
template <Element T>
Task ring_reduce_scatter_phase(Ctx& ctx, const std::vector<RankId>& ring, int pos,
                               RegionId slots, std::size_t slot_stride, std::span<T> acc,
                               std::size_t ce, std::uint32_t flag) {
  const int p = static_cast<int>(ring.size());
  if (p <= 1 || ce == 0) co_return;
  const std::size_t cw = rawwire::words_for(ce);
  const RankId next = ring[ring_mod(pos + 1, p)];
  std::vector<std::uint64_t> wire(cw + 1);
  std::vector<std::uint64_t> inbox(cw);
  std::vector<T> incoming(ce);
  for (int s = 0; s < p - 1; ++s) {
    const int sc = ring_mod(pos - 1 - s, p);
    rawwire::pack<T>(acc.subspan(sc * ce, ce), wire.data());
    wire[cw] = make_word(0, flag);
    ctx.put_words(next, slots, sc * slot_stride, wire.data(), cw + 1);

    const int rc = ring_mod(pos - 2 - s, p);
    co_await ctx.wait_word(slots, rc * slot_stride + cw, flag);
    ctx.read_words(slots, rc * slot_stride, inbox.data(), cw);
    rawwire::unpack<T>(inbox.data(), incoming);
    for (std::size_t i = 0; i < ce; ++i) {
      acc[rc * ce + i] = elem_add(acc[rc * ce + i], incoming[i]);
    }
  }
}

/// All-gather over `ring`: G-1 steps circulating each owned chunk. On entry
/// chunk `pos` of acc must be valid; on exit all chunks are.
template <Element T>
Task ring_all_gather_phase(Ctx& ctx, const std::vector<RankId>& ring, int pos,
                           RegionId slots, std::size_t slot_stride, std::span<T> acc,
                           std::size_t ce, std::uint32_t flag) {
  const int p = static_cast<int>(ring.size());
  if (p <= 1 || ce == 0) co_return;
  const std::size_t cw = rawwire::words_for(ce);
  const RankId next = ring[ring_mod(pos + 1, p)];
  std::vector<std::uint64_t> wire(cw + 1);
  std::vector<std::uint64_t> inbox(cw);
  for (int s = 0; s < p - 1; ++s) {
    const int sc = ring_mod(pos - s, p);
    rawwire::pack<T>(acc.subspan(sc * ce, ce), wire.data());
    wire[cw] = make_word(0, flag);
    ctx.put_words(next, slots, sc * slot_stride, wire.data(), cw + 1);

    const int rc = ring_mod(pos - 1 - s, p);
    co_await ctx.wait_word(slots, rc * slot_stride + cw, flag);
    ctx.read_words(slots, rc * slot_stride, inbox.data(), cw);
    rawwire::unpack<T>(inbox.data(), acc.subspan(rc * ce, ce));
  }
}

}  // namespace ccsim::detail
