// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference reductions for the collective tests. These recompute
// expected results from first principles (padding, chunk ownership, and the
// documented reduction orders) without touching the library's schedules.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ccsim/collectives/fused.hpp"
#include "ccsim/topology.hpp"

namespace oracles {

using ccsim::ClusterTopology;
using ccsim::Element;
using ccsim::RankId;

/// Elementwise sum over ranks in global-rank order. Exact for int32 (wrapping
/// addition commutes); the any-order float reference for tolerance checks.
template <Element T>
std::vector<T> serial_sum(const std::vector<std::vector<T>>& inputs) {
  std::vector<T> acc = inputs.at(0);
  for (std::size_t r = 1; r < inputs.size(); ++r) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] = ccsim::elem_add(acc[i], inputs[r][i]);
    }
  }
  return acc;
}

namespace detail {

template <Element T>
std::vector<std::vector<T>> padded(const std::vector<std::vector<T>>& inputs,
                                   std::size_t padded_len) {
  std::vector<std::vector<T>> out = inputs;
  for (auto& v : out) v.resize(padded_len, T{});
  return out;
}

// Ring reduce-scatter fold for chunk c over `p` participants indexed by
// position: contributions enter at position c+1 and accumulate around the
// ring, the owner adding its own copy last.
template <Element T>
void ring_chunk_fold(const std::vector<std::vector<T>>& by_pos, std::size_t c,
                     std::size_t ce, std::vector<T>& out) {
  const std::size_t p = by_pos.size();
  for (std::size_t i = 0; i < ce; ++i) {
    const std::size_t e = c * ce + i;
    T f = by_pos[(c + 1) % p][e];
    for (std::size_t j = 2; j < p; ++j) {
      f = ccsim::elem_add(f, by_pos[(c + j) % p][e]);
    }
    out[e] = p == 1 ? by_pos[c][e] : ccsim::elem_add(f, by_pos[c][e]);
  }
}

}  // namespace detail

/// Flat ring all-reduce in its documented order. Inputs indexed by global
/// rank; positions are local-rank-major.
template <Element T>
std::vector<T> ring_order_sum(const std::vector<std::vector<T>>& inputs,
                              const ClusterTopology& topo) {
  const std::size_t p = inputs.size();
  const std::size_t n = inputs[0].size();
  const std::size_t ce = (n + p - 1) / p;
  std::vector<std::vector<T>> by_pos(p);
  for (std::size_t pos = 0; pos < p; ++pos) {
    const RankId r{static_cast<int>(pos) % topo.nodes,
                   static_cast<int>(pos) / topo.nodes};
    by_pos[pos] = inputs[r.global(topo)];
    by_pos[pos].resize(ce * p, T{});
  }
  std::vector<T> result(ce * p);
  for (std::size_t c = 0; c < p; ++c) detail::ring_chunk_fold(by_pos, c, ce, result);
  result.resize(n);
  return result;
}

/// Intra-node ring reduce-scatter: the full reduced vector in ring order
/// (chunk g is rank g's shard).
template <Element T>
std::vector<T> intra_rs_sum(const std::vector<std::vector<T>>& node_inputs,
                            std::size_t n) {
  const std::size_t g = node_inputs.size();
  const std::size_t ce = (n + g - 1) / g;
  auto by_pos = detail::padded(node_inputs, ce * g);
  std::vector<T> result(ce * g);
  for (std::size_t c = 0; c < g; ++c) detail::ring_chunk_fold(by_pos, c, ce, result);
  return result;
}

/// Hierarchical recursive-doubling all-reduce in its documented order:
/// intra-node ring reduce-scatter folds, then one add per doubling step.
template <Element T>
std::vector<T> nvrar_order_sum(const std::vector<std::vector<T>>& inputs,
                               const ClusterTopology& topo) {
  const std::size_t n = inputs[0].size();
  const int big_n = topo.nodes;
  const int g = topo.gpus_per_node;
  const std::size_t shard = (n + g - 1) / g;
  const std::size_t padded_len = shard * g;

  std::vector<std::vector<T>> node_vec(big_n);
  for (int node = 0; node < big_n; ++node) {
    std::vector<std::vector<T>> local(g);
    for (int lr = 0; lr < g; ++lr) {
      local[lr] = inputs[RankId{node, lr}.global(topo)];
      local[lr].resize(padded_len, T{});
    }
    node_vec[node].resize(padded_len);
    for (int c = 0; c < g; ++c) {
      detail::ring_chunk_fold(local, c, shard, node_vec[node]);
    }
  }
  for (int bit = 1; bit < big_n; bit <<= 1) {
    std::vector<std::vector<T>> next = node_vec;
    for (int node = 0; node < big_n; ++node) {
      for (std::size_t i = 0; i < padded_len; ++i) {
        next[node][i] = ccsim::elem_add(node_vec[node ^ bit][i], node_vec[node][i]);
      }
    }
    node_vec = std::move(next);
  }
  node_vec[0].resize(n);
  return node_vec[0];
}

/// Tree all-reduce in its documented order: chain fold to each node leader,
/// then one add per binomial round.
template <Element T>
std::vector<T> tree_order_sum(const std::vector<std::vector<T>>& inputs,
                              const ClusterTopology& topo) {
  const std::size_t n = inputs[0].size();
  const int big_n = topo.nodes;
  const int g = topo.gpus_per_node;
  std::vector<std::vector<T>> t(big_n);
  for (int node = 0; node < big_n; ++node) {
    t[node] = inputs[RankId{node, g - 1}.global(topo)];
    for (int lr = g - 2; lr >= 0; --lr) {
      const auto& own = inputs[RankId{node, lr}.global(topo)];
      for (std::size_t i = 0; i < n; ++i) t[node][i] = ccsim::elem_add(own[i], t[node][i]);
    }
  }
  for (int bit = 1; bit < big_n; bit <<= 1) {
    for (int node = 0; node < big_n; node += 2 * bit) {
      for (std::size_t i = 0; i < n; ++i) {
        t[node][i] = ccsim::elem_add(t[node][i], t[node + bit][i]);
      }
    }
  }
  return t[0];
}

template <Element T>
std::vector<std::vector<T>> random_inputs(int ranks, std::size_t n, std::uint64_t seed) {
  std::vector<std::vector<T>> inputs(ranks);
  for (int r = 0; r < ranks; ++r) {
    std::mt19937_64 rng(seed * 7919 + r);
    inputs[r].resize(n);
    for (auto& v : inputs[r]) {
      if constexpr (std::same_as<T, float>) {
        // Positive, O(1) values keep reduction-order differences well inside
        // the relative tolerance the float tests assert.
        v = std::uniform_real_distribution<float>(0.25f, 2.0f)(rng);
      } else {
        v = static_cast<std::int32_t>(rng());
      }
    }
  }
  return inputs;
}

}  // namespace oracles
