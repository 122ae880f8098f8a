// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "ccsim/errors.hpp"

namespace ccsim {

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

/// Exact log2 of a power of two.
inline int log2_exact(int v) {
  int l = 0;
  while ((1 << l) < v) ++l;
  return l;
}

/// A cluster of `nodes` machines with `gpus_per_node` ranks each, connected
/// by a fast intra-node tier and a slower inter-node tier.
struct ClusterTopology {
  int nodes = 1;
  int gpus_per_node = 1;

  int world_size() const { return nodes * gpus_per_node; }

  void validate() const {
    if (nodes < 1 || gpus_per_node < 1) {
      throw InvalidArgumentError("topology: nodes and gpus_per_node must be >= 1");
    }
  }

  /// Recursive-doubling and tree schedules pair nodes bitwise, so they are
  /// only defined for power-of-two node counts.
  void require_power_of_two_nodes(const char* who) const {
    validate();
    if (!is_power_of_two(nodes)) {
      throw InvalidTopologyError(std::string(who) +
                                 ": node count must be a power of two, got " +
                                 std::to_string(nodes));
    }
  }

  friend bool operator==(const ClusterTopology&, const ClusterTopology&) = default;
};

/// Rank identity as a (node_rank, local_rank) pair. Global ids enumerate
/// ranks node-major: global = node_rank * G + local_rank.
struct RankId {
  int node_rank = 0;
  int local_rank = 0;

  int global(const ClusterTopology& topo) const {
    return node_rank * topo.gpus_per_node + local_rank;
  }

  static RankId from_global(int global, const ClusterTopology& topo) {
    return RankId{global / topo.gpus_per_node, global % topo.gpus_per_node};
  }

  bool same_node(const RankId& other) const { return node_rank == other.node_rank; }

  friend bool operator==(const RankId&, const RankId&) = default;
};

inline std::string to_string(const RankId& r) {
  return "(" + std::to_string(r.node_rank) + "," + std::to_string(r.local_rank) + ")";
}

}  // namespace ccsim
