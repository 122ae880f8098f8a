// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ccsim/concurrent_transport.hpp"
#include "ccsim/transport.hpp"
#include "ccsim/virtual_transport.hpp"

namespace ccsim {

/// Runs one program instance per rank over the selected transport and
/// returns per-rank completion times plus transfer statistics. Protocol
/// faults and deadlocks surface as exceptions.
inline RunReport run_ranks(const ClusterTopology& topo, const CostParams& params,
                           TransportMode mode, const RunOptions& opts,
                           const RankProgram& program) {
  if (mode == TransportMode::VirtualTime) {
    VirtualTimeEngine engine(topo, params, opts);
    return engine.run(program);
  }
  ConcurrentEngine engine(topo, opts);
  return engine.run(program);
}

}  // namespace ccsim
