// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Maps decode-phase inference workloads to all-reduce message sizes and
// models GEMM cost with a coarse tile-count model. The GEMM model exists to
// reproduce the tiling asymmetry between prefill-shaped and decode-shaped
// matmuls, not absolute kernel times.

#pragma once

#include <cstdint>

#include "ccsim/cost_model.hpp"
#include "ccsim/errors.hpp"
#include "ccsim/topology.hpp"

namespace ccsim {

/// Decode-phase workload parameters for a tensor-parallel transformer.
struct DecodeWorkload {
  std::uint64_t batch_size = 1;
  std::uint64_t hidden_dim = 1;
  std::uint64_t bytes_per_element = 2;  // 2 = bf16, 4 = fp32
  std::uint64_t num_layers = 1;

  void validate() const {
    if (batch_size < 1 || hidden_dim < 1 || num_layers < 1) {
      throw InvalidArgumentError("workload: batch, hidden, layers must be >= 1");
    }
    if (bytes_per_element != 2 && bytes_per_element != 4) {
      throw InvalidArgumentError("workload: bytes_per_element must be 2 or 4");
    }
  }
};

struct GemmShape {
  std::uint64_t m = 1;
  std::uint64_t n = 1;
  std::uint64_t k = 1;

  void validate() const {
    if (m < 1 || n < 1 || k < 1) {
      throw InvalidArgumentError("gemm shape: M, N, K must be >= 1");
    }
  }
};

/// Tiling-aware GEMM cost parameters: the kernel launches
/// ceil(M/tile_m) * ceil(N/tile_n) tiles, each costing
/// time_per_tile_k_unit seconds per unit of K.
struct GemmMachine {
  std::uint64_t tile_m = 128;
  std::uint64_t tile_n = 128;
  double time_per_tile_k_unit = 0.0;  // seconds

  void validate() const {
    if (tile_m < 1 || tile_n < 1) {
      throw InvalidArgumentError("gemm machine: tiles must be >= 1");
    }
    if (!(time_per_tile_k_unit >= 0.0)) {
      throw InvalidArgumentError("gemm machine: tile cost must be >= 0");
    }
  }
};

/// Per-layer all-reduce payload in the decode phase: batch x hidden,
/// at the element width of the activation dtype.
inline std::uint64_t decode_msg_bytes(const DecodeWorkload& w) {
  w.validate();
  return w.batch_size * w.hidden_dim * w.bytes_per_element;
}

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

/// Tile-count GEMM time. Constant under any M reduction within one tile,
/// exactly linear in K.
inline double gemm_time(const GemmShape& shape, const GemmMachine& machine) {
  shape.validate();
  machine.validate();
  const double tiles = static_cast<double>(ceil_div(shape.m, machine.tile_m)) *
                       static_cast<double>(ceil_div(shape.n, machine.tile_n));
  return tiles * static_cast<double>(shape.k) * machine.time_per_tile_k_unit;
}

struct TpStepEstimate {
  double step_time = 0.0;  // seconds, all layers
  double comm_time = 0.0;  // seconds, all layers
  double gemm_time = 0.0;  // seconds, all layers
};

/// Tensor-parallel decode-step estimate: per layer, one GEMM with its K
/// dimension sharded across all NG ranks plus two all-reduces of the decode
/// message (attention and MLP output projections).
inline TpStepEstimate tp_decode_step_time(const DecodeWorkload& w, const GemmShape& shape,
                                          const GemmMachine& machine,
                                          const ClusterTopology& topo,
                                          const CostParams& params, Algorithm algo) {
  w.validate();
  shape.validate();
  machine.validate();
  topo.validate();
  const double ng = static_cast<double>(topo.world_size());
  const double tiles = static_cast<double>(ceil_div(shape.m, machine.tile_m)) *
                       static_cast<double>(ceil_div(shape.n, machine.tile_n));
  const double gemm_shard = tiles * (static_cast<double>(shape.k) / ng) *
                            machine.time_per_tile_k_unit;
  double comm = 0.0;
  if (topo.world_size() > 1) {
    comm = 2.0 * predict(algo, topo, params, decode_msg_bytes(w)).total;
  }
  const double layers = static_cast<double>(w.num_layers);
  TpStepEstimate e;
  e.gemm_time = layers * gemm_shard;
  e.comm_time = layers * comm;
  e.step_time = e.gemm_time + e.comm_time;
  return e;
}

/// Speedup of `algo` over `baseline` on the same workload: baseline step
/// time divided by algo step time. speedup_vs(self) == 1.
inline double tp_decode_speedup_vs(const DecodeWorkload& w, const GemmShape& shape,
                                   const GemmMachine& machine, const ClusterTopology& topo,
                                   const CostParams& params, Algorithm algo,
                                   Algorithm baseline) {
  const double mine = tp_decode_step_time(w, shape, machine, topo, params, algo).step_time;
  const double base =
      tp_decode_step_time(w, shape, machine, topo, params, baseline).step_time;
  if (mine == base) return 1.0;  // covers speedup_vs(self), including zero-cost configs
  return base / mine;
}

}  // namespace ccsim
