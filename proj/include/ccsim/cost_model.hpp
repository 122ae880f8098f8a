// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form alpha-beta latency/bandwidth models for the collectives in this
// library. Sending b bytes over a link costs alpha + b/beta; algorithm costs
// are sums of such terms over the schedule's critical path.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "ccsim/errors.hpp"
#include "ccsim/topology.hpp"

namespace ccsim {

/// Per-tier link parameters. Alphas in seconds, betas in bytes/second.
/// `beta = infinity` is a valid value and makes bandwidth terms exactly zero,
/// which is what latency-only validation runs use.
struct CostParams {
  double alpha_intra = 0.0;
  double alpha_inter = 0.0;
  double beta_intra = INFINITY;
  double beta_inter = INFINITY;
  // Wire-byte inflation from fusing a 4-byte flag with each 4-byte data word.
  double eta = 2.0;

  void validate() const {
    auto bad = [](double v) { return std::isnan(v) || v < 0.0; };
    if (bad(alpha_intra) || bad(alpha_inter) || !std::isfinite(alpha_intra) ||
        !std::isfinite(alpha_inter)) {
      throw InvalidArgumentError("cost params: alphas must be finite and >= 0");
    }
    if (std::isnan(beta_intra) || std::isnan(beta_inter) || beta_intra <= 0.0 ||
        beta_inter <= 0.0) {
      throw InvalidArgumentError("cost params: betas must be > 0 (infinity allowed)");
    }
    if (std::isnan(eta) || eta <= 1.0 || eta > 2.0) {
      throw InvalidArgumentError("cost params: eta must lie in (1, 2]");
    }
    // The two tiers must not be inverted. Equality is allowed so that both
    // betas can be infinite in latency-only setups.
    if (alpha_intra > alpha_inter) {
      throw InvalidArgumentError("cost params: alpha_intra must be <= alpha_inter");
    }
    if (beta_intra < beta_inter) {
      throw InvalidArgumentError("cost params: beta_intra must be >= beta_inter");
    }
  }
};

/// A predicted time split into its message-count (latency) and byte-volume
/// (bandwidth) components. `total` is always their exact sum.
struct ModelPrediction {
  double latency_term = 0.0;    // seconds
  double bandwidth_term = 0.0;  // seconds
  double total = 0.0;           // seconds

  static ModelPrediction of(double latency, double bandwidth) {
    return ModelPrediction{latency, bandwidth, latency + bandwidth};
  }
};

enum class Algorithm { Ring, Tree, Nvrar };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Ring: return "ring";
    case Algorithm::Tree: return "tree";
    case Algorithm::Nvrar: return "nvrar";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "ring") return Algorithm::Ring;
  if (s == "tree") return Algorithm::Tree;
  if (s == "nvrar") return Algorithm::Nvrar;
  throw InvalidArgumentError("unknown algorithm '" + s + "' (expected ring|tree|nvrar)");
}

namespace detail {
inline void check_prediction(const ModelPrediction& p) {
  if (std::isnan(p.latency_term) || std::isnan(p.bandwidth_term)) {
    throw InvalidArgumentError("cost model: parameters produce NaN");
  }
}
}  // namespace detail

/// Flat ring all-reduce over all NG ranks: reduce-scatter plus all-gather,
/// 2(NG-1) steps, every hop billed at the inter-node tier.
inline ModelPrediction ring_allreduce_time(const ClusterTopology& topo,
                                           const CostParams& params,
                                           std::uint64_t msg_bytes) {
  topo.validate();
  params.validate();
  const double ng = static_cast<double>(topo.world_size());
  const double lat = 2.0 * (ng - 1.0) * params.alpha_inter;
  const double bw =
      2.0 * ((ng - 1.0) / ng) * (static_cast<double>(msg_bytes) / params.beta_inter);
  auto p = ModelPrediction::of(lat, bw);
  detail::check_prediction(p);
  return p;
}

/// Hierarchical tree all-reduce: intra-node chain reduce to a node leader,
/// binary-tree reduce/broadcast across nodes, chain broadcast back. Only the
/// inter-node bandwidth term is modeled; the intra tier is treated as free of
/// byte cost (beta_intra >> beta_inter).
inline ModelPrediction tree_allreduce_time(const ClusterTopology& topo,
                                           const CostParams& params,
                                           std::uint64_t msg_bytes) {
  topo.require_power_of_two_nodes("tree model");
  params.validate();
  const double n = static_cast<double>(topo.nodes);
  const double g = static_cast<double>(topo.gpus_per_node);
  const double lat = 2.0 * (g - 1.0) * params.alpha_intra +
                     2.0 * static_cast<double>(log2_exact(topo.nodes)) * params.alpha_inter;
  const double bw =
      2.0 * ((n - 1.0) / n) * (static_cast<double>(msg_bytes) / params.beta_inter);
  auto p = ModelPrediction::of(lat, bw);
  detail::check_prediction(p);
  return p;
}

/// Intra-node ring reduce-scatter over G ranks.
inline ModelPrediction reduce_scatter_time(const ClusterTopology& topo,
                                           const CostParams& params,
                                           std::uint64_t msg_bytes) {
  topo.validate();
  params.validate();
  const double g = static_cast<double>(topo.gpus_per_node);
  const double lat = (g - 1.0) * params.alpha_intra;
  const double bw =
      ((g - 1.0) / g) * (static_cast<double>(msg_bytes) / params.beta_intra);
  auto p = ModelPrediction::of(lat, bw);
  detail::check_prediction(p);
  return p;
}

/// Intra-node ring all-gather; symmetric to the reduce-scatter.
inline ModelPrediction all_gather_time(const ClusterTopology& topo,
                                       const CostParams& params,
                                       std::uint64_t msg_bytes) {
  return reduce_scatter_time(topo, params, msg_bytes);
}

/// Hierarchical recursive-doubling all-reduce: intra-node reduce-scatter,
/// log2(N) inter-node exchange steps on the |M|/G shard (inflated by eta for
/// the fused data+flag framing), intra-node all-gather.
inline ModelPrediction nvrar_time(const ClusterTopology& topo, const CostParams& params,
                                  std::uint64_t msg_bytes) {
  topo.require_power_of_two_nodes("nvrar model");
  params.validate();
  const double n = static_cast<double>(topo.nodes);
  const double g = static_cast<double>(topo.gpus_per_node);
  const double m = static_cast<double>(msg_bytes);
  const double lat = 2.0 * (g - 1.0) * params.alpha_intra +
                     static_cast<double>(log2_exact(topo.nodes)) * params.alpha_inter;
  const double bw = (m / g) * (2.0 * (g - 1.0) / params.beta_intra +
                               (n - 1.0) * params.eta / (n * params.beta_inter));
  auto p = ModelPrediction::of(lat, bw);
  detail::check_prediction(p);
  return p;
}

inline ModelPrediction predict(Algorithm algo, const ClusterTopology& topo,
                               const CostParams& params, std::uint64_t msg_bytes) {
  switch (algo) {
    case Algorithm::Ring: return ring_allreduce_time(topo, params, msg_bytes);
    case Algorithm::Tree: return tree_allreduce_time(topo, params, msg_bytes);
    case Algorithm::Nvrar: return nvrar_time(topo, params, msg_bytes);
  }
  throw InvalidArgumentError("predict: bad algorithm");
}

struct AlgorithmChoice {
  Algorithm best = Algorithm::Nvrar;
  ModelPrediction ring;
  ModelPrediction tree;
  ModelPrediction nvrar;
};

/// Predicted best algorithm for a configuration. Ties break in the fixed
/// order nvrar > tree > ring so the choice is deterministic.
inline AlgorithmChoice best_algorithm(const ClusterTopology& topo, const CostParams& params,
                                      std::uint64_t msg_bytes) {
  AlgorithmChoice c;
  c.ring = ring_allreduce_time(topo, params, msg_bytes);
  c.tree = tree_allreduce_time(topo, params, msg_bytes);
  c.nvrar = nvrar_time(topo, params, msg_bytes);
  c.best = Algorithm::Nvrar;
  double best_total = c.nvrar.total;
  if (c.tree.total < best_total) {
    c.best = Algorithm::Tree;
    best_total = c.tree.total;
  }
  if (c.ring.total < best_total) {
    c.best = Algorithm::Ring;
  }
  return c;
}

}  // namespace ccsim
