// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Benchmark harness: runs a collective for warmup + timed iterations over a
// chosen transport, reports the mean per-iteration completion time next to
// the analytical model's prediction for identical parameters, and sweeps
// parameter grids into deterministic CSV.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ccsim/collectives.hpp"
#include "ccsim/cost_model.hpp"
#include "ccsim/run.hpp"

namespace ccsim {

struct BenchPoint {
  Algorithm algo = Algorithm::Nvrar;
  ClusterTopology topo;
  CostParams params;
  std::uint64_t msg_bytes = 131072;
  NvrarConfig cfg;
  int iters = 100;
  int warmup = 5;
  TransportMode mode = TransportMode::VirtualTime;
  std::uint64_t seed = 0;
  double delay_max_us = 0.0;
  double timeout_s = 5.0;
  bool keep_trace = false;

  void validate() const {
    topo.validate();
    params.validate();
    cfg.validate();
    if (msg_bytes % 4 != 0 || msg_bytes == 0) {
      throw InvalidArgumentError("bench: msg_bytes must be a positive multiple of 4");
    }
    if (iters < 1 || warmup < 0) {
      throw InvalidArgumentError("bench: iters must be >= 1 and warmup >= 0");
    }
  }
};

struct BenchResult {
  double mean_us = 0.0;
  double model_us = 0.0;
  bool correct = true;
  RunStats stats;
  std::vector<TraceRecord> trace;
};

/// Deterministic per-(seed, iteration, rank) input vector; identical on both
/// transports so correctness checks can compare across them.
inline std::vector<std::int32_t> bench_inputs(std::uint64_t seed, int iter, int rank,
                                              std::size_t elems) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(iter) *
                                                         1000003ull +
                      static_cast<std::uint64_t>(rank));
  std::vector<std::int32_t> v(elems);
  for (auto& x : v) x = static_cast<std::int32_t>(rng());
  return v;
}

inline BenchResult run_bench_point(const BenchPoint& pt) {
  pt.validate();
  const std::size_t elems = pt.msg_bytes / 4;
  const int ng = pt.topo.world_size();
  const int total = pt.warmup + pt.iters;

  std::vector<std::vector<double>> times(total, std::vector<double>(ng, 0.0));
  std::vector<std::vector<std::int32_t>> first_out(ng), last_out(ng);

  auto program = [&](Ctx& ctx) -> Task {
    const int me = ctx.global();
    std::vector<std::int32_t> out(elems);
    std::optional<RingAllreduce<std::int32_t>> ring;
    std::optional<TreeAllreduce<std::int32_t>> tree;
    std::optional<NvrarAllreduce<std::int32_t>> nvrar;
    switch (pt.algo) {
      case Algorithm::Ring: ring.emplace(ctx, elems); break;
      case Algorithm::Tree: tree.emplace(ctx, elems); break;
      case Algorithm::Nvrar: nvrar.emplace(ctx, elems); break;
    }
    for (int it = 0; it < total; ++it) {
      const auto in = bench_inputs(pt.seed, it, me, elems);
      std::span<const std::int32_t> is(in);
      std::span<std::int32_t> os(out);
      if (ring) {
        co_await ring->run(is, os);
      } else if (tree) {
        co_await tree->run(is, os);
      } else {
        co_await nvrar->run(is, os, pt.cfg);
      }
      times[it][me] = ctx.now_us();
      if (it == pt.warmup) first_out[me] = out;
      if (it == total - 1) last_out[me] = out;
    }
  };

  RunOptions opts;
  opts.seed = pt.seed;
  opts.delay_max_us = pt.mode == TransportMode::Concurrent ? pt.delay_max_us : 0.0;
  opts.timeout_s = pt.timeout_s;
  opts.keep_trace = pt.keep_trace;
  RunReport report = run_ranks(pt.topo, pt.params, pt.mode, opts, program);

  auto makespan = [&](int it) {
    return *std::max_element(times[it].begin(), times[it].end());
  };
  const double before = pt.warmup == 0 ? 0.0 : makespan(pt.warmup - 1);

  BenchResult res;
  res.mean_us = (makespan(total - 1) - before) / pt.iters;
  res.model_us = predict(pt.algo, pt.topo, pt.params, pt.msg_bytes).total * 1e6;
  res.stats = report.stats;
  res.trace = std::move(report.trace);

  // Self-check the first and last timed iterations against the serial sum.
  for (int which : {pt.warmup, total - 1}) {
    std::vector<std::int32_t> want(elems, 0);
    for (int r = 0; r < ng; ++r) {
      const auto in = bench_inputs(pt.seed, which, r, elems);
      for (std::size_t i = 0; i < elems; ++i) {
        want[i] = elem_add(want[i], in[i]);
      }
    }
    const auto& outs = which == total - 1 ? last_out : first_out;
    for (int r = 0; r < ng; ++r) res.correct = res.correct && outs[r] == want;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  std::vector<Algorithm> algorithms = {Algorithm::Ring, Algorithm::Tree,
                                       Algorithm::Nvrar};
  std::vector<int> nodes = {2};
  int gpus_per_node = 1;
  std::vector<std::uint64_t> msg_bytes = {131072};
  std::vector<int> blocks = {1};
  std::vector<std::uint64_t> chunk_bytes = {65536};
  int iters = 100;
  int warmup = 5;
  TransportMode mode = TransportMode::VirtualTime;
  std::uint64_t seed = 0;
  CostParams params;
  double delay_max_us = 0.0;
  double timeout_s = 5.0;
  bool keep_trace = false;

  void validate() const {
    params.validate();
    if (algorithms.empty() || nodes.empty() || msg_bytes.empty() || blocks.empty() ||
        chunk_bytes.empty()) {
      throw InvalidArgumentError("sweep: empty dimension");
    }
    if (iters < 1) throw InvalidArgumentError("sweep: iterations must be >= 1");
    const bool needs_pow2 =
        std::find(algorithms.begin(), algorithms.end(), Algorithm::Tree) !=
            algorithms.end() ||
        std::find(algorithms.begin(), algorithms.end(), Algorithm::Nvrar) !=
            algorithms.end();
    for (int n : nodes) {
      ClusterTopology t{n, gpus_per_node};
      t.validate();
      if (needs_pow2 && !is_power_of_two(n)) {
        throw InvalidTopologyError(
            "sweep: tree/nvrar require a power-of-two node count, got " +
            std::to_string(n));
      }
    }
  }
};

struct SweepRow {
  BenchPoint point;
  bool has_tuning = false;  // blocks/chunk columns apply (nvrar only)
  BenchResult result;
  std::string error;
  bool best = false;
  double speedup_vs_ring = 0.0;  // 0 means not available
};

/// Runs every cell in deterministic order (algorithm, then nodes, message
/// size, blocks, chunk bytes, all ascending). A failing cell records its
/// error and the sweep continues.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  spec.validate();
  auto sorted = [](auto v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto nodes = sorted(spec.nodes);
  const auto msgs = sorted(spec.msg_bytes);
  const auto blocks = sorted(spec.blocks);
  const auto chunks = sorted(spec.chunk_bytes);

  std::vector<SweepRow> rows;
  for (Algorithm algo : {Algorithm::Ring, Algorithm::Tree, Algorithm::Nvrar}) {
    if (std::find(spec.algorithms.begin(), spec.algorithms.end(), algo) ==
        spec.algorithms.end()) {
      continue;
    }
    for (int n : nodes) {
      for (std::uint64_t msg : msgs) {
        const bool tuned = algo == Algorithm::Nvrar;
        for (int b : tuned ? blocks : std::vector<int>{1}) {
          for (std::uint64_t c : tuned ? chunks : std::vector<std::uint64_t>{65536}) {
            SweepRow row;
            row.point.algo = algo;
            row.point.topo = ClusterTopology{n, spec.gpus_per_node};
            row.point.params = spec.params;
            row.point.msg_bytes = msg;
            row.point.cfg = NvrarConfig{b, c};
            row.point.iters = spec.iters;
            row.point.warmup = spec.warmup;
            row.point.mode = spec.mode;
            row.point.seed = spec.seed;
            row.point.delay_max_us = spec.delay_max_us;
            row.point.timeout_s = spec.timeout_s;
            row.point.keep_trace = spec.keep_trace;
            row.has_tuning = tuned;
            try {
              row.result = run_bench_point(row.point);
            } catch (const std::exception& e) {
              row.error = e.what();
              for (auto& ch : row.error) {
                if (ch == ',' || ch == '\n') ch = ';';
              }
            }
            rows.push_back(std::move(row));
            if (!tuned) break;
          }
          if (!tuned) break;
        }
      }
    }
  }

  // Mark the fastest tuning cell per (algorithm, nodes, msg) group and fill
  // in speedups against the ring baseline at the same (nodes, msg).
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    std::size_t best = rows.size();
    while (j < rows.size() && rows[j].point.algo == rows[i].point.algo &&
           rows[j].point.topo == rows[i].point.topo &&
           rows[j].point.msg_bytes == rows[i].point.msg_bytes) {
      if (rows[j].error.empty() &&
          (best == rows.size() || rows[j].result.mean_us < rows[best].result.mean_us)) {
        best = j;
      }
      ++j;
    }
    if (best < rows.size()) rows[best].best = true;
    i = j;
  }
  for (auto& row : rows) {
    if (!row.error.empty() || row.point.algo == Algorithm::Ring) continue;
    for (const auto& base : rows) {
      if (base.point.algo == Algorithm::Ring && base.error.empty() &&
          base.point.topo == row.point.topo &&
          base.point.msg_bytes == row.point.msg_bytes && base.result.mean_us > 0.0 &&
          row.result.mean_us > 0.0) {
        row.speedup_vs_ring = base.result.mean_us / row.result.mean_us;
        break;
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV serialization. Times are microseconds with three decimals, LF endings.

inline std::string format_us(double us) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", us);
  return buf;
}

inline const char* sweep_csv_header() {
  return "algorithm,nodes,gpus_per_node,msg_bytes,blocks,chunk_bytes,iters,mean_us,"
         "model_us,speedup_vs_ring,correct,best,error\n";
}

inline std::string sweep_csv_row(const SweepRow& row) {
  std::string s;
  s += to_string(row.point.algo);
  s += ',' + std::to_string(row.point.topo.nodes);
  s += ',' + std::to_string(row.point.topo.gpus_per_node);
  s += ',' + std::to_string(row.point.msg_bytes);
  s += ',';
  if (row.has_tuning) s += std::to_string(row.point.cfg.blocks);
  s += ',';
  if (row.has_tuning) s += std::to_string(row.point.cfg.chunk_bytes);
  s += ',' + std::to_string(row.point.iters);
  s += ',';
  if (row.error.empty()) s += format_us(row.result.mean_us);
  s += ',';
  if (row.error.empty()) s += format_us(row.result.model_us);
  s += ',';
  if (row.speedup_vs_ring > 0.0) s += format_us(row.speedup_vs_ring);
  s += ',';
  if (row.error.empty()) s += row.result.correct ? "1" : "0";
  s += ',';
  if (row.best) s += "1";
  s += ',' + row.error + '\n';
  return s;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = sweep_csv_header();
  for (const auto& r : rows) s += sweep_csv_row(r);
  return s;
}

inline const char* trace_csv_header() { return "time_us,src,dst,region,offset,bytes\n"; }

inline std::string trace_csv_row(const TraceRecord& t) {
  std::string s = format_us(t.time_us);
  s += ',' + std::to_string(t.src);
  s += ',' + std::to_string(t.dst);
  s += ',' + std::to_string(t.region);
  s += ',' + std::to_string(t.byte_offset);
  s += ',' + std::to_string(t.bytes) + '\n';
  return s;
}

}  // namespace ccsim
