// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// ccbench: analytical models, simulated collectives, parameter sweeps, and
// tensor-parallel decode-step estimates, emitted as CSV.
//
// Settings come from built-in defaults, overridden by --config (INI file),
// overridden by flags. Exit codes: 0 success, 1 internal error, 2 invalid
// spec, 3 deadlock or protocol fault.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ccsim/bench.hpp"
#include "ccsim/config.hpp"
#include "ccsim/workload.hpp"

namespace {

using namespace ccsim;

struct Settings {
  std::vector<int> nodes = {2};
  int gpus = 1;
  CostParams params;
  std::vector<std::string> algos = {"ring", "tree", "nvrar"};
  std::vector<std::uint64_t> msgs = {131072};
  std::vector<int> blocks = {1};
  std::vector<std::uint64_t> chunks = {65536};
  int iters = 100;
  int warmup = 5;
  std::string transport = "virtual-time";
  std::uint64_t seed = 0;
  double delay_max_us = 0.0;
  double timeout_s = 5.0;

  DecodeWorkload workload{8, 8192, 2, 80};
  GemmShape gemm{8, 8192, 57344};
  GemmMachine machine{128, 128, 0.0};

  std::string out_path;
  std::string trace_path;
};

void apply_config(Settings& s, const IniConfig& c) {
  if (c.has("topology", "nodes")) {
    s.nodes.clear();
    for (auto v : c.get_int_list("topology", "nodes", {})) {
      s.nodes.push_back(static_cast<int>(v));
    }
  }
  s.gpus = static_cast<int>(c.get_int("topology", "gpus_per_node", s.gpus));
  s.params.alpha_intra =
      c.get_double("cost", "alpha_intra_us", s.params.alpha_intra * 1e6) * 1e-6;
  s.params.alpha_inter =
      c.get_double("cost", "alpha_inter_us", s.params.alpha_inter * 1e6) * 1e-6;
  s.params.beta_intra = c.get_double("cost", "beta_intra", s.params.beta_intra);
  s.params.beta_inter = c.get_double("cost", "beta_inter", s.params.beta_inter);
  s.params.eta = c.get_double("cost", "eta", s.params.eta);
  if (c.has("run", "algorithms")) s.algos = c.get_list("run", "algorithms", {});
  if (c.has("run", "msg_bytes")) {
    s.msgs.clear();
    for (auto v : c.get_int_list("run", "msg_bytes", {})) {
      s.msgs.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (c.has("run", "blocks")) {
    s.blocks.clear();
    for (auto v : c.get_int_list("run", "blocks", {})) {
      s.blocks.push_back(static_cast<int>(v));
    }
  }
  if (c.has("run", "chunk_bytes")) {
    s.chunks.clear();
    for (auto v : c.get_int_list("run", "chunk_bytes", {})) {
      s.chunks.push_back(static_cast<std::uint64_t>(v));
    }
  }
  s.iters = static_cast<int>(c.get_int("run", "iters", s.iters));
  s.warmup = static_cast<int>(c.get_int("run", "warmup", s.warmup));
  s.transport = c.get_string("run", "transport", s.transport);
  s.seed = static_cast<std::uint64_t>(
      c.get_int("run", "seed", static_cast<std::int64_t>(s.seed)));
  s.delay_max_us = c.get_double("run", "delay_max_us", s.delay_max_us);
  s.timeout_s = c.get_double("run", "timeout_s", s.timeout_s);
  s.workload.batch_size = static_cast<std::uint64_t>(c.get_int(
      "workload", "batch_size", static_cast<std::int64_t>(s.workload.batch_size)));
  s.workload.hidden_dim = static_cast<std::uint64_t>(c.get_int(
      "workload", "hidden_dim", static_cast<std::int64_t>(s.workload.hidden_dim)));
  s.workload.bytes_per_element = static_cast<std::uint64_t>(
      c.get_int("workload", "bytes_per_element",
                static_cast<std::int64_t>(s.workload.bytes_per_element)));
  s.workload.num_layers = static_cast<std::uint64_t>(
      c.get_int("workload", "layers", static_cast<std::int64_t>(s.workload.num_layers)));
  s.gemm.m =
      static_cast<std::uint64_t>(c.get_int("gemm", "m", static_cast<std::int64_t>(s.gemm.m)));
  s.gemm.n =
      static_cast<std::uint64_t>(c.get_int("gemm", "n", static_cast<std::int64_t>(s.gemm.n)));
  s.gemm.k =
      static_cast<std::uint64_t>(c.get_int("gemm", "k", static_cast<std::int64_t>(s.gemm.k)));
  s.machine.tile_m = static_cast<std::uint64_t>(
      c.get_int("gemm", "tile_m", static_cast<std::int64_t>(s.machine.tile_m)));
  s.machine.tile_n = static_cast<std::uint64_t>(
      c.get_int("gemm", "tile_n", static_cast<std::int64_t>(s.machine.tile_n)));
  s.machine.time_per_tile_k_unit =
      c.get_double("gemm", "time_per_tile_k_unit_us",
                   s.machine.time_per_tile_k_unit * 1e6) *
      1e-6;
}

std::vector<Algorithm> parse_algos(const std::vector<std::string>& names) {
  std::vector<Algorithm> out;
  for (const auto& n : names) out.push_back(algorithm_from_string(n));
  if (out.empty()) throw InvalidArgumentError("no algorithms selected");
  return out;
}

void emit(const std::string& csv, const std::string& out_path) {
  std::cout << csv;
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw InvalidArgumentError("cannot open output file: " + out_path);
    f << csv;
  }
}

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgumentError("cannot open trace file: " + path);
  f << trace_csv_header();
  for (const auto& t : trace) f << trace_csv_row(t);
}

int cmd_model(const Settings& s) {
  const auto algos = parse_algos(s.algos);
  std::string csv =
      "algorithm,nodes,gpus_per_node,msg_bytes,latency_us,bandwidth_us,total_us\n";
  for (Algorithm a : {Algorithm::Ring, Algorithm::Tree, Algorithm::Nvrar}) {
    if (std::find(algos.begin(), algos.end(), a) == algos.end()) continue;
    for (int n : s.nodes) {
      for (std::uint64_t msg : s.msgs) {
        const ModelPrediction p = predict(a, ClusterTopology{n, s.gpus}, s.params, msg);
        csv += std::string(to_string(a)) + ',' + std::to_string(n) + ',' +
               std::to_string(s.gpus) + ',' + std::to_string(msg) + ',' +
               format_us(p.latency_term * 1e6) + ',' + format_us(p.bandwidth_term * 1e6) +
               ',' + format_us(p.total * 1e6) + '\n';
      }
    }
  }
  emit(csv, s.out_path);
  return 0;
}

SweepSpec to_sweep_spec(const Settings& s) {
  SweepSpec spec;
  spec.algorithms = parse_algos(s.algos);
  spec.nodes = s.nodes;
  spec.gpus_per_node = s.gpus;
  spec.msg_bytes = s.msgs;
  spec.blocks = s.blocks;
  spec.chunk_bytes = s.chunks;
  spec.iters = s.iters;
  spec.warmup = s.warmup;
  spec.mode = transport_mode_from_string(s.transport);
  spec.seed = s.seed;
  spec.params = s.params;
  spec.delay_max_us = s.delay_max_us;
  spec.timeout_s = s.timeout_s;
  return spec;
}

int cmd_simulate(const Settings& s) {
  if (s.algos.size() != 1 || s.nodes.size() != 1 || s.msgs.size() != 1 ||
      s.blocks.size() != 1 || s.chunks.size() != 1) {
    throw InvalidArgumentError(
        "simulate: exactly one algorithm, node count, message size, and (blocks, "
        "chunk_bytes) value is required; use sweep for grids");
  }
  SweepRow row;
  row.point.algo = algorithm_from_string(s.algos[0]);
  row.point.topo = ClusterTopology{s.nodes[0], s.gpus};
  row.point.params = s.params;
  row.point.msg_bytes = s.msgs[0];
  row.point.cfg = NvrarConfig{s.blocks[0], s.chunks[0]};
  row.point.iters = s.iters;
  row.point.warmup = s.warmup;
  row.point.mode = transport_mode_from_string(s.transport);
  row.point.seed = s.seed;
  row.point.delay_max_us = s.delay_max_us;
  row.point.timeout_s = s.timeout_s;
  row.point.keep_trace = !s.trace_path.empty();
  row.has_tuning = row.point.algo == Algorithm::Nvrar;
  row.result = run_bench_point(row.point);  // faults and deadlocks propagate
  row.best = true;                          // single cell, same marking as a sweep
  std::string csv = sweep_csv_header();
  csv += sweep_csv_row(row);
  emit(csv, s.out_path);
  if (!s.trace_path.empty()) write_trace(row.result.trace, s.trace_path);
  return 0;
}

int cmd_sweep(const Settings& s) {
  const auto rows = run_sweep(to_sweep_spec(s));
  emit(sweep_csv(rows), s.out_path);
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      std::cerr << "cell " << to_string(r.point.algo) << " N=" << r.point.topo.nodes
                << " msg=" << r.point.msg_bytes << " failed: " << r.error << "\n";
    }
  }
  return 0;
}

int cmd_estimate(const Settings& s) {
  const auto algos = parse_algos(s.algos);
  const ClusterTopology topo{s.nodes.at(0), s.gpus};
  std::string csv = "algorithm,step_time_us,comm_us,gemm_us,speedup_vs_ring\n";
  for (Algorithm a : {Algorithm::Ring, Algorithm::Tree, Algorithm::Nvrar}) {
    if (std::find(algos.begin(), algos.end(), a) == algos.end()) continue;
    const TpStepEstimate e =
        tp_decode_step_time(s.workload, s.gemm, s.machine, topo, s.params, a);
    const double speedup = tp_decode_speedup_vs(s.workload, s.gemm, s.machine, topo,
                                                s.params, a, Algorithm::Ring);
    csv += std::string(to_string(a)) + ',' + format_us(e.step_time * 1e6) + ',' +
           format_us(e.comm_time * 1e6) + ',' + format_us(e.gemm_time * 1e6) + ',' +
           format_us(speedup) + '\n';
  }
  emit(csv, s.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collective-communication models, simulator, and benchmarks"};
  app.require_subcommand(1);

  Settings s;
  std::string config_path;

  std::vector<int> f_nodes;
  int f_gpus = 0;
  std::vector<std::string> f_algos;
  std::vector<std::uint64_t> f_msgs, f_chunks;
  std::vector<int> f_blocks;
  double f_alpha_intra = -1, f_alpha_inter = -1, f_beta_intra = -1, f_beta_inter = -1,
         f_eta = -1;
  int f_iters = -1, f_warmup = -1;
  std::string f_transport;
  std::int64_t f_seed = -1;
  double f_delay = -1, f_timeout = -1;
  double f_tile_cost = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "INI config file");
    cmd->add_option("--out", s.out_path, "write CSV here as well as stdout");
    cmd->add_option("--nodes", f_nodes, "node counts")->delimiter(',');
    cmd->add_option("--gpus", f_gpus, "GPUs per node");
    cmd->add_option("--algos", f_algos, "subset of ring,tree,nvrar")->delimiter(',');
    cmd->add_option("--msg-bytes", f_msgs, "message sizes in bytes")->delimiter(',');
    cmd->add_option("--alpha-intra-us", f_alpha_intra, "intra-node latency (us)");
    cmd->add_option("--alpha-inter-us", f_alpha_inter, "inter-node latency (us)");
    cmd->add_option("--beta-intra", f_beta_intra, "intra-node bandwidth (bytes/s)");
    cmd->add_option("--beta-inter", f_beta_inter, "inter-node bandwidth (bytes/s)");
    cmd->add_option("--eta", f_eta, "fused-payload inflation factor");
  };
  auto add_run = [&](CLI::App* cmd) {
    cmd->add_option("--blocks", f_blocks, "nvrar block counts")->delimiter(',');
    cmd->add_option("--chunk-bytes", f_chunks, "nvrar chunk sizes")->delimiter(',');
    cmd->add_option("--iters", f_iters, "timed iterations");
    cmd->add_option("--warmup", f_warmup, "warmup iterations");
    cmd->add_option("--transport", f_transport, "virtual-time or concurrent");
    cmd->add_option("--seed", f_seed, "rng seed");
    cmd->add_option("--delay-max-us", f_delay, "concurrent: max injected delay");
    cmd->add_option("--timeout-s", f_timeout, "concurrent: deadlock timeout");
    cmd->add_option("--trace", s.trace_path, "write the event trace here");
  };

  CLI::App* model = app.add_subcommand("model", "closed-form predictions");
  add_common(model);
  CLI::App* simulate = app.add_subcommand("simulate", "run one simulated point");
  add_common(simulate);
  add_run(simulate);
  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter grid");
  add_common(sweep);
  add_run(sweep);
  CLI::App* estimate = app.add_subcommand("estimate", "tensor-parallel decode step");
  add_common(estimate);
  estimate->add_option("--batch", s.workload.batch_size, "prompts per batch");
  estimate->add_option("--hidden", s.workload.hidden_dim, "hidden dimension");
  estimate->add_option("--bytes-per-element", s.workload.bytes_per_element, "2 or 4");
  estimate->add_option("--layers", s.workload.num_layers, "transformer layers");
  estimate->add_option("--gemm-m", s.gemm.m, "GEMM M");
  estimate->add_option("--gemm-n", s.gemm.n, "GEMM N");
  estimate->add_option("--gemm-k", s.gemm.k, "GEMM K (full, pre-sharding)");
  estimate->add_option("--tile-m", s.machine.tile_m, "GEMM tile M");
  estimate->add_option("--tile-n", s.machine.tile_n, "GEMM tile N");
  estimate->add_option("--tile-cost-us", f_tile_cost, "time per tile per unit K (us)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) apply_config(s, IniConfig::parse_file(config_path));
    // Flags win over the config file.
    if (!f_nodes.empty()) s.nodes = f_nodes;
    if (f_gpus > 0) s.gpus = f_gpus;
    if (!f_algos.empty()) s.algos = f_algos;
    if (!f_msgs.empty()) s.msgs = f_msgs;
    if (!f_blocks.empty()) s.blocks = f_blocks;
    if (!f_chunks.empty()) s.chunks = f_chunks;
    if (f_alpha_intra >= 0) s.params.alpha_intra = f_alpha_intra * 1e-6;
    if (f_alpha_inter >= 0) s.params.alpha_inter = f_alpha_inter * 1e-6;
    if (f_beta_intra > 0) s.params.beta_intra = f_beta_intra;
    if (f_beta_inter > 0) s.params.beta_inter = f_beta_inter;
    if (f_eta > 0) s.params.eta = f_eta;
    if (f_iters > 0) s.iters = f_iters;
    if (f_warmup >= 0) s.warmup = f_warmup;
    if (!f_transport.empty()) s.transport = f_transport;
    if (f_seed >= 0) s.seed = static_cast<std::uint64_t>(f_seed);
    if (f_delay >= 0) s.delay_max_us = f_delay;
    if (f_timeout > 0) s.timeout_s = f_timeout;
    if (f_tile_cost >= 0) s.machine.time_per_tile_k_unit = f_tile_cost * 1e-6;

    if (model->parsed()) return cmd_model(s);
    if (simulate->parsed()) return cmd_simulate(s);
    if (sweep->parsed()) return cmd_sweep(s);
    if (estimate->parsed()) return cmd_estimate(s);
    return 2;
  } catch (const DeadlockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ProtocolFaultError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InvalidTopologyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
