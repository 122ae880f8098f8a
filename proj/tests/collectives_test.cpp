// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ccsim/collectives.hpp"
#include "ccsim/run.hpp"
#include "oracles.hpp"

using namespace ccsim;

namespace {

CostParams latency_only(double alpha_intra_us = 0.5, double alpha_inter_us = 2.0) {
  CostParams p;
  p.alpha_intra = alpha_intra_us * 1e-6;
  p.alpha_inter = alpha_inter_us * 1e-6;
  return p;
}

template <Element T>
struct OnceResult {
  std::vector<std::vector<T>> out;
  RunReport report;
};

template <Element T>
OnceResult<T> run_once(Algorithm algo, const ClusterTopology& topo,
                       const CostParams& params, TransportMode mode,
                       const RunOptions& opts, const std::vector<std::vector<T>>& inputs,
                       const NvrarConfig& cfg = {}) {
  OnceResult<T> r;
  r.out.assign(inputs.size(), {});
  auto program = [&](Ctx& ctx) -> Task {
    const int me = ctx.global();
    std::span<const T> in(inputs[me]);
    r.out[me].resize(in.size());
    std::span<T> out(r.out[me]);
    if (algo == Algorithm::Ring) {
      RingAllreduce<T> coll(ctx, in.size());
      co_await coll.run(in, out);
    } else if (algo == Algorithm::Tree) {
      TreeAllreduce<T> coll(ctx, in.size());
      co_await coll.run(in, out);
    } else {
      NvrarAllreduce<T> coll(ctx, in.size());
      co_await coll.run(in, out, cfg);
    }
  };
  r.report = run_ranks(topo, params, mode, opts, program);
  return r;
}

template <Element T>
void check_all_equal(const std::vector<std::vector<T>>& outs, const std::vector<T>& want) {
  for (const auto& o : outs) {
    REQUIRE(o.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      if constexpr (std::same_as<T, float>) {
        REQUIRE(std::bit_cast<std::uint32_t>(o[i]) ==
                std::bit_cast<std::uint32_t>(want[i]));
      } else {
        REQUIRE(o[i] == want[i]);
      }
    }
  }
}

}  // namespace

TEST_CASE("ring all-reduce") {
  SECTION("one rank is the identity") {
    std::vector<std::vector<std::int32_t>> in = {{3, -1, 7}};
    auto r = run_once<std::int32_t>(Algorithm::Ring, {1, 1}, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, in[0]);
    CHECK(r.report.stats.puts_issued == 0);
  }
  SECTION("four ranks of constants") {
    std::vector<std::vector<std::int32_t>> in;
    for (int v = 0; v < 4; ++v) in.push_back({v, v, v, v});
    auto r = run_once<std::int32_t>(Algorithm::Ring, {4, 1}, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, {6, 6, 6, 6});
  }
  SECTION("eight ranks, random int32, matches the serial oracle") {
    const ClusterTopology topo{2, 4};
    auto in = oracles::random_inputs<std::int32_t>(8, 1000, 42);
    auto r = run_once<std::int32_t>(Algorithm::Ring, topo, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::serial_sum(in));
  }
  SECTION("send count is 2(NG-1) per rank") {
    const ClusterTopology topo{4, 2};
    auto in = oracles::random_inputs<std::int32_t>(8, 64, 1);
    auto r = run_once<std::int32_t>(Algorithm::Ring, topo, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    CHECK(r.report.stats.puts_issued == 8ull * 2 * (8 - 1));
  }
  SECTION("length not divisible by the rank count is padded away") {
    auto in = oracles::random_inputs<std::int32_t>(4, 5, 3);
    auto r = run_once<std::int32_t>(Algorithm::Ring, {4, 1}, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::serial_sum(in));
  }
  SECTION("float32 matches the order-matched oracle bit for bit") {
    const ClusterTopology topo{2, 2};
    auto in = oracles::random_inputs<float>(4, 37, 7);
    auto r = run_once<float>(Algorithm::Ring, topo, latency_only(),
                             TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::ring_order_sum(in, topo));
    auto serial = oracles::serial_sum(in);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(std::abs(r.out[0][i] - serial[i]) <=
            1e-6 * std::max(1.0f, std::abs(serial[i])));
    }
  }
  SECTION("latency-only completion matches the model exactly") {
    auto in = oracles::random_inputs<std::int32_t>(32, 256, 9);
    auto r = run_once<std::int32_t>(Algorithm::Ring, {8, 4}, latency_only(0.5, 2.0),
                                    TransportMode::VirtualTime, {}, in);
    for (double t : r.report.finish_us) CHECK(t == 124.0);
  }
  SECTION("mismatched lengths fault instead of deadlocking") {
    std::vector<std::vector<std::int32_t>> in = {{1, 2, 3}, {4, 5}};
    CHECK_THROWS_AS(run_once<std::int32_t>(Algorithm::Ring, {2, 1}, latency_only(),
                                           TransportMode::VirtualTime, {}, in),
                    ProtocolFaultError);
  }
}

TEST_CASE("tree all-reduce") {
  SECTION("two local ranks") {
    std::vector<std::vector<std::int32_t>> in = {{1}, {2}};
    auto r = run_once<std::int32_t>(Algorithm::Tree, {1, 2}, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, {3});
  }
  SECTION("latency-only completion matches the model exactly") {
    auto in = oracles::random_inputs<std::int32_t>(4, 16, 2);
    auto r = run_once<std::int32_t>(Algorithm::Tree, {4, 1}, latency_only(0.5, 2.0),
                                    TransportMode::VirtualTime, {}, in);
    // Completion is the last rank's finish; leaves finish earlier because
    // their sends are non-blocking.
    CHECK(*std::max_element(r.report.finish_us.begin(), r.report.finish_us.end()) ==
          8.0);  // 2 * log2(4) * 2us

    auto in2 = oracles::random_inputs<std::int32_t>(32, 16, 2);
    auto r2 = run_once<std::int32_t>(Algorithm::Tree, {8, 4}, latency_only(0.5, 2.0),
                                     TransportMode::VirtualTime, {}, in2);
    CHECK(*std::max_element(r2.report.finish_us.begin(), r2.report.finish_us.end()) ==
          15.0);
  }
  SECTION("float32 against both oracles") {
    const ClusterTopology topo{2, 2};
    auto in = oracles::random_inputs<float>(4, 33, 11);
    auto r = run_once<float>(Algorithm::Tree, topo, latency_only(),
                             TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::tree_order_sum(in, topo));
    auto serial = oracles::serial_sum(in);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(std::abs(r.out[0][i] - serial[i]) <=
            1e-6 * std::max(1.0f, std::abs(serial[i])));
    }
  }
  SECTION("non-power-of-two node counts are rejected") {
    auto in = oracles::random_inputs<std::int32_t>(3, 8, 5);
    CHECK_THROWS_AS(run_once<std::int32_t>(Algorithm::Tree, {3, 1}, latency_only(),
                                           TransportMode::VirtualTime, {}, in),
                    InvalidTopologyError);
  }
}

TEST_CASE("intra-node reduce-scatter and all-gather") {
  SECTION("hand-checked two-rank reduce-scatter") {
    // inputs [1,2] and [3,4]: rank 0 owns chunk {4}, rank 1 owns {6}.
    const ClusterTopology topo{1, 2};
    std::vector<std::vector<std::int32_t>> in = {{1, 2}, {3, 4}};
    std::vector<std::vector<std::int32_t>> shard(2);
    auto program = [&](Ctx& ctx) -> Task {
      std::vector<RankId> mates = {{0, 0}, {0, 1}};
      IntraReduceScatter<std::int32_t> rs(ctx, 2, mates);
      shard[ctx.global()].resize(1);
      co_await rs.run(std::span<const std::int32_t>(in[ctx.global()]),
                      std::span<std::int32_t>(shard[ctx.global()]));
    };
    run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
    CHECK(shard[0] == std::vector<std::int32_t>{4});
    CHECK(shard[1] == std::vector<std::int32_t>{6});
  }
  SECTION("shards concatenate to the node sum; all-gather restores them") {
    const ClusterTopology topo{1, 4};
    const std::size_t n = 64;
    auto in = oracles::random_inputs<std::int32_t>(4, n, 17);
    std::vector<std::vector<std::int32_t>> shard(4), full(4);
    auto program = [&](Ctx& ctx) -> Task {
      std::vector<RankId> mates;
      for (int g = 0; g < 4; ++g) mates.push_back(RankId{0, g});
      IntraReduceScatter<std::int32_t> rs(ctx, n, mates);
      IntraAllGather<std::int32_t> ag(ctx, n / 4, mates);
      shard[ctx.global()].resize(n / 4);
      co_await rs.run(std::span<const std::int32_t>(in[ctx.global()]),
                      std::span<std::int32_t>(shard[ctx.global()]));
      full[ctx.global()].resize(n);
      co_await ag.run(std::span<const std::int32_t>(shard[ctx.global()]),
                      std::span<std::int32_t>(full[ctx.global()]));
    };
    run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
    auto want = oracles::intra_rs_sum(in, n);
    std::vector<std::int32_t> cat;
    for (auto& s : shard) cat.insert(cat.end(), s.begin(), s.end());
    CHECK(cat == want);
    for (auto& f : full) CHECK(f == want);
  }
  SECTION("single participant passthrough") {
    const ClusterTopology topo{1, 1};
    std::vector<std::int32_t> got(3);
    auto program = [&](Ctx& ctx) -> Task {
      IntraReduceScatter<std::int32_t> rs(ctx, 3, {RankId{0, 0}});
      std::vector<std::int32_t> in = {9, 8, 7};
      co_await rs.run(std::span<const std::int32_t>(in), std::span<std::int32_t>(got));
    };
    run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
    CHECK(got == std::vector<std::int32_t>{9, 8, 7});
  }
  SECTION("all-gather shard-length mismatch is a protocol fault") {
    const ClusterTopology topo{1, 2};
    auto program = [&](Ctx& ctx) -> Task {
      std::vector<RankId> mates = {{0, 0}, {0, 1}};
      IntraAllGather<std::int32_t> ag(ctx, 8, mates);
      std::vector<std::int32_t> shard(ctx.global() == 0 ? 4 : 3, 1);
      std::vector<std::int32_t> out(shard.size() * 2);
      co_await ag.run(std::span<const std::int32_t>(shard), std::span<std::int32_t>(out));
    };
    CHECK_THROWS_AS(
        run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program),
        ProtocolFaultError);
  }
  SECTION("cross-node participants are a protocol fault") {
    const ClusterTopology topo{2, 1};
    auto program = [&](Ctx& ctx) -> Task {
      std::vector<RankId> bad = {{0, 0}, {1, 0}};
      IntraReduceScatter<std::int32_t> rs(ctx, 4, bad);
      co_return;
    };
    CHECK_THROWS_AS(
        run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program),
        ProtocolFaultError);
  }
}

TEST_CASE("fused pack/unpack") {
  SECTION("single word layout") {
    std::vector<std::int32_t> v = {7};
    auto w = pack_fused<std::int32_t>(v, 3);
    REQUIRE(w.size() == 1);
    CHECK(word_data(w[0]) == 7);
    CHECK(word_flag(w[0]) == 3);
  }
  SECTION("round trip") {
    auto vals = oracles::random_inputs<float>(1, 257, 23)[0];
    auto w = pack_fused<float>(vals, 9);
    auto back = unpack_fused<float>(w, 9);
    for (std::size_t i = 0; i < vals.size(); ++i) {
      CHECK(std::bit_cast<std::uint32_t>(back[i]) ==
            std::bit_cast<std::uint32_t>(vals[i]));
    }
  }
  SECTION("one stale flag faults the unpack") {
    std::vector<std::int32_t> v = {1, 2, 3};
    auto w = pack_fused<std::int32_t>(v, 9);
    w[1] = make_word(word_data(w[1]), 8);
    CHECK_THROWS_AS(unpack_fused<std::int32_t>(w, 9), ProtocolFaultError);
  }
}

namespace {

// Shared driver for rd_inter tests: every rank packs its shard with the
// state's next sequence number and runs only the inter-node phase.
std::vector<std::vector<std::int32_t>> run_rd_inter(
    const ClusterTopology& topo, const std::vector<std::vector<std::int32_t>>& shards,
    const NvrarConfig& cfg, RunReport* report = nullptr) {
  std::vector<std::vector<std::int32_t>> out(shards.size());
  auto program = [&](Ctx& ctx) -> Task {
    const int me = ctx.global();
    const std::size_t w = shards[me].size();
    NvrarAllreduce<std::int32_t> st(ctx, w * ctx.topo().gpus_per_node);
    auto packed = pack_fused<std::int32_t>(shards[me], st.sequence() + 1);
    std::vector<std::uint64_t> reduced(w);
    co_await st.rd_inter(packed, reduced, cfg);
    out[me] = unpack_fused<std::int32_t>(reduced, st.sequence());
  };
  auto r = run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
  if (report) *report = std::move(r);
  return out;
}

}  // namespace

TEST_CASE("inter-node recursive doubling") {
  SECTION("single node: zero steps, identity") {
    auto out = run_rd_inter({1, 1}, {{5, -6, 7}}, {});
    CHECK(out[0] == std::vector<std::int32_t>{5, -6, 7});
  }
  SECTION("two nodes exchange once") {
    auto out = run_rd_inter({2, 1}, {{1, 2}, {10, 20}}, {});
    CHECK(out[0] == std::vector<std::int32_t>{11, 22});
    CHECK(out[1] == std::vector<std::int32_t>{11, 22});
  }
  SECTION("eight nodes, all block/chunk settings agree bit for bit") {
    const ClusterTopology topo{8, 2};
    const std::size_t w = 96;
    auto shards = oracles::random_inputs<std::int32_t>(16, w, 5);
    // Expected: per local rank, the sum across nodes.
    std::vector<std::vector<std::int32_t>> want(16);
    for (int g = 0; g < 16; ++g) {
      want[g].assign(w, 0);
      const int lr = g % 2;
      for (int node = 0; node < 8; ++node) {
        const auto& s = shards[RankId{node, lr}.global(topo)];
        for (std::size_t i = 0; i < w; ++i) {
          want[g][i] = elem_add(want[g][i], s[i]);
        }
      }
    }
    std::vector<std::vector<std::int32_t>> first;
    for (int blocks : {1, 2, 4}) {
      for (std::uint64_t chunk : {8ull, 64ull, 512ull}) {
        auto out = run_rd_inter(topo, shards, NvrarConfig{blocks, chunk});
        CHECK(out == want);
        if (first.empty()) {
          first = out;
        } else {
          CHECK(out == first);
        }
      }
    }
  }
  SECTION("inter-node phase issues exactly log2(N)*Q puts per rank") {
    const ClusterTopology topo{8, 1};
    const std::size_t w = 64;        // words per shard
    const NvrarConfig cfg{1, 128};   // 16 words per chunk -> Q = 4
    auto shards = oracles::random_inputs<std::int32_t>(8, w, 6);
    RunReport report;
    run_rd_inter(topo, shards, cfg, &report);
    CHECK(report.stats.puts_issued == 8ull * 3 * 4);  // ranks * log2(8) * Q
  }
}

TEST_CASE("nvrar all-reduce") {
  SECTION("single rank: identity, zero messages") {
    std::vector<std::vector<std::int32_t>> in = {{4, 5, 6}};
    auto r = run_once<std::int32_t>(Algorithm::Nvrar, {1, 1}, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, in[0]);
    CHECK(r.report.stats.puts_issued == 0);
  }
  SECTION("2x2 with padding to the gpu count") {
    const ClusterTopology topo{2, 2};
    std::vector<std::vector<std::int32_t>> in;
    for (int g = 0; g < 4; ++g) in.push_back({g});
    auto r = run_once<std::int32_t>(Algorithm::Nvrar, topo, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, {6});
  }
  SECTION("random int32 equals the serial oracle") {
    const ClusterTopology topo{4, 4};
    auto in = oracles::random_inputs<std::int32_t>(16, 999, 13);
    auto r = run_once<std::int32_t>(Algorithm::Nvrar, topo, latency_only(),
                                    TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::serial_sum(in));
  }
  SECTION("float32 against both oracles") {
    const ClusterTopology topo{4, 2};
    auto in = oracles::random_inputs<float>(8, 129, 19);
    auto r = run_once<float>(Algorithm::Nvrar, topo, latency_only(),
                             TransportMode::VirtualTime, {}, in);
    check_all_equal(r.out, oracles::nvrar_order_sum(in, topo));
    auto serial = oracles::serial_sum(in);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(std::abs(r.out[0][i] - serial[i]) <=
            1e-6 * std::max(1.0f, std::abs(serial[i])));
    }
  }
  SECTION("latency-only completion matches the model exactly") {
    auto in = oracles::random_inputs<std::int32_t>(32, 64, 3);
    auto r = run_once<std::int32_t>(Algorithm::Nvrar, {8, 4}, latency_only(0.5, 2.0),
                                    TransportMode::VirtualTime, {}, in);
    for (double t : r.report.finish_us) CHECK(t == 9.0);
  }
  SECTION("100 back-to-back calls with fresh inputs") {
    const ClusterTopology topo{4, 2};
    const std::size_t n = 512;
    std::vector<std::vector<std::vector<std::int32_t>>> per_call(100);
    for (int c = 0; c < 100; ++c) {
      per_call[c] = oracles::random_inputs<std::int32_t>(8, n, 1000 + c);
    }
    std::vector<std::vector<std::vector<std::int32_t>>> got(
        100, std::vector<std::vector<std::int32_t>>(8));
    std::vector<std::uint32_t> calls_made(8, 0);
    auto program = [&](Ctx& ctx) -> Task {
      const int me = ctx.global();
      NvrarAllreduce<std::int32_t> st(ctx, n);
      const std::uint32_t initial = st.sequence();
      for (int c = 0; c < 100; ++c) {
        got[c][me].resize(n);
        co_await st.run(std::span<const std::int32_t>(per_call[c][me]),
                        std::span<std::int32_t>(got[c][me]), NvrarConfig{2, 256});
      }
      calls_made[me] = st.sequence() - initial;
    };
    run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
    for (int c = 0; c < 100; ++c) {
      check_all_equal(got[c], oracles::serial_sum(per_call[c]));
    }
    for (auto s : calls_made) CHECK(s == 100);
  }
  SECTION("virtual-time reruns are bit identical") {
    const ClusterTopology topo{4, 2};
    auto in = oracles::random_inputs<std::int32_t>(8, 300, 21);
    RunOptions opts;
    opts.keep_trace = true;
    auto a = run_once<std::int32_t>(Algorithm::Nvrar, topo, latency_only(),
                                    TransportMode::VirtualTime, opts, in,
                                    NvrarConfig{2, 64});
    auto b = run_once<std::int32_t>(Algorithm::Nvrar, topo, latency_only(),
                                    TransportMode::VirtualTime, opts, in,
                                    NvrarConfig{2, 64});
    CHECK(a.out == b.out);
    CHECK(a.report.finish_us == b.report.finish_us);
    CHECK(a.report.region_hash == b.report.region_hash);
    REQUIRE(a.report.trace.size() == b.report.trace.size());
    for (std::size_t i = 0; i < a.report.trace.size(); ++i) {
      CHECK(a.report.trace[i].time_us == b.report.trace[i].time_us);
      CHECK(a.report.trace[i].src == b.report.trace[i].src);
      CHECK(a.report.trace[i].dst == b.report.trace[i].dst);
      CHECK(a.report.trace[i].byte_offset == b.report.trace[i].byte_offset);
    }
  }
  SECTION("concurrent transport agrees with virtual time") {
    const ClusterTopology topo{2, 2};
    auto in = oracles::random_inputs<std::int32_t>(4, 640, 29);
    auto vt = run_once<std::int32_t>(Algorithm::Nvrar, topo, latency_only(),
                                     TransportMode::VirtualTime, {}, in,
                                     NvrarConfig{2, 128});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RunOptions opts;
      opts.seed = seed;
      opts.delay_max_us = 100.0;
      auto cc = run_once<std::int32_t>(Algorithm::Nvrar, topo, CostParams{},
                                       TransportMode::Concurrent, opts, in,
                                       NvrarConfig{2, 128});
      CHECK(cc.out == vt.out);
    }
  }
  SECTION("a stalled rank blocks exactly its step peers") {
    const ClusterTopology topo{4, 1};
    const std::size_t n = 32;
    auto in1 = oracles::random_inputs<std::int32_t>(4, n, 31);
    auto in2 = oracles::random_inputs<std::int32_t>(4, n, 32);
    std::vector<std::vector<std::int32_t>> first(4);
    try {
      auto program = [&](Ctx& ctx) -> Task {
        const int me = ctx.global();
        NvrarAllreduce<std::int32_t> st(ctx, n);
        first[me].resize(n);
        co_await st.run(std::span<const std::int32_t>(in1[me]),
                        std::span<std::int32_t>(first[me]), {});
        if (me == 3) co_return;  // stalls before the second call
        std::vector<std::int32_t> second(n);
        co_await st.run(std::span<const std::int32_t>(in2[me]),
                        std::span<std::int32_t>(second), {});
      };
      run_ranks(topo, latency_only(), TransportMode::VirtualTime, {}, program);
      FAIL("expected a deadlock");
    } catch (const DeadlockError& e) {
      // Call 1 completed everywhere, including its unpack.
      check_all_equal(first, oracles::serial_sum(in1));
      // Rank 3's xor-peers (1 and 2) block on the sequence wait; rank 0 is
      // not a peer of 3, passes the sync, and blocks later on data.
      REQUIRE(e.blocked().size() == 3);
      CHECK(e.blocked()[0].global_rank == 0);
      CHECK(e.blocked()[0].kind == BlockedRank::Kind::FlagWait);
      CHECK(e.blocked()[1].global_rank == 1);
      CHECK(e.blocked()[1].kind == BlockedRank::Kind::SeqWait);
      CHECK(e.blocked()[1].peer_rank == 3);
      CHECK(e.blocked()[2].global_rank == 2);
      CHECK(e.blocked()[2].kind == BlockedRank::Kind::SeqWait);
      CHECK(e.blocked()[2].peer_rank == 3);
    }
  }
  SECTION("stale flags from a past call are ignored, not fatal") {
    // A wait for seq 2 must not resume on a word still carrying seq 1.
    const ClusterTopology topo{2, 1};
    auto program = [](Ctx& ctx) -> Task {
      RegionId r = ctx.alloc_region(1);
      if (ctx.global() == 0) {
        std::uint64_t w1 = make_word(10, 1);
        std::uint64_t w2 = make_word(20, 2);
        ctx.put_words(RankId{1, 0}, r, 0, &w1, 1);
        ctx.put_words(RankId{1, 0}, r, 0, &w2, 1);
      } else {
        co_await ctx.wait_word(r, 0, 2);
        if (word_data(ctx.load_word(r, 0)) != 20) {
          throw ProtocolFaultError(ctx.global(), "resumed on the stale flag");
        }
      }
      co_return;
    };
    auto report = run_ranks(topo, latency_only(0.5, 2.0), TransportMode::VirtualTime,
                            RunOptions{}, program);
    CHECK(report.finish_us[1] == 2.0);  // both words land at the same instant
  }
}

TEST_CASE("nvrar pipelined timing in virtual time") {
  // G=1, so the completion time has a closed form: chunks serialize on the
  // first link and then drain one chunk-time per step:
  //   T = steps * alpha + (Q + steps - 1) * chunk_wire_time.
  const ClusterTopology topo{4, 1};
  const std::size_t elems = 1024;  // shard = 1024 fused words = 8192 wire bytes
  CostParams params = latency_only(0.5, 2.0);
  params.beta_intra = params.beta_inter = 1024.0 * 1024.0 * 1024.0;
  const NvrarConfig cfg{1, 512};  // 64-word chunks -> Q = 16

  auto in = oracles::random_inputs<std::int32_t>(4, elems, 77);
  auto r = run_once<std::int32_t>(Algorithm::Nvrar, topo, params,
                                  TransportMode::VirtualTime, {}, in, cfg);
  check_all_equal(r.out, oracles::serial_sum(in));

  const std::int64_t alpha_ps = 2000000;
  const std::int64_t chunk_ps =
      std::llround(512.0 / (1024.0 * 1024.0 * 1024.0) * 1e12);
  const std::int64_t want_ps = 2 * alpha_ps + (16 + 2 - 1) * chunk_ps;
  for (double t : r.report.finish_us) {
    CHECK(std::llround(t * 1e6) == want_ps);
  }
}
