// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccsim {

/// Bad numeric input: NaN parameters, out-of-range factors, zero bandwidth.
class InvalidArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Topology shape unsupported by the requested algorithm or model
/// (e.g. a non-power-of-two node count where log2(N) appears).
class InvalidTopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A rank violated the wire protocol: out-of-bounds put, unknown region,
/// stale flag during unpack, mismatched vector lengths.
class ProtocolFaultError : public std::runtime_error {
 public:
  ProtocolFaultError(int global_rank, const std::string& what)
      : std::runtime_error(global_rank < 0
                               ? what
                               : "rank " + std::to_string(global_rank) + ": " + what),
        global_rank_(global_rank) {}

  explicit ProtocolFaultError(const std::string& what) : ProtocolFaultError(-1, what) {}

  int global_rank() const { return global_rank_; }

 private:
  int global_rank_;
};

/// One blocked rank in a deadlock diagnosis.
struct BlockedRank {
  enum class Kind { FlagWait, SeqWait };

  int global_rank = -1;
  Kind kind = Kind::FlagWait;
  // FlagWait: region/word_index/expected flag value.
  // SeqWait: peer_rank/expected sequence number.
  int region = -1;
  std::uint64_t word_index = 0;
  int peer_rank = -1;
  std::uint64_t expected = 0;
};

/// No rank can make progress. Carries the full blocked set so callers
/// (and tests) can see exactly who waited on what.
class DeadlockError : public std::runtime_error {
 public:
  explicit DeadlockError(std::vector<BlockedRank> blocked)
      : std::runtime_error(format(blocked)), blocked_(std::move(blocked)) {}

  const std::vector<BlockedRank>& blocked() const { return blocked_; }

 private:
  static std::string format(const std::vector<BlockedRank>& blocked) {
    std::ostringstream os;
    os << "deadlock: " << blocked.size() << " rank(s) blocked:";
    for (const auto& b : blocked) {
      if (b.kind == BlockedRank::Kind::FlagWait) {
        os << " [rank " << b.global_rank << " awaits flag " << b.expected
           << " at region " << b.region << " word " << b.word_index << "]";
      } else {
        os << " [rank " << b.global_rank << " awaits seq " << b.expected
           << " from rank " << b.peer_rank << "]";
      }
    }
    return os.str();
  }

  std::vector<BlockedRank> blocked_;
};

}  // namespace ccsim
