// Copyright (c) 2026 The ccsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fused-payload framing: each 4-byte element travels as one 8-byte word,
// data in the low half and a 4-byte sequence flag in the high half. A word
// whose flag equals the current sequence number has arrived; anything else
// is stale. This doubles wire bytes (eta = 2) but makes arrival of data
// imply arrival of its completion signal.

#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "ccsim/errors.hpp"
#include "ccsim/transport.hpp"

namespace ccsim {

template <typename T>
concept Element = std::same_as<T, std::int32_t> || std::same_as<T, float>;

template <Element T>
inline std::uint32_t elem_bits(T v) {
  if constexpr (std::same_as<T, float>) {
    return std::bit_cast<std::uint32_t>(v);
  } else {
    return static_cast<std::uint32_t>(v);
  }
}

template <Element T>
inline T elem_from_bits(std::uint32_t b) {
  if constexpr (std::same_as<T, float>) {
    return std::bit_cast<float>(b);
  } else {
    return static_cast<std::int32_t>(b);
  }
}

/// Sum of two elements. int32 adds wrap (two's complement), so integer
/// reduction is associative and commutative bit-for-bit.
template <Element T>
inline T elem_add(T a, T b) {
  if constexpr (std::same_as<T, float>) {
    return a + b;
  } else {
    return static_cast<std::int32_t>(static_cast<std::uint32_t>(a) +
                                     static_cast<std::uint32_t>(b));
  }
}

/// One fused word per element: data low, flag high.
template <Element T>
inline std::vector<std::uint64_t> pack_fused(std::span<const T> shard, std::uint32_t seq) {
  std::vector<std::uint64_t> out(shard.size());
  for (std::size_t i = 0; i < shard.size(); ++i) {
    out[i] = make_word(elem_bits(shard[i]), seq);
  }
  return out;
}

template <Element T>
inline void pack_fused_into(std::span<const T> shard, std::uint32_t seq,
                            std::uint64_t* out) {
  for (std::size_t i = 0; i < shard.size(); ++i) {
    out[i] = make_word(elem_bits(shard[i]), seq);
  }
}

/// Strips flags, verifying every word carries the expected sequence number.
/// A mismatched flag means stale or missing data and is a protocol fault.
template <Element T>
inline std::vector<T> unpack_fused(std::span<const std::uint64_t> words, std::uint32_t seq) {
  std::vector<T> out(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (word_flag(words[i]) != seq) {
      throw ProtocolFaultError("unpack: flag " + std::to_string(word_flag(words[i])) +
                               " at word " + std::to_string(i) + " does not match seq " +
                               std::to_string(seq));
    }
    out[i] = elem_from_bits<T>(word_data(words[i]));
  }
  return out;
}

/// Elementwise reduce of two fused words under one sequence number.
template <Element T>
inline std::uint64_t fused_add(std::uint64_t a, std::uint64_t b, std::uint32_t seq) {
  if (word_flag(a) != seq || word_flag(b) != seq) {
    throw ProtocolFaultError("fused reduce observed flag " +
                             std::to_string(word_flag(a) != seq ? word_flag(a)
                                                                : word_flag(b)) +
                             " where seq " + std::to_string(seq) + " was required");
  }
  return make_word(elem_bits(elem_add(elem_from_bits<T>(word_data(a)),
                                      elem_from_bits<T>(word_data(b)))),
                   seq);
}

/// Tuning knobs for the recursive-doubling phase: the shard is split into
/// `blocks` independently progressing ranges, each transmitted in chunks of
/// at most `chunk_bytes` (capped to the block span for small shards).
struct NvrarConfig {
  int blocks = 1;
  std::uint64_t chunk_bytes = 65536;

  void validate() const {
    if (blocks < 1) throw InvalidArgumentError("nvrar config: blocks must be >= 1");
    if (chunk_bytes < 8 || chunk_bytes % 8 != 0) {
      throw InvalidArgumentError("nvrar config: chunk_bytes must be a multiple of 8, >= 8");
    }
  }
};

namespace rawwire {

// Raw (non-fused) framing used by the ring and tree schedules: elements are
// packed two per word, followed by one trailing fused flag word. In-order
// per-pair delivery means an observed flag implies the whole slot landed.

inline std::size_t words_for(std::size_t elems) { return (elems + 1) / 2; }

template <Element T>
inline void pack(std::span<const T> v, std::uint64_t* out) {
  const std::size_t n = v.size();
  for (std::size_t w = 0; w < words_for(n); ++w) {
    const std::uint32_t lo = elem_bits(v[2 * w]);
    const std::uint32_t hi = (2 * w + 1 < n) ? elem_bits(v[2 * w + 1]) : 0;
    out[w] = make_word(lo, hi);
  }
}

template <Element T>
inline void unpack(const std::uint64_t* in, std::span<T> v) {
  const std::size_t n = v.size();
  for (std::size_t w = 0; w < words_for(n); ++w) {
    v[2 * w] = elem_from_bits<T>(word_data(in[w]));
    if (2 * w + 1 < n) v[2 * w + 1] = elem_from_bits<T>(word_flag(in[w]));
  }
}

}  // namespace rawwire

}  // namespace ccsim
