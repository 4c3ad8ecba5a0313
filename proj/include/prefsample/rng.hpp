// Copyright (C) 2026 The prefsample Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace prefsample {

// Philox4x32-10 (Salmon et al., SC'11). The 128-bit counter is laid out as
//   word 0,1 : block index within the stream (little-endian 64 bit)
//   word 2,3 : stream id (little-endian 64 bit)
// and the 64-bit key is the run seed. Every (seed, stream) pair therefore
// names an independent sequence of 2^64 blocks of four 32-bit words.
//
// Stream ids used by the library:
//   0                     run stream (prompt draws, pair sampling, labels)
//   1                     dataset stream (prompt dataset D_rho)
//   2                     experiment instance (ref, theta*, initial policy)
//   0x1000 + i            replication i of an asymptotics study
//   0x2000 + i            instance i of a verification sweep
namespace streams {
inline constexpr std::uint64_t kRun = 0;
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kExperimentInstance = 2;
inline constexpr std::uint64_t kReplicationBase = 0x1000;
inline constexpr std::uint64_t kInstanceBase = 0x2000;
}  // namespace streams

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// One keyed bijection; exposed for known-answer tests.
PhiloxBlock philox4x32_10(PhiloxBlock counter, PhiloxKey key);

class Rng {
public:
    using result_type = std::uint32_t;

    Rng(std::uint64_t seed, std::uint64_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()();
    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    bool bernoulli(double p) { return uniform() < p; }
    // Inverse-CDF draw from an unnormalized nonnegative weight vector.
    std::size_t categorical(std::span<const double> weights);
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double standard_normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    // Number of 128-bit blocks consumed so far.
    std::uint64_t blocks_used() const { return block_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    PhiloxBlock buffer_{};
    int pos_ = 4;
};

}  // namespace prefsample
