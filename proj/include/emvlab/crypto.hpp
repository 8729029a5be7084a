#pragma once

#include <array>
#include <cstdint>

#include "emvlab/bytes.hpp"

namespace emvlab {

std::array<uint8_t, 32> sha256(const Bytes& msg);
std::array<uint8_t, 32> hmac_sha256(const Bytes& key, const Bytes& msg);

/// Deterministic cryptographic stream: block i = SHA-256(seed_be64 || i_be64),
/// consumed as eight big-endian 32-bit words per block. Used as the reference
/// "strong" source; reproducible per seed by design.
class Sha256Stream {
public:
    explicit Sha256Stream(uint64_t seed) : seed_(seed) {}

    uint32_t next_u32();
    uint64_t next_u64();

    /// Uniform double in [0, 1).
    double next_unit();

private:
    void refill();

    uint64_t seed_;
    uint64_t block_index_ = 0;
    std::array<uint8_t, 32> block_{};
    int word_pos_ = 8;  // forces refill on first use
};

/// splitmix64; scenario-level noise (phases, jitter, attacker choices).
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next();
    /// Uniform double in [0, 1).
    double next_unit();
    /// Uniform integer in [0, bound) via 128-bit multiply-shift.
    uint64_t next_below(uint64_t bound);

private:
    uint64_t state_;
};

}  // namespace emvlab
