#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "emvlab/ungen.hpp"

namespace emvlab {

struct StuckBitsResult {
    uint32_t stuck_zero_mask = 0;
    uint32_t stuck_one_mask = 0;
    /// Combined per-bit significance: p = 2^(-n) per stuck bit, multiplied
    /// across bits under a documented independence assumption.
    double p_value = 1.0;
    double log2_p = 0.0;
    bool low_confidence = false;  // fewer than kMinSamples observations
    size_t sample_count = 0;

    static constexpr size_t kMinSamples = 5;
};

struct CharCResult {
    bool holds = false;
    double p_value = 1.0;  // (2^-5)^n when the characteristic holds
    double log2_p = 0.0;
    size_t sample_count = 0;
};

struct CounterFit {
    int prefix_bits = 0;          // number of fixed top bits (32 - counter width)
    uint32_t prefix_value = 0;    // the fixed top bits, right-aligned
    uint64_t modulus = 0;         // 2^counter_width
    double ticks_per_second = 0.0;
    double residual = 0.0;        // rms relative error of the unwrapped fit
};

struct LcgFit {
    std::string family = "trunc_lcg";
    uint32_t seed = 0;
};

enum class RngClass { Counter, WeakRng, PredictableState, StrongUnknown };

const char* to_string(RngClass c);

struct AnalysisReport {
    StuckBitsResult stuck_bits;
    CharCResult char_c;
    std::optional<CounterFit> counter_fit;
    std::optional<LcgFit> lcg_fit;
    RngClass classification = RngClass::StrongUnknown;
    size_t sample_count = 0;
};

/// Per-bit always-0 / always-1 masks over the sample multiset.
/// Throws std::invalid_argument on an empty sequence.
StuckBitsResult detect_stuck_bits(const UnSequence& seq);

/// Characteristic C: bit 31 and bits 23..20 zero in every sample.
CharCResult detect_characteristic_c(const UnSequence& seq);

/// Split-point counter search: for k in [8, 24], top (32-k) bits constant and
/// low-k deltas consistent with rate * dt (mod 2^k) after modular unwrapping.
/// Needs >= 3 observations with strictly increasing timestamps.
std::optional<CounterFit> fit_counter(const UnSequence& seq);

/// Catalog brute force over the truncated-LCG state space; needs >= 2 UNs.
std::optional<LcgFit> fit_lcg(const UnSequence& seq);

/// Taxonomy decision: COUNTER, else WEAK_RNG (LCG fit or significant stuck
/// bits), else PREDICTABLE_STATE (repeating post-reboot values), else
/// STRONG_UNKNOWN.
AnalysisReport classify(const UnSequence& seq);

}  // namespace emvlab
