#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "emvlab/core.hpp"
#include "emvlab/crypto.hpp"

namespace emvlab {

/// Simulated wall clock in milliseconds. Never decreases.
class SimClock {
public:
    SimClock() = default;
    explicit SimClock(uint64_t start_ms) : now_ms_(start_ms) {}

    uint64_t now_ms() const { return now_ms_; }
    void advance(uint64_t dt_ms) { now_ms_ += dt_ms; }
    void advance_to(uint64_t t_ms) {
        if (t_ms > now_ms_) now_ms_ = t_ms;
    }

private:
    uint64_t now_ms_ = 0;
};

enum class GeneratorKind {
    CounterPrefix,
    CharC,
    TruncLcg,
    TimeSeeded,
    Book4Suggested,
    Strong,
};

const char* to_string(GeneratorKind kind);
std::optional<GeneratorKind> generator_kind_from_string(const std::string& name);

// --- individual generator families --------------------------------------

/// Free-running millisecond counter behind a fixed 17-bit prefix:
/// UN = (prefix17 << 15) | (floor(now_ms / tick_ms) mod 2^15).
/// With jitter > 0 the tick duration varies per tick, uniform within
/// +/- jitter relative to tick_ms; the counter position is a function of
/// (seed, now) only.
class CounterPrefixGen {
public:
    CounterPrefixGen(uint32_t prefix17, double tick_ms, double jitter = 0.0, uint64_t seed = 0);

    Un next(const SimClock& clock) { return at(clock.now_ms()); }
    Un at(uint64_t now_ms);

    uint32_t prefix17() const { return prefix17_; }
    double tick_ms() const { return tick_ms_; }
    double jitter() const { return jitter_; }

    /// Start time (ms) of the tick window holding counter value c (no-jitter model).
    double window_start_ms(uint64_t counter) const { return static_cast<double>(counter) * tick_ms_; }
    uint64_t counter_at(uint64_t now_ms);

private:
    uint32_t prefix17_;
    double tick_ms_;
    double jitter_;
    SplitMix64 rng_;
    uint64_t counter_ = 0;        // jittered-path state
    double next_boundary_ms_;

    double draw_tick();
};

/// Strong 32-bit draws post-processed so that bit 31 and bits 23..20 are
/// always zero (characteristic C).
class CharCGen {
public:
    explicit CharCGen(uint64_t seed) : stream_(seed) {}

    Un next() { return Un{stream_.next_u32() & kMask}; }

    static constexpr uint32_t kMask = 0x7F0FFFFF;
    static bool predicate(Un un) { return (un.value & ~kMask) == 0; }

private:
    Sha256Stream stream_;
};

/// Canonical truncated LCG family: s' = (1103515245 s + 12345) mod 2^31,
/// each call exposing (s' >> 16); a UN packs the low byte of four
/// consecutive calls, first call in the most significant position.
class TruncLcgGen {
public:
    explicit TruncLcgGen(uint32_t seed) : state_(seed & 0x7FFFFFFF) {}

    Un next();
    uint32_t state() const { return state_; }

    static constexpr uint64_t kA = 1103515245;
    static constexpr uint64_t kC = 12345;
    static constexpr uint32_t kStateMask = 0x7FFFFFFF;  // mod 2^31

    static uint32_t step(uint32_t s) {
        return static_cast<uint32_t>((kA * s + kC) & kStateMask);
    }
    /// The UN produced by four calls starting from state s; returns the
    /// advanced state through the second member.
    static std::pair<uint32_t, uint32_t> un_from_state(uint32_t s);

private:
    uint32_t state_;
};

/// The construction suggested by the specification literature: hash of the
/// XOR of previously seen ARQC MACs, a transaction counter, and the clock
/// quantized to one second. Predictable right after a reboot, when the
/// retained-ARQC accumulator is zero.
class Book4Gen {
public:
    explicit Book4Gen() = default;

    Un next(Atc atc, const SimClock& clock) const;
    void note_arqc(const std::array<uint8_t, 8>& arqc_mac);
    void reboot() { xor_acc_.fill(0); }

    const std::array<uint8_t, 8>& xor_acc() const { return xor_acc_; }

    static Un formula(const std::array<uint8_t, 8>& xor_acc, Atc atc, uint64_t now_s);

private:
    std::array<uint8_t, 8> xor_acc_{};
};

/// Seeded cryptographic stream; the "do it right" reference.
class StrongGen {
public:
    explicit StrongGen(uint64_t seed) : stream_(seed) {}

    Un next() { return Un{stream_.next_u32()}; }

private:
    Sha256Stream stream_;
};

// --- unified generator handle -------------------------------------------

struct GeneratorConfig {
    GeneratorKind kind = GeneratorKind::Strong;
    uint64_t seed = 0;
    uint32_t prefix17 = 0;        // CounterPrefix
    double tick_ms = 3.3;         // CounterPrefix
    double jitter = 0.0;          // CounterPrefix
    uint32_t lcg_seed = 0;        // TruncLcg

    bool operator==(const GeneratorConfig&) const = default;
};

/// Owns one generator instance; draws are a function of (config, clock history).
class UnGenerator {
public:
    explicit UnGenerator(const GeneratorConfig& config);

    Un next(const SimClock& clock);
    const GeneratorConfig& config() const { return config_; }

    /// Card-visible feedback for the Book4 family (retained ARQCs).
    void note_arqc(const std::array<uint8_t, 8>& mac);
    void reboot();

private:
    GeneratorConfig config_;
    std::variant<CounterPrefixGen, CharCGen, TruncLcgGen, Book4Gen, StrongGen> impl_;
    Atc book4_counter_{};
};

// --- prediction ----------------------------------------------------------

struct UnObservation {
    uint64_t timestamp_ms = 0;
    Un un{};
    std::string source_id;
    bool reboot_boundary = false;  // first observation after a restart
};

using UnSequence = std::vector<UnObservation>;

/// Counter-source prediction: everything needed to map a future instant to
/// the UN the terminal will sample.
struct CounterPrediction {
    uint32_t prefix_value = 0;   // the fixed top bits, already shifted out
    int prefix_bits = 17;
    uint64_t modulus = 1u << 15;
    double ticks_per_ms = 0.0;
    double phase_ms = 0.0;       // time at which the unwrapped counter was `anchor`
    uint64_t anchor_counter = 0;

    Un un_at(double t_ms) const;
    /// Earliest window start >= from_ms whose counter is congruent to `counter`.
    double next_window_start(uint64_t counter, double from_ms) const;
    double window_ms() const { return 1.0 / ticks_per_ms; }
};

enum class PredictError { Unpredictable, Ambiguous };

struct LcgPrediction {
    uint32_t seed = 0;                  // state before the first observed UN
    std::vector<Un> next_uns;           // continuation after the calibration window
};

using PredictResult = std::variant<CounterPrediction, LcgPrediction, PredictError>;

/// Calibrates a predictor against observed UNs for the given family.
/// COUNTER_PREFIX needs >= 2 timestamped observations; TRUNC_LCG needs >= 2
/// UNs; STRONG is Unpredictable by contract.
PredictResult predict(GeneratorKind kind, const UnSequence& calibration);

/// Recovers the TruncLcg state preceding the first observed UN, or nullopt.
/// Equivalent to scanning the whole 2^31 state space and returning the
/// smallest state that reproduces every observed UN; implemented by
/// enumerating only the states consistent with the first output byte.
/// Needs at least 2 UNs.
std::optional<uint32_t> lcg_recover_initial_state(const std::vector<Un>& uns);

/// Post-reboot Book4 prediction: the accumulator is all zero, so the output
/// is a pure function of the counter and the clock second.
Un predict_book4_post_reboot(Atc atc, uint64_t now_s);

}  // namespace emvlab
