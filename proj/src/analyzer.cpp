#include "emvlab/analyzer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>

namespace emvlab {

const char* to_string(RngClass c) {
    switch (c) {
        case RngClass::Counter: return "COUNTER";
        case RngClass::WeakRng: return "WEAK_RNG";
        case RngClass::PredictableState: return "PREDICTABLE_STATE";
        case RngClass::StrongUnknown: return "STRONG_UNKNOWN";
    }
    return "?";
}

StuckBitsResult detect_stuck_bits(const UnSequence& seq) {
    if (seq.empty()) throw std::invalid_argument("empty UN sequence");
    uint32_t or_acc = 0;
    uint32_t and_acc = 0xFFFFFFFF;
    for (const auto& obs : seq) {
        or_acc |= obs.un.value;
        and_acc &= obs.un.value;
    }
    StuckBitsResult result;
    result.stuck_zero_mask = ~or_acc;
    result.stuck_one_mask = and_acc;
    result.sample_count = seq.size();
    result.low_confidence = seq.size() < StuckBitsResult::kMinSamples;
    int stuck_bits = std::popcount(result.stuck_zero_mask) + std::popcount(result.stuck_one_mask);
    result.log2_p = -static_cast<double>(seq.size()) * stuck_bits;
    result.p_value = std::exp2(result.log2_p);
    return result;
}

CharCResult detect_characteristic_c(const UnSequence& seq) {
    if (seq.empty()) throw std::invalid_argument("empty UN sequence");
    CharCResult result;
    result.sample_count = seq.size();
    result.holds = std::all_of(seq.begin(), seq.end(),
                               [](const UnObservation& o) { return CharCGen::predicate(o.un); });
    if (result.holds) {
        result.log2_p = -5.0 * static_cast<double>(seq.size());
        result.p_value = std::exp2(result.log2_p);
    }
    return result;
}

namespace {

constexpr double kRelTol = 0.30;            // per-interval relative error bound
constexpr double kMaxTicksPerSecond = 5000;  // rate cap for unwrap search

struct RateFit {
    double ticks_per_ms = 0.0;
    double rms = 1.0;
};

// Smallest-wrap-first unwrapped least-squares rate fit. Mirrors the unwrap
// rule in the un-zoo predictor but searches arbitrary moduli.
std::optional<RateFit> fit_rate_modular(const std::vector<uint64_t>& counters,
                                        const std::vector<uint64_t>& times_ms, uint64_t modulus) {
    std::vector<double> dt;
    std::vector<uint64_t> dc;
    for (size_t i = 0; i + 1 < counters.size(); ++i) {
        uint64_t delta_t = times_ms[i + 1] - times_ms[i];
        if (delta_t == 0) return std::nullopt;
        dt.push_back(static_cast<double>(delta_t));
        dc.push_back((counters[i + 1] + modulus - counters[i]) % modulus);
    }
    const double max_rate = kMaxTicksPerSecond / 1000.0;
    uint64_t max_wraps = static_cast<uint64_t>(max_rate * dt[0] / static_cast<double>(modulus)) + 1;
    for (uint64_t m0 = 0; m0 <= max_wraps; ++m0) {
        double rate0 = (static_cast<double>(dc[0]) + static_cast<double>(m0) * modulus) / dt[0];
        if (rate0 > max_rate) break;
        if (rate0 <= 0.0) continue;
        std::vector<double> unwrapped(dt.size());
        for (size_t i = 0; i < dt.size(); ++i) {
            double wraps =
                std::round((rate0 * dt[i] - static_cast<double>(dc[i])) / static_cast<double>(modulus));
            if (wraps < 0) wraps = 0;
            unwrapped[i] = static_cast<double>(dc[i]) + wraps * static_cast<double>(modulus);
        }
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < dt.size(); ++i) {
            num += unwrapped[i] * dt[i];
            den += dt[i] * dt[i];
        }
        double rate = num / den;
        if (rate <= 0.0) continue;
        double max_err = 0.0, sq = 0.0;
        for (size_t i = 0; i < dt.size(); ++i) {
            double expected = rate * dt[i];
            double rel = (unwrapped[i] - expected) / expected;
            max_err = std::max(max_err, std::abs(rel));
            sq += rel * rel;
        }
        if (max_err <= kRelTol)
            return RateFit{rate, std::sqrt(sq / static_cast<double>(dt.size()))};
    }
    return std::nullopt;
}

}  // namespace

std::optional<CounterFit> fit_counter(const UnSequence& seq) {
    if (seq.size() < 3) return std::nullopt;
    for (size_t i = 0; i + 1 < seq.size(); ++i)
        if (seq[i + 1].timestamp_ms <= seq[i].timestamp_ms) return std::nullopt;

    std::optional<CounterFit> best;
    for (int k = 8; k <= 24; ++k) {
        const uint64_t modulus = 1ull << k;
        const uint32_t prefix = seq.front().un.value >> k;
        bool constant = std::all_of(seq.begin(), seq.end(), [&](const UnObservation& o) {
            return (o.un.value >> k) == prefix;
        });
        if (!constant) continue;
        std::vector<uint64_t> counters, times;
        for (const auto& obs : seq) {
            counters.push_back(obs.un.value & (modulus - 1));
            times.push_back(obs.timestamp_ms);
        }
        auto fit = fit_rate_modular(counters, times, modulus);
        if (!fit) continue;
        CounterFit candidate;
        candidate.prefix_bits = 32 - k;
        candidate.prefix_value = prefix;
        candidate.modulus = modulus;
        candidate.ticks_per_second = fit->ticks_per_ms * 1000.0;
        candidate.residual = fit->rms;
        if (!best || candidate.residual < best->residual) best = candidate;
    }
    return best;
}

std::optional<LcgFit> fit_lcg(const UnSequence& seq) {
    if (seq.size() < 2) return std::nullopt;
    std::vector<Un> uns;
    uns.reserve(seq.size());
    for (const auto& obs : seq) uns.push_back(obs.un);
    auto state = lcg_recover_initial_state(uns);
    if (!state) return std::nullopt;
    return LcgFit{"trunc_lcg", *state};
}

namespace {

// PREDICTABLE_STATE: reboot boundaries present and the first post-boundary
// value repeats across reboots.
bool repeating_post_reboot(const UnSequence& seq) {
    std::vector<uint32_t> boundary_values;
    for (size_t i = 0; i < seq.size(); ++i)
        if (seq[i].reboot_boundary) boundary_values.push_back(seq[i].un.value);
    if (boundary_values.size() < 2) return false;
    std::map<uint32_t, int> counts;
    for (uint32_t v : boundary_values) counts[v]++;
    return std::any_of(counts.begin(), counts.end(), [](const auto& kv) { return kv.second >= 2; });
}

}  // namespace

AnalysisReport classify(const UnSequence& seq) {
    if (seq.empty()) throw std::invalid_argument("empty UN sequence");
    AnalysisReport report;
    report.sample_count = seq.size();
    report.stuck_bits = detect_stuck_bits(seq);
    report.char_c = detect_characteristic_c(seq);
    report.counter_fit = fit_counter(seq);
    if (report.counter_fit) {
        report.classification = RngClass::Counter;
        return report;
    }
    report.lcg_fit = fit_lcg(seq);
    if (report.lcg_fit) {
        report.classification = RngClass::WeakRng;
        return report;
    }
    const bool stuck_significant = !report.stuck_bits.low_confidence &&
                                   (report.stuck_bits.stuck_zero_mask != 0 ||
                                    report.stuck_bits.stuck_one_mask != 0) &&
                                   report.stuck_bits.p_value < 1e-3;
    if (stuck_significant) {
        report.classification = RngClass::WeakRng;
        return report;
    }
    if (repeating_post_reboot(seq)) {
        report.classification = RngClass::PredictableState;
        return report;
    }
    report.classification = RngClass::StrongUnknown;
    return report;
}

}  // namespace emvlab
