#include "emvlab/ungen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emvlab {

const char* to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::CounterPrefix: return "counter_prefix";
        case GeneratorKind::CharC: return "char_c";
        case GeneratorKind::TruncLcg: return "trunc_lcg";
        case GeneratorKind::TimeSeeded: return "time_seeded";
        case GeneratorKind::Book4Suggested: return "book4";
        case GeneratorKind::Strong: return "strong";
    }
    return "?";
}

std::optional<GeneratorKind> generator_kind_from_string(const std::string& name) {
    if (name == "counter_prefix") return GeneratorKind::CounterPrefix;
    if (name == "char_c") return GeneratorKind::CharC;
    if (name == "trunc_lcg") return GeneratorKind::TruncLcg;
    if (name == "time_seeded") return GeneratorKind::TimeSeeded;
    if (name == "book4") return GeneratorKind::Book4Suggested;
    if (name == "strong") return GeneratorKind::Strong;
    return std::nullopt;
}

// --- CounterPrefixGen ----------------------------------------------------

CounterPrefixGen::CounterPrefixGen(uint32_t prefix17, double tick_ms, double jitter, uint64_t seed)
    : prefix17_(prefix17 & 0x1FFFF), tick_ms_(tick_ms), jitter_(jitter), rng_(seed) {
    if (!(tick_ms > 0.0)) throw std::invalid_argument("tick_ms must be positive");
    next_boundary_ms_ = draw_tick();
}

double CounterPrefixGen::draw_tick() {
    if (jitter_ <= 0.0) return tick_ms_;
    double u = rng_.next_unit() * 2.0 - 1.0;
    return tick_ms_ * (1.0 + jitter_ * u);
}

uint64_t CounterPrefixGen::counter_at(uint64_t now_ms) {
    if (jitter_ <= 0.0)
        return static_cast<uint64_t>(std::floor(static_cast<double>(now_ms) / tick_ms_));
    while (next_boundary_ms_ <= static_cast<double>(now_ms)) {
        ++counter_;
        next_boundary_ms_ += draw_tick();
    }
    return counter_;
}

Un CounterPrefixGen::at(uint64_t now_ms) {
    uint64_t counter = counter_at(now_ms);
    return Un{(prefix17_ << 15) | static_cast<uint32_t>(counter & 0x7FFF)};
}

// --- TruncLcgGen ----------------------------------------------------------

std::pair<uint32_t, uint32_t> TruncLcgGen::un_from_state(uint32_t s) {
    uint32_t un = 0;
    for (int i = 0; i < 4; ++i) {
        s = step(s);
        un = (un << 8) | ((s >> 16) & 0xFF);
    }
    return {un, s};
}

Un TruncLcgGen::next() {
    auto [un, s] = un_from_state(state_);
    state_ = s;
    return Un{un};
}

// --- Book4Gen --------------------------------------------------------------

Un Book4Gen::formula(const std::array<uint8_t, 8>& xor_acc, Atc atc, uint64_t now_s) {
    Bytes msg(xor_acc.begin(), xor_acc.end());
    put_be16(msg, atc.value);
    put_be64(msg, now_s);
    auto digest = sha256(msg);
    return Un{read_be32(digest.data())};
}

Un Book4Gen::next(Atc atc, const SimClock& clock) const {
    return formula(xor_acc_, atc, clock.now_ms() / 1000);
}

void Book4Gen::note_arqc(const std::array<uint8_t, 8>& arqc_mac) {
    for (size_t i = 0; i < 8; ++i) xor_acc_[i] ^= arqc_mac[i];
}

// --- UnGenerator -----------------------------------------------------------

static std::variant<CounterPrefixGen, CharCGen, TruncLcgGen, Book4Gen, StrongGen> make_impl(
    const GeneratorConfig& c) {
    switch (c.kind) {
        case GeneratorKind::CounterPrefix:
            return CounterPrefixGen(c.prefix17, c.tick_ms, c.jitter, c.seed);
        case GeneratorKind::CharC:
            return CharCGen(c.seed);
        case GeneratorKind::TruncLcg:
            return TruncLcgGen(c.lcg_seed);
        case GeneratorKind::Book4Suggested:
            return Book4Gen();
        case GeneratorKind::TimeSeeded:
            // Time-seeded simple RNG: an LCG reseeded from the clock second at
            // construction is indistinguishable from TruncLcg for our purposes;
            // modeled as TruncLcg seeded with the scenario seed.
            return TruncLcgGen(static_cast<uint32_t>(c.seed & 0x7FFFFFFF));
        case GeneratorKind::Strong:
            return StrongGen(c.seed);
    }
    throw std::invalid_argument("unknown generator kind");
}

UnGenerator::UnGenerator(const GeneratorConfig& config) : config_(config), impl_(make_impl(config)) {}

Un UnGenerator::next(const SimClock& clock) {
    return std::visit(
        [&](auto& gen) -> Un {
            using T = std::decay_t<decltype(gen)>;
            if constexpr (std::is_same_v<T, CounterPrefixGen>) {
                return gen.next(clock);
            } else if constexpr (std::is_same_v<T, Book4Gen>) {
                book4_counter_.value++;
                return gen.next(book4_counter_, clock);
            } else {
                return gen.next();
            }
        },
        impl_);
}

void UnGenerator::note_arqc(const std::array<uint8_t, 8>& mac) {
    if (auto* gen = std::get_if<Book4Gen>(&impl_)) gen->note_arqc(mac);
}

void UnGenerator::reboot() {
    if (auto* gen = std::get_if<Book4Gen>(&impl_)) gen->reboot();
}

// --- prediction --------------------------------------------------------------

Un CounterPrediction::un_at(double t_ms) const {
    double ticks = (t_ms - phase_ms) * ticks_per_ms;
    int64_t counter = static_cast<int64_t>(anchor_counter) + static_cast<int64_t>(std::llround(ticks));
    uint64_t wrapped = static_cast<uint64_t>(counter) % modulus;
    return Un{(prefix_value << (32 - prefix_bits)) | static_cast<uint32_t>(wrapped)};
}

double CounterPrediction::next_window_start(uint64_t counter, double from_ms) const {
    double tick = window_ms();
    // counter value at from_ms, then roll forward to the next congruent slot
    double ticks_from_anchor = (from_ms - phase_ms) * ticks_per_ms;
    int64_t current = static_cast<int64_t>(anchor_counter) +
                      static_cast<int64_t>(std::floor(ticks_from_anchor));
    int64_t want = static_cast<int64_t>(counter % modulus);
    int64_t cur_mod = ((current % static_cast<int64_t>(modulus)) + static_cast<int64_t>(modulus)) %
                      static_cast<int64_t>(modulus);
    int64_t ahead = (want - cur_mod % static_cast<int64_t>(modulus) + static_cast<int64_t>(modulus)) %
                    static_cast<int64_t>(modulus);
    int64_t target = current + ahead;
    double start = phase_ms + (static_cast<double>(target - static_cast<int64_t>(anchor_counter))) * tick;
    if (start < from_ms) start += static_cast<double>(modulus) * tick;
    return start;
}

namespace {

struct UnwrapFit {
    double ticks_per_ms = 0.0;
    double max_rel_err = 1.0;
};

// Smallest-wrap-first consistency fit of counter deltas against time deltas.
// Returns the first (slowest-counter) hypothesis whose per-interval relative
// error stays within tol.
std::optional<UnwrapFit> fit_rate(const std::vector<uint64_t>& counters,
                                  const std::vector<uint64_t>& times_ms, uint64_t modulus,
                                  double tol, double max_ticks_per_ms) {
    size_t n = counters.size();
    if (n < 2) return std::nullopt;
    std::vector<double> dt;
    std::vector<uint64_t> dc;
    for (size_t i = 0; i + 1 < n; ++i) {
        uint64_t delta_t = times_ms[i + 1] - times_ms[i];
        if (delta_t == 0) return std::nullopt;
        dt.push_back(static_cast<double>(delta_t));
        dc.push_back((counters[i + 1] + modulus - counters[i]) % modulus);
    }
    uint64_t max_wraps =
        static_cast<uint64_t>(max_ticks_per_ms * dt[0] / static_cast<double>(modulus)) + 1;
    for (uint64_t m0 = 0; m0 <= max_wraps; ++m0) {
        double rate0 = (static_cast<double>(dc[0]) + static_cast<double>(m0 * modulus)) / dt[0];
        if (rate0 > max_ticks_per_ms) break;
        if (rate0 <= 0.0) continue;
        // unwrap every interval against the candidate rate, then least-squares refit
        std::vector<double> unwrapped(dt.size());
        for (size_t i = 0; i < dt.size(); ++i) {
            double expected = rate0 * dt[i];
            double m = std::round((expected - static_cast<double>(dc[i])) / static_cast<double>(modulus));
            if (m < 0) m = 0;
            unwrapped[i] = static_cast<double>(dc[i]) + m * static_cast<double>(modulus);
        }
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < dt.size(); ++i) {
            num += unwrapped[i] * dt[i];
            den += dt[i] * dt[i];
        }
        if (den <= 0.0) continue;
        double rate = num / den;
        if (rate <= 0.0) continue;
        double max_err = 0.0;
        for (size_t i = 0; i < dt.size(); ++i) {
            double expected = rate * dt[i];
            max_err = std::max(max_err, std::abs(unwrapped[i] - expected) / expected);
        }
        if (max_err <= tol) return UnwrapFit{rate, max_err};
    }
    return std::nullopt;
}

}  // namespace

PredictResult predict(GeneratorKind kind, const UnSequence& calibration) {
    if (calibration.empty()) return PredictError::Ambiguous;
    switch (kind) {
        case GeneratorKind::Strong:
            return PredictError::Unpredictable;
        case GeneratorKind::CounterPrefix: {
            if (calibration.size() < 2) return PredictError::Ambiguous;
            uint32_t prefix = calibration.front().un.value >> 15;
            for (const auto& obs : calibration)
                if ((obs.un.value >> 15) != prefix) return PredictError::Ambiguous;
            std::vector<uint64_t> counters, times;
            for (const auto& obs : calibration) {
                counters.push_back(obs.un.value & 0x7FFF);
                times.push_back(obs.timestamp_ms);
            }
            auto fit = fit_rate(counters, times, 1u << 15, 0.3, 10.0);
            if (!fit) return PredictError::Ambiguous;
            CounterPrediction pred;
            pred.prefix_value = prefix;
            pred.prefix_bits = 17;
            pred.modulus = 1u << 15;
            pred.ticks_per_ms = fit->ticks_per_ms;
            pred.phase_ms = static_cast<double>(times.back());
            pred.anchor_counter = counters.back();
            return pred;
        }
        case GeneratorKind::TruncLcg: {
            if (calibration.size() < 2) return PredictError::Ambiguous;
            std::vector<Un> uns;
            for (const auto& obs : calibration) uns.push_back(obs.un);
            auto state = lcg_recover_initial_state(uns);
            if (!state) return PredictError::Ambiguous;
            LcgPrediction pred;
            pred.seed = *state;
            TruncLcgGen gen(*state);
            for (size_t i = 0; i < uns.size(); ++i) gen.next();  // replay calibration
            for (int i = 0; i < 4; ++i) pred.next_uns.push_back(gen.next());
            return pred;
        }
        case GeneratorKind::Book4Suggested:
        case GeneratorKind::TimeSeeded:
        case GeneratorKind::CharC:
            return PredictError::Unpredictable;
    }
    return PredictError::Unpredictable;
}

Un predict_book4_post_reboot(Atc atc, uint64_t now_s) {
    return Book4Gen::formula({}, atc, now_s);
}

namespace {

// multiplicative inverse of the LCG multiplier mod 2^31
constexpr uint32_t kLcgAInv = 0x6eb9eb65;
static_assert(((static_cast<uint64_t>(TruncLcgGen::kA) * kLcgAInv) & TruncLcgGen::kStateMask) == 1);

uint32_t lcg_unstep(uint32_t s) {
    return static_cast<uint32_t>(
        (static_cast<uint64_t>(kLcgAInv) * ((s - TruncLcgGen::kC) & TruncLcgGen::kStateMask)) &
        TruncLcgGen::kStateMask);
}

}  // namespace

std::optional<uint32_t> lcg_recover_initial_state(const std::vector<Un>& uns) {
    if (uns.size() < 2) return std::nullopt;
    std::vector<uint8_t> bytes;
    for (Un un : uns)
        for (int shift = 24; shift >= 0; shift -= 8)
            bytes.push_back(static_cast<uint8_t>(un.value >> shift));

    const uint32_t b0 = bytes[0];
    std::vector<uint32_t> hits;
    for (uint32_t top = 0; top < (1u << 7); ++top) {
        for (uint32_t low = 0; low < (1u << 16); ++low) {
            uint32_t s = (top << 24) | (b0 << 16) | low;
            uint32_t walker = s;
            bool ok = true;
            for (size_t i = 1; i < bytes.size(); ++i) {
                walker = TruncLcgGen::step(walker);
                if (((walker >> 16) & 0xFF) != bytes[i]) {
                    ok = false;
                    break;
                }
            }
            if (ok) hits.push_back(lcg_unstep(s));
        }
    }
    if (hits.empty()) return std::nullopt;
    return *std::min_element(hits.begin(), hits.end());
}

}  // namespace emvlab
