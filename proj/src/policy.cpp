#include "emvlab/policy.hpp"

#include <set>

#include "emvlab/actors.hpp"

namespace emvlab {

const char* to_string(FindingKind kind) {
    switch (kind) {
        case FindingKind::AtcGap: return "ATC_GAP";
        case FindingKind::ExtAuthMissing: return "EXT_AUTH_MISSING";
        case FindingKind::StaleAtc: return "STALE_ATC";
    }
    return "?";
}

MonotonicDecision enforce_atc_monotonic(const IssuerState& state, const AuthRequest& req) {
    auto it = state.atc_watermark.find(req.pan);
    if (it == state.atc_watermark.end()) return MonotonicDecision::Accept;  // first-ever use
    return req.cryptogram.atc.value <= it->second ? MonotonicDecision::DeclineStale
                                                  : MonotonicDecision::Accept;
}

std::vector<AuditFinding> audit_settlement(const std::vector<SettlementRecord>& records) {
    std::vector<AuditFinding> findings;
    for (size_t i = 0; i < records.size(); ++i) {
        const SettlementRecord& record = records[i];
        if (record.approved_online && !record.tc.iad.ext_auth_performed()) {
            findings.push_back(
                AuditFinding{record.pan, record.tc.atc.value, FindingKind::ExtAuthMissing, 1, i});
        }
    }
    return findings;
}

bool conformance_2cm085(UnGenerator& generator, SimClock& clock, int n_groups) {
    constexpr uint64_t kDrawSpacingMs = 1000;  // back-to-back bench transactions
    for (int g = 0; g < n_groups; ++g) {
        std::set<uint32_t> group;
        for (int i = 0; i < 4; ++i) {
            group.insert(generator.next(clock).value);
            clock.advance(kDrawSpacingMs);
        }
        if (group.size() != 4) return false;
    }
    return true;
}

}  // namespace emvlab
