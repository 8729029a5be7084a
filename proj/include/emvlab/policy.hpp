#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emvlab/ungen.hpp"

namespace emvlab {

struct IssuerState;
struct AuthRequest;
struct SettlementRecord;

/// Issuer/terminal countermeasure toggles. issuer_nonce switches the
/// transaction flow to the issuer-supplied-nonce variant.
struct PolicySet {
    bool atc_monotonic = false;
    bool atc_gap_flagging = false;
    bool iad_audit = false;
    bool atc_commitment = false;
    bool issuer_nonce = false;

    bool operator==(const PolicySet&) const = default;
};

enum class FindingKind { AtcGap, ExtAuthMissing, StaleAtc };

const char* to_string(FindingKind kind);

struct AuditFinding {
    std::string pan;
    uint16_t atc = 0;
    FindingKind finding = FindingKind::ExtAuthMissing;
    int severity = 0;          // 0 advisory, 1 investigate, 2 block
    size_t record_index = 0;   // index of the log/settlement record cited
};

enum class MonotonicDecision { Accept, DeclineStale };

/// Monotonic-ATC rule: decline when the request's ATC is at or below the
/// highest ATC already approved for that PAN.
MonotonicDecision enforce_atc_monotonic(const IssuerState& state, const AuthRequest& req);

/// Post-hoc settlement audit: flags every approved online transaction whose
/// TC arrived with the EXTERNAL AUTHENTICATE bit pair unset.
std::vector<AuditFinding> audit_settlement(const std::vector<SettlementRecord>& records);

/// The conformance requirement the paper faults: groups of four consecutive
/// UNs drawn from the generator must be pairwise distinct within each group.
/// Draws are paced one simulated second apart, like back-to-back bench
/// transactions.
bool conformance_2cm085(UnGenerator& generator, SimClock& clock, int n_groups);

}  // namespace emvlab
