#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emvlab/actors.hpp"
#include "emvlab/scenario.hpp"

namespace emvlab {

/// One harvested GENERATE AC pair. The TC was produced without the issuer,
/// so its IAD carries ext_auth_performed == false; that is the audit hook.
struct PreplayEntry {
    Un un{};
    Cryptogram arqc;
    Cryptogram tc;
    TransactionContext ctx_template;
    Bytes dda_sig;  // empty unless the victim card was DDA-capable
};

struct PreplayTable {
    StaticCardData static_data;
    std::string pin;  // captured at the evil terminal
    std::map<uint32_t, PreplayEntry> entries;
    bool partial = false;  // budget ran out before all targets were harvested
};

struct SkimParams {
    uint64_t per_harvest_cost_ms = 280;
    uint64_t time_budget_ms = 30000;
    bool capture_dda = false;
};

/// Harvest loop: for each target UN, one READ RECORDS / GENERATE AC (ARQC)
/// / GENERATE AC (TC with a locally fabricated approve ARC) session against
/// the victim card. Stops when the per-harvest cost exhausts the budget.
/// Throws std::invalid_argument on an empty target list.
PreplayTable skim(Card& card, const std::vector<Un>& targets,
                  const TransactionContext& ctx_template, const SkimParams& params,
                  SimClock& clock);

struct SyncConfig {
    double rtc_resolution_ms = 1.0;
    uint64_t max_stall_ms = 30000;  // the standard authorization time limit
};

struct StallDecision {
    bool window_found = false;
    uint64_t wait_ms = 0;
    Un intended_un{};
};

/// Chooses the request-more-time delay that parks the terminal's UN sampling
/// instant inside a run of tick windows whose UNs are in the table. The
/// card's delivered instant is late by an RTC quantization error in
/// [0, rtc_resolution); the aim point is advanced by half that resolution so
/// the landing distribution straddles the targeted window run. Consecutive
/// harvested UNs thus widen the effective target by a factor of the run
/// length. Returns NO_WINDOW (window_found = false) when no run is reachable
/// within the stall budget.
StallDecision synchronize(const std::vector<Un>& table_uns, const CounterPrediction& prediction,
                          double nominal_sample_ms, const SyncConfig& sync);

struct AttackCardConfig {
    PreplayTable table;
    SyncConfig sync;
    std::optional<CounterPrediction> prediction;
    /// This card's actual RTC error for the session, uniform in
    /// [0, rtc_resolution); unknown to the planning step.
    double rtc_error_ms = 0.0;
    /// Serve entries in ATC order regardless of the presented UN (the
    /// man-in-the-middle deployments); default is strict UN lookup.
    bool play_any = false;
};

/// The programmed clone. Serves copied static data, answers GENERATE AC from
/// the lookup table, feigns failure on a miss, and silently accepts
/// EXTERNAL AUTHENTICATE since it cannot verify the ARPC.
class PreplayCard : public CardInterface {
public:
    explicit PreplayCard(AttackCardConfig config) : cfg_(std::move(config)) {}

    std::optional<CardResponse> handle(const CardCommand& cmd, SimClock& clock) override;
    uint64_t pre_sample_stall_ms(const SimClock& clock) override;

    const PreplayEntry* intended_entry();
    const AttackCardConfig& config() const { return cfg_; }
    /// UN of the entry this card will play next (for coordinating a MITM).
    std::optional<Un> next_play_un();

private:
    const PreplayEntry* first_unused();
    const PreplayEntry* lookup(Un un);
    void plan(uint64_t now_ms);

    AttackCardConfig cfg_;
    std::set<uint16_t> used_atcs_;
    std::optional<uint64_t> session_start_ms_;
    bool planned_ = false;
    StallDecision decision_{};
    const PreplayEntry* playing_ = nullptr;
};

/// Rewrites ctx.un in matching authorization requests on the
/// terminal-to-issuer leg; the response path is untouched.
void mitm_rewrite_un(Channel& channel, const std::optional<std::string>& trigger_pan,
                     const std::optional<std::array<uint8_t, 8>>& trigger_arqc, Un replacement_un);

// --- the indistinguishability experiment -----------------------------------

enum class ExperimentVerdict { Identical, Distinguishable };

struct ExperimentResult {
    ExperimentVerdict verdict = ExperimentVerdict::Identical;
    int step = 0;  // 3 or 8 when distinguishable
};

struct ExperimentOptions {
    std::optional<uint32_t> preplay_template_date;  // perturbation knob
};

/// The eight-step protocol-level proof: two transactions each on twin cards
/// A and B, trace comparison, two-entry skim of A, pre-play programming, and
/// the final trace comparison of B against the pre-play card. Runs against a
/// captive lab terminal with no issuer. Throws std::invalid_argument when the
/// cards' ATC or static data differ (invalid setup).
ExperimentResult indistinguishability_experiment(const CardState& card_a, const CardState& card_b,
                                                 const ScenarioConfig& scenario,
                                                 const ExperimentOptions& options = {});

// --- campaigns ---------------------------------------------------------------

struct AttemptRecord {
    bool preplay = false;
    Outcome outcome = Outcome::Fail;
    DeclineReason reason = DeclineReason::None;
    uint32_t un = 0;
    uint16_t atc = 0;
};

struct CampaignReport {
    std::string scenario_name;
    uint64_t seed = 0;
    int attempts = 0;
    int dispenses = 0;
    int fails = 0;
    std::map<std::string, int> declines_by_reason;
    uint64_t amount_stolen = 0;
    int genuine_runs = 0;
    int genuine_declines = 0;
    std::vector<AttemptRecord> attempt_log;
    std::vector<AuditFinding> audit_findings;  // when iad_audit is on
    size_t settlement_records = 0;
    size_t preplay_settlements_flagged = 0;
};

struct CampaignResult {
    CampaignReport report;
    std::vector<Transcript> transcripts;
    std::vector<IssuerLogRecord> issuer_log;
};

/// Controlled cash-out experiment: per attempt, an independent trial with its
/// own issuer clone, victim skim, optional genuine interleaved use, timed
/// insertion and one pre-play cash-out. Deterministic per (scenario, seed).
CampaignResult run_campaign(const ScenarioConfig& scenario);

/// DDA non-defence scenario: harvest includes INTERNAL AUTHENTICATE
/// responses, the pre-play card replays them, and the outcome is decided by
/// UN prediction exactly as in the plain flow.
CampaignResult dda_replay_check(ScenarioConfig scenario);

}  // namespace emvlab
