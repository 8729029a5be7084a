#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "emvlab/core.hpp"
#include "emvlab/crypto.hpp"
#include "emvlab/policy.hpp"
#include "emvlab/ungen.hpp"

namespace emvlab {

// --- card commands / responses -------------------------------------------

struct ReadRecordsCmd {};
struct GetDataAtcCmd {};
struct InternalAuthenticateCmd {
    Un un{};
};
struct VerifyPinCmd {
    std::string pin;
};
struct GenerateAcArqcCmd {
    TransactionContext ctx;
};
struct ExternalAuthenticateCmd {
    Arc arc{};
    Arpc arpc{};
};
struct GenerateAcTcCmd {
    TransactionContext ctx;
    Arc arc{};
};

using CardCommand = std::variant<ReadRecordsCmd, GetDataAtcCmd, InternalAuthenticateCmd,
                                 VerifyPinCmd, GenerateAcArqcCmd, ExternalAuthenticateCmd,
                                 GenerateAcTcCmd>;

enum class CardErrorCode : uint8_t { OutOfOrder = 1, FeignedFailure = 2, NotSupported = 3 };

struct RecordsResponse {
    StaticCardData data;
};
struct AtcResponse {
    Atc atc{};
};
struct DdaResponse {
    Bytes signature;
};
struct PinResponse {
    bool ok = false;
};
struct CryptogramResponse {
    Cryptogram cryptogram;
};
struct ExtAuthResponse {
    bool ok = false;
};
struct CardErrorResponse {
    CardErrorCode code = CardErrorCode::OutOfOrder;
};

using CardResponse = std::variant<RecordsResponse, AtcResponse, DdaResponse, PinResponse,
                                  CryptogramResponse, ExtAuthResponse, CardErrorResponse>;

// --- card state machine -----------------------------------------------------

enum class CardPhase : uint8_t { Idle, Read, ArqcDone, ExtAuthDone, Done };

struct CardState {
    StaticCardData static_data;
    Udk udk{};
    Udk dda_key{};
    Atc atc{};
    std::string pin;  // 4 digits
    bool disabled = false;

    // per-session machine state, reset by READ RECORDS
    CardPhase phase = CardPhase::Idle;
    Atc session_atc{};
    std::array<uint8_t, 8> last_arqc_mac{};
    bool ext_auth_performed = false;
    bool ext_auth_succeeded = false;
};

/// Pure card step function. A disabled card answers nothing (nullopt).
std::pair<CardState, std::optional<CardResponse>> card_handle(CardState state,
                                                              const CardCommand& cmd);

/// Anything the terminal can talk to through the card slot.
class CardInterface {
public:
    virtual ~CardInterface() = default;
    virtual std::optional<CardResponse> handle(const CardCommand& cmd, SimClock& clock) = 0;
    /// Request-more-time budget spent before the terminal samples the UN.
    virtual uint64_t pre_sample_stall_ms(const SimClock&) { return 0; }
};

/// Genuine card: owns a CardState and forwards to card_handle.
class Card : public CardInterface {
public:
    explicit Card(CardState state) : state_(std::move(state)) {}

    std::optional<CardResponse> handle(const CardCommand& cmd, SimClock&) override {
        auto [next, response] = card_handle(std::move(state_), cmd);
        state_ = std::move(next);
        return response;
    }

    const CardState& state() const { return state_; }
    CardState& state() { return state_; }

private:
    CardState state_;
};

// --- terminal ----------------------------------------------------------------

enum class TerminalMode : uint8_t { AtmOnlinePin, PosOfflinePin };

struct TerminalState {
    uint16_t country = 0;
    UnGenerator* un_source = nullptr;
    TerminalMode mode = TerminalMode::AtmOnlinePin;
    bool verify_sda = false;   // field reality: ATMs skip it
    Udk scheme_key{};          // verification-key stand-in for SDA/DDA checks
    uint16_t currency = 826;   // ISO 4217 numeric
    uint32_t date = 20120101;  // today, yyyymmdd
};

/// Per-card DDA key under the scheme-key stand-in.
Udk derive_dda_key(const Udk& scheme_key, const std::string& pan);

// --- issuer ------------------------------------------------------------------

enum class DeclineReason : uint8_t {
    None = 0,
    UnknownPan,
    BadPin,
    BadMac,
    Replay,
    AtcStale,
    NonceMismatch,
    AtcCommitMismatch,
    InsufficientFunds,
    CardError,
    SdaInvalid,
    DdaInvalid,
    IssuerUnreachable,
};

const char* to_string(DeclineReason reason);

struct AuthRequest {
    std::string pan;
    TransactionContext ctx;
    Cryptogram cryptogram;             // ARQC
    std::optional<Bytes> pin_token;    // present iff online-PIN mode
    uint64_t session_salt = 0;
    std::optional<Atc> committed_atc;  // present iff commitment flow ran
};

struct AuthResponse {
    Arc arc{};
    Arpc arpc{};
    bool approved = false;
    DeclineReason reason = DeclineReason::None;
};

struct IssuerLogRecord {
    uint32_t date = 0;    // yyyymmdd from the request context
    uint64_t time_ms = 0; // simulated clock at authorization
    std::string pan;
    uint16_t atc = 0;
    uint32_t un = 0;
    std::array<uint8_t, 8> mac{};
    uint64_t amount = 0;
    uint16_t country = 0;
    bool approved = false;
    DeclineReason reason = DeclineReason::None;
};

struct SettlementRecord {
    std::string pan;
    Cryptogram tc;
    uint64_t amount = 0;
    uint32_t date = 0;
    bool approved_online = false;
};

struct IssuerAccount {
    Udk udk{};
    std::string pin;
    uint64_t balance = 0;
};

struct IssuerState {
    std::map<std::string, IssuerAccount> accounts;
    std::map<std::string, uint16_t> atc_watermark;        // highest approved ATC
    std::map<std::string, std::set<uint16_t>> seen_atcs;  // approved ATCs
    PolicySet policies;
    std::map<std::string, uint32_t> pending_nonces;
    uint64_t nonce_seed = 0;
    uint64_t nonces_issued = 0;
    std::vector<IssuerLogRecord> log;
    std::vector<SettlementRecord> settlement;
    std::vector<AuditFinding> advisory_findings;  // gap flagging is report-only
};

/// Pure issuer decision step: PIN, MAC, replay and policy checks, then ARPC.
/// Appends one log record per request.
std::pair<IssuerState, AuthResponse> issuer_authorize(IssuerState state, const AuthRequest& req,
                                                      uint64_t now_ms);

class Issuer {
public:
    explicit Issuer(IssuerState state) : state_(std::move(state)) {}

    AuthResponse authorize(const AuthRequest& req, const SimClock& clock) {
        auto [next, resp] = issuer_authorize(std::move(state_), req, clock.now_ms());
        state_ = std::move(next);
        return resp;
    }

    uint32_t issue_nonce(const std::string& pan);
    void settle(SettlementRecord record) { state_.settlement.push_back(std::move(record)); }

    const IssuerState& state() const { return state_; }
    IssuerState& state() { return state_; }

private:
    IssuerState state_;
};

// --- transcript ---------------------------------------------------------------

enum class Direction : uint8_t { TerminalToCard, CardToTerminal, TerminalToIssuer, IssuerToTerminal };

const char* to_string(Direction dir);

struct TranscriptEntry {
    uint32_t seq = 0;
    Direction dir = Direction::TerminalToCard;
    std::string msg;
    Bytes payload;

    bool operator==(const TranscriptEntry&) const = default;
};

/// Append-only message trace over both legs; canonical text form is one
/// "SEQ DIR MSG HEXPAYLOAD" line per entry.
class Transcript {
public:
    void append(Direction dir, std::string msg, Bytes payload);

    const std::vector<TranscriptEntry>& entries() const { return entries_; }
    std::string canonical() const;

    bool operator==(const Transcript& other) const { return entries_ == other.entries_; }

private:
    std::vector<TranscriptEntry> entries_;
};

// --- orchestrator ---------------------------------------------------------------

enum class Outcome : uint8_t { Dispense, Decline, Fail };

const char* to_string(Outcome outcome);

struct TransactionResult {
    Transcript transcript;
    Outcome outcome = Outcome::Fail;
    DeclineReason reason = DeclineReason::None;
    std::optional<Un> un_used;
    std::optional<Cryptogram> arqc;
    std::optional<Cryptogram> tc;
};

/// Message channel between terminal and issuer (acquirer and switch collapsed
/// into it); the man-in-the-middle attaches here. An unreachable issuer is a
/// disconnected channel.
class Channel {
public:
    using Interceptor = std::function<AuthRequest(AuthRequest)>;

    explicit Channel(Issuer* issuer) : issuer_(issuer) {}

    void set_interceptor(Interceptor fn) { interceptor_ = std::move(fn); }
    void disconnect() { connected_ = false; }
    bool connected() const { return connected_ && issuer_ != nullptr; }

    std::optional<AuthResponse> deliver(AuthRequest req, const SimClock& clock);
    std::optional<uint32_t> request_nonce(const std::string& pan);
    void deliver_settlement(SettlementRecord record);

    Issuer* issuer() { return issuer_; }

private:
    Issuer* issuer_;
    bool connected_ = true;
    Interceptor interceptor_;
};

struct RunOptions {
    std::string entered_pin;       // what the person at the keypad typed
    uint64_t session_salt = 0;     // deterministic per-session PIN-token salt
    bool offline_lab = false;      // no issuer leg; ARC fabricated locally
};

/// Milliseconds from session start to the UN sampling instant, before any
/// card-requested stall.
inline constexpr uint64_t kUnSampleOffsetMs = 5000;

/// One full three-phase transaction. Policy flags on the issuer switch in the
/// commitment and issuer-nonce variants.
TransactionResult run_transaction(CardInterface& card, TerminalState& terminal, Channel& channel,
                                  uint64_t amount, SimClock& clock, const RunOptions& options);

/// The issuer-supplied-nonce variant as a named entry point.
TransactionResult run_transaction_issuer_nonce(CardInterface& card, TerminalState& terminal,
                                               Channel& channel, uint64_t amount, SimClock& clock,
                                               const RunOptions& options);

/// Deterministic opaque PIN token; no real cryptography implied.
Bytes make_pin_token(const std::string& pin, uint64_t salt);

}  // namespace emvlab
