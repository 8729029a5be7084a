#include "emvlab/actors.hpp"

#include <cstdio>

namespace emvlab {

const char* to_string(Direction dir) {
    switch (dir) {
        case Direction::TerminalToCard: return "T->C";
        case Direction::CardToTerminal: return "C->T";
        case Direction::TerminalToIssuer: return "T->I";
        case Direction::IssuerToTerminal: return "I->T";
    }
    return "?";
}

const char* to_string(DeclineReason reason) {
    switch (reason) {
        case DeclineReason::None: return "NONE";
        case DeclineReason::UnknownPan: return "UNKNOWN_PAN";
        case DeclineReason::BadPin: return "BAD_PIN";
        case DeclineReason::BadMac: return "BAD_MAC";
        case DeclineReason::Replay: return "REPLAY";
        case DeclineReason::AtcStale: return "ATC_STALE";
        case DeclineReason::NonceMismatch: return "NONCE_MISMATCH";
        case DeclineReason::AtcCommitMismatch: return "ATC_COMMIT_MISMATCH";
        case DeclineReason::InsufficientFunds: return "INSUFFICIENT_FUNDS";
        case DeclineReason::CardError: return "CARD_ERROR";
        case DeclineReason::SdaInvalid: return "SDA_INVALID";
        case DeclineReason::DdaInvalid: return "DDA_INVALID";
        case DeclineReason::IssuerUnreachable: return "ISSUER_UNREACHABLE";
    }
    return "?";
}

const char* to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::Dispense: return "DISPENSE";
        case Outcome::Decline: return "DECLINE";
        case Outcome::Fail: return "FAIL";
    }
    return "?";
}

// --- card state machine -------------------------------------------------------

std::pair<CardState, std::optional<CardResponse>> card_handle(CardState state,
                                                              const CardCommand& cmd) {
    if (state.disabled) return {std::move(state), std::nullopt};

    auto error = [&](CardErrorCode code) -> std::pair<CardState, std::optional<CardResponse>> {
        return {std::move(state), CardErrorResponse{code}};
    };

    if (std::holds_alternative<ReadRecordsCmd>(cmd)) {
        state.phase = CardPhase::Read;
        state.ext_auth_performed = false;
        state.ext_auth_succeeded = false;
        auto data = state.static_data;
        return {std::move(state), RecordsResponse{std::move(data)}};
    }
    if (std::holds_alternative<GetDataAtcCmd>(cmd)) {
        auto atc = state.atc;
        return {std::move(state), AtcResponse{atc}};
    }
    if (const auto* ia = std::get_if<InternalAuthenticateCmd>(&cmd)) {
        if (state.phase != CardPhase::Read) return error(CardErrorCode::OutOfOrder);
        if (state.static_data.supported_options != CardOptions::DdaCapable)
            return error(CardErrorCode::NotSupported);
        auto sig = dda_sign(state.dda_key, ia->un);
        return {std::move(state), DdaResponse{std::move(sig)}};
    }
    if (const auto* vp = std::get_if<VerifyPinCmd>(&cmd)) {
        if (state.phase != CardPhase::Read) return error(CardErrorCode::OutOfOrder);
        bool ok = vp->pin == state.pin;
        return {std::move(state), PinResponse{ok}};
    }
    if (const auto* gen = std::get_if<GenerateAcArqcCmd>(&cmd)) {
        if (state.phase != CardPhase::Read) return error(CardErrorCode::OutOfOrder);
        if (state.atc.value + 1 >= Atc::kMax) {
            state.disabled = true;  // counter exhausted; card retires itself
            return {std::move(state), std::nullopt};
        }
        state.atc.value += 1;
        state.session_atc = state.atc;
        Cryptogram arqc = compute_cryptogram(CryptogramKind::ARQC, state.udk, gen->ctx,
                                             state.session_atc, Iad::from_ext_auth(false, false));
        state.last_arqc_mac = arqc.mac;
        state.phase = CardPhase::ArqcDone;
        return {std::move(state), CryptogramResponse{std::move(arqc)}};
    }
    if (const auto* ea = std::get_if<ExternalAuthenticateCmd>(&cmd)) {
        if (state.phase != CardPhase::ArqcDone) return error(CardErrorCode::OutOfOrder);
        bool ok = verify_arpc(state.udk, state.session_atc, state.last_arqc_mac, ea->arc, ea->arpc);
        state.ext_auth_performed = true;
        state.ext_auth_succeeded = ok;
        state.phase = CardPhase::ExtAuthDone;
        return {std::move(state), ExtAuthResponse{ok}};
    }
    if (const auto* tc = std::get_if<GenerateAcTcCmd>(&cmd)) {
        if (state.phase != CardPhase::ArqcDone && state.phase != CardPhase::ExtAuthDone)
            return error(CardErrorCode::OutOfOrder);
        Cryptogram cert = compute_cryptogram(
            CryptogramKind::TC, state.udk, tc->ctx, state.session_atc,
            Iad::from_ext_auth(state.ext_auth_performed, state.ext_auth_succeeded), tc->arc);
        state.phase = CardPhase::Done;
        return {std::move(state), CryptogramResponse{std::move(cert)}};
    }
    return error(CardErrorCode::OutOfOrder);
}

// --- helpers --------------------------------------------------------------------

Udk derive_dda_key(const Udk& scheme_key, const std::string& pan) {
    Bytes msg{'D', 'D', 'A', 'K', 'E', 'Y'};
    msg.insert(msg.end(), pan.begin(), pan.end());
    auto digest = hmac_sha256(Bytes(scheme_key.bytes.begin(), scheme_key.bytes.end()), msg);
    Udk key;
    std::copy_n(digest.begin(), 16, key.bytes.begin());
    return key;
}

Bytes make_pin_token(const std::string& pin, uint64_t salt) {
    Bytes msg{'P', 'I', 'N', 'T', 'O', 'K'};
    msg.insert(msg.end(), pin.begin(), pin.end());
    put_be64(msg, salt);
    auto digest = sha256(msg);
    return Bytes(digest.begin(), digest.begin() + 8);
}

/// Transaction fields without the card-supplied tail; the wire form of a
/// GENERATE AC request.
static Bytes serialize_ctx_fields(const TransactionContext& ctx) {
    Bytes out;
    out.reserve(25);
    put_be64(out, ctx.amount);
    put_be16(out, ctx.currency);
    put_be32(out, ctx.date);
    put_be16(out, ctx.terminal_country);
    out.insert(out.end(), ctx.tvr.bits.begin(), ctx.tvr.bits.end());
    put_be32(out, ctx.un.value);
    return out;
}

static Bytes serialize_cryptogram(const Cryptogram& c) {
    Bytes out{static_cast<uint8_t>(c.kind)};
    out.insert(out.end(), c.mac.begin(), c.mac.end());
    put_be16(out, c.atc.value);
    out.push_back(static_cast<uint8_t>(c.iad.bytes.size()));
    out.insert(out.end(), c.iad.bytes.begin(), c.iad.bytes.end());
    return out;
}

static Bytes serialize_static_data(const StaticCardData& d) {
    Bytes out;
    out.push_back(static_cast<uint8_t>(d.pan.size()));
    out.insert(out.end(), d.pan.begin(), d.pan.end());
    put_be32(out, d.start_date);
    put_be32(out, d.expiry_date);
    out.push_back(static_cast<uint8_t>(d.supported_options));
    out.push_back(static_cast<uint8_t>(d.records.size()));
    for (const Bytes& record : d.records) {
        put_be32(out, static_cast<uint32_t>(record.size()));
        out.insert(out.end(), record.begin(), record.end());
    }
    out.push_back(static_cast<uint8_t>(d.sda_signature.size()));
    out.insert(out.end(), d.sda_signature.begin(), d.sda_signature.end());
    return out;
}

static Bytes serialize_auth_request(const AuthRequest& req) {
    Bytes out;
    out.push_back(static_cast<uint8_t>(req.pan.size()));
    out.insert(out.end(), req.pan.begin(), req.pan.end());
    Bytes ctx = serialize_ctx_fields(req.ctx);
    out.insert(out.end(), ctx.begin(), ctx.end());
    Bytes cg = serialize_cryptogram(req.cryptogram);
    out.insert(out.end(), cg.begin(), cg.end());
    uint8_t flags = 0;
    if (req.pin_token) flags |= 0x01;
    if (req.committed_atc) flags |= 0x02;
    out.push_back(flags);
    if (req.pin_token) {
        put_be64(out, req.session_salt);
        out.insert(out.end(), req.pin_token->begin(), req.pin_token->end());
    }
    if (req.committed_atc) put_be16(out, req.committed_atc->value);
    return out;
}

static Bytes serialize_auth_response(const AuthResponse& resp) {
    Bytes out;
    auto arc = resp.arc.to_bytes();
    out.insert(out.end(), arc.begin(), arc.end());
    out.insert(out.end(), resp.arpc.mac.begin(), resp.arpc.mac.end());
    out.push_back(resp.approved ? 1 : 0);
    out.push_back(static_cast<uint8_t>(resp.reason));
    return out;
}

// --- transcript -------------------------------------------------------------------

void Transcript::append(Direction dir, std::string msg, Bytes payload) {
    entries_.push_back(TranscriptEntry{static_cast<uint32_t>(entries_.size()), dir, std::move(msg),
                                       std::move(payload)});
}

std::string Transcript::canonical() const {
    std::string out;
    for (const auto& entry : entries_) {
        char head[32];
        std::snprintf(head, sizeof(head), "%04u ", entry.seq);
        out += head;
        out += to_string(entry.dir);
        out += ' ';
        out += entry.msg;
        out += ' ';
        out += to_hex(entry.payload);
        out += '\n';
    }
    return out;
}

// --- issuer ------------------------------------------------------------------------

uint32_t Issuer::issue_nonce(const std::string& pan) {
    Sha256Stream stream(state_.nonce_seed + state_.nonces_issued);
    state_.nonces_issued += 1;
    uint32_t nonce = stream.next_u32();
    state_.pending_nonces[pan] = nonce;
    return nonce;
}

std::pair<IssuerState, AuthResponse> issuer_authorize(IssuerState state, const AuthRequest& req,
                                                      uint64_t now_ms) {
    auto finish = [&](bool approved, DeclineReason reason,
                      Arpc arpc = Arpc{}) -> std::pair<IssuerState, AuthResponse> {
        IssuerLogRecord record;
        record.date = req.ctx.date;
        record.time_ms = now_ms;
        record.pan = req.pan;
        record.atc = req.cryptogram.atc.value;
        record.un = req.ctx.un.value;
        record.mac = req.cryptogram.mac;
        record.amount = req.ctx.amount;
        record.country = req.ctx.terminal_country;
        record.approved = approved;
        record.reason = reason;
        state.log.push_back(std::move(record));
        AuthResponse resp;
        resp.approved = approved;
        resp.arc = approved ? Arc::approve() : Arc::decline();
        resp.arpc = arpc;
        resp.reason = reason;
        return {std::move(state), resp};
    };

    auto account_it = state.accounts.find(req.pan);
    if (account_it == state.accounts.end()) return finish(false, DeclineReason::UnknownPan);
    IssuerAccount& account = account_it->second;

    if (state.policies.issuer_nonce) {
        auto nonce_it = state.pending_nonces.find(req.pan);
        bool ok = nonce_it != state.pending_nonces.end() && nonce_it->second == req.ctx.un.value;
        if (nonce_it != state.pending_nonces.end()) state.pending_nonces.erase(nonce_it);
        if (!ok) return finish(false, DeclineReason::NonceMismatch);
    }
    if (req.pin_token) {
        if (*req.pin_token != make_pin_token(account.pin, req.session_salt))
            return finish(false, DeclineReason::BadPin);
    }
    if (!verify_cryptogram(CryptogramKind::ARQC, account.udk, req.ctx, req.cryptogram))
        return finish(false, DeclineReason::BadMac);

    uint16_t atc = req.cryptogram.atc.value;
    auto& seen = state.seen_atcs[req.pan];
    if (seen.contains(atc)) return finish(false, DeclineReason::Replay);

    auto watermark_it = state.atc_watermark.find(req.pan);
    if (state.policies.atc_monotonic) {
        if (enforce_atc_monotonic(state, req) == MonotonicDecision::DeclineStale)
            return finish(false, DeclineReason::AtcStale);
    }
    if (state.policies.atc_commitment) {
        if (!req.committed_atc || req.committed_atc->value != atc)
            return finish(false, DeclineReason::AtcCommitMismatch);
    }
    if (account.balance < req.ctx.amount) return finish(false, DeclineReason::InsufficientFunds);

    if (state.policies.atc_gap_flagging && watermark_it != state.atc_watermark.end() &&
        atc > watermark_it->second + 1) {
        state.advisory_findings.push_back(
            AuditFinding{req.pan, atc, FindingKind::AtcGap, 0, state.log.size()});
    }

    account.balance -= req.ctx.amount;
    seen.insert(atc);
    uint16_t& watermark = state.atc_watermark[req.pan];
    watermark = std::max(watermark, atc);

    Arpc arpc = compute_arpc(account.udk, req.cryptogram.atc, req.cryptogram.mac, Arc::approve());
    return finish(true, DeclineReason::None, arpc);
}

// --- channel --------------------------------------------------------------------------

std::optional<AuthResponse> Channel::deliver(AuthRequest req, const SimClock& clock) {
    if (!connected()) return std::nullopt;
    if (interceptor_) req = interceptor_(std::move(req));
    return issuer_->authorize(req, clock);
}

std::optional<uint32_t> Channel::request_nonce(const std::string& pan) {
    if (!connected()) return std::nullopt;
    return issuer_->issue_nonce(pan);
}

void Channel::deliver_settlement(SettlementRecord record) {
    if (connected()) issuer_->settle(std::move(record));
}

// --- orchestrator -----------------------------------------------------------------------

namespace {

// fixed per-leg costs, simulated milliseconds
constexpr uint64_t kReadRecordsMs = 200;
constexpr uint64_t kSdaCheckMs = 100;
constexpr uint64_t kGetDataMs = 100;
constexpr uint64_t kNonceRoundTripMs = 400;
constexpr uint64_t kPinEntryMs = 2500;
constexpr uint64_t kCardLegMs = 150;
constexpr uint64_t kAuthRoundTripMs = 800;
constexpr uint64_t kSettleMs = 100;

}  // namespace

static TransactionResult run_flow(CardInterface& card, TerminalState& terminal, Channel& channel,
                                  uint64_t amount, SimClock& clock, const RunOptions& options) {
    const uint32_t date = terminal.date;
    const uint16_t currency = terminal.currency;
    TransactionResult result;
    Transcript& tr = result.transcript;
    const uint64_t session_start = clock.now_ms();
    const PolicySet policies =
        options.offline_lab || channel.issuer() == nullptr ? PolicySet{} : channel.issuer()->state().policies;

    auto fail = [&](DeclineReason reason) {
        result.outcome = Outcome::Fail;
        result.reason = reason;
        return result;
    };
    auto decline = [&](DeclineReason reason) {
        result.outcome = Outcome::Decline;
        result.reason = reason;
        return result;
    };

    // phase 1: card authentication
    tr.append(Direction::TerminalToCard, "READ_RECORDS", {});
    auto records_resp = card.handle(ReadRecordsCmd{}, clock);
    clock.advance(kReadRecordsMs);
    if (!records_resp) return fail(DeclineReason::CardError);
    const auto* records = std::get_if<RecordsResponse>(&*records_resp);
    if (!records) return fail(DeclineReason::CardError);
    tr.append(Direction::CardToTerminal, "RECORDS", serialize_static_data(records->data));
    const StaticCardData& static_data = records->data;

    Tvr tvr;
    if (terminal.verify_sda) {
        clock.advance(kSdaCheckMs);
        if (!verify_static_data(static_data.records, terminal.scheme_key, static_data.sda_signature))
            return fail(DeclineReason::SdaInvalid);
        tvr.set_sda_not_verified(false);
    } else {
        tvr.set_sda_not_verified(true);
    }

    // ATC commitment happens before the UN is revealed to the card
    std::optional<Atc> committed_atc;
    if (policies.atc_commitment) {
        tr.append(Direction::TerminalToCard, "GET_DATA_ATC", {});
        auto atc_resp = card.handle(GetDataAtcCmd{}, clock);
        clock.advance(kGetDataMs);
        if (!atc_resp) return fail(DeclineReason::CardError);
        const auto* atc = std::get_if<AtcResponse>(&*atc_resp);
        if (!atc) return fail(DeclineReason::CardError);
        Bytes payload;
        put_be16(payload, atc->atc.value);
        tr.append(Direction::CardToTerminal, "ATC", payload);
        committed_atc = Atc{static_cast<uint16_t>(atc->atc.value + 1)};  // the AC this session will use
    }

    // issuer-nonce variant: fetch the UN from the issuer
    std::optional<uint32_t> issuer_nonce;
    if (policies.issuer_nonce) {
        Bytes payload;
        payload.push_back(static_cast<uint8_t>(static_data.pan.size()));
        payload.insert(payload.end(), static_data.pan.begin(), static_data.pan.end());
        tr.append(Direction::TerminalToIssuer, "NONCE_REQUEST", payload);
        issuer_nonce = channel.request_nonce(static_data.pan);
        clock.advance(kNonceRoundTripMs);
        if (!issuer_nonce) return fail(DeclineReason::IssuerUnreachable);
        Bytes nonce_payload;
        put_be32(nonce_payload, *issuer_nonce);
        tr.append(Direction::IssuerToTerminal, "NONCE", nonce_payload);
    }

    // phase 2: cardholder verification
    std::optional<Bytes> pin_token;
    if (!options.offline_lab) {
        if (terminal.mode == TerminalMode::AtmOnlinePin) {
            clock.advance(kPinEntryMs);
            pin_token = make_pin_token(options.entered_pin, options.session_salt);
        } else {
            clock.advance(kPinEntryMs);
            tr.append(Direction::TerminalToCard, "VERIFY_PIN",
                      Bytes(options.entered_pin.begin(), options.entered_pin.end()));
            auto pin_resp = card.handle(VerifyPinCmd{options.entered_pin}, clock);
            clock.advance(kCardLegMs);
            if (!pin_resp) return fail(DeclineReason::CardError);
            const auto* pin = std::get_if<PinResponse>(&*pin_resp);
            if (!pin) return fail(DeclineReason::CardError);
            tr.append(Direction::CardToTerminal, "PIN_RESULT", Bytes{pin->ok ? uint8_t{1} : uint8_t{0}});
            if (!pin->ok) return decline(DeclineReason::BadPin);
        }
    }

    // phase 3: authorization. The card may spend its request-more-time budget
    // here, shifting the instant at which the terminal samples the UN.
    uint64_t stall = card.pre_sample_stall_ms(clock);
    clock.advance_to(session_start + kUnSampleOffsetMs + stall);
    Un un;
    if (issuer_nonce) {
        un = Un{*issuer_nonce};
    } else {
        if (!terminal.un_source) return fail(DeclineReason::CardError);
        un = terminal.un_source->next(clock);
    }

    result.un_used = un;

    TransactionContext ctx;
    ctx.amount = amount;
    ctx.currency = currency;
    ctx.date = date;
    ctx.terminal_country = terminal.country;
    ctx.tvr = tvr;
    ctx.un = un;

    if (static_data.supported_options == CardOptions::DdaCapable) {
        Bytes payload;
        put_be32(payload, un.value);
        tr.append(Direction::TerminalToCard, "INTERNAL_AUTHENTICATE", payload);
        auto dda_resp = card.handle(InternalAuthenticateCmd{un}, clock);
        clock.advance(kCardLegMs);
        if (!dda_resp) return fail(DeclineReason::CardError);
        const auto* dda = std::get_if<DdaResponse>(&*dda_resp);
        if (!dda) return fail(DeclineReason::CardError);
        tr.append(Direction::CardToTerminal, "DDA_SIG", dda->signature);
        Udk dda_key = derive_dda_key(terminal.scheme_key, static_data.pan);
        if (dda->signature != dda_sign(dda_key, un)) return fail(DeclineReason::DdaInvalid);
    }

    tr.append(Direction::TerminalToCard, "GENERATE_AC_ARQC", serialize_ctx_fields(ctx));
    auto arqc_resp = card.handle(GenerateAcArqcCmd{ctx}, clock);
    clock.advance(kCardLegMs);
    if (!arqc_resp) return fail(DeclineReason::CardError);
    if (std::holds_alternative<CardErrorResponse>(*arqc_resp)) {
        tr.append(Direction::CardToTerminal, "CARD_ERROR",
                  Bytes{static_cast<uint8_t>(std::get<CardErrorResponse>(*arqc_resp).code)});
        return fail(DeclineReason::CardError);
    }
    const auto* arqc = std::get_if<CryptogramResponse>(&*arqc_resp);
    if (!arqc) return fail(DeclineReason::CardError);
    tr.append(Direction::CardToTerminal, "ARQC", serialize_cryptogram(arqc->cryptogram));
    result.arqc = arqc->cryptogram;
    if (terminal.un_source) terminal.un_source->note_arqc(arqc->cryptogram.mac);

    Arc arc = Arc::approve();
    std::optional<Arpc> arpc;
    if (options.offline_lab) {
        // captive-lab terminal: no network, the ARC is fabricated locally and
        // EXTERNAL AUTHENTICATE is skipped for every card
        arc = Arc::approve();
    } else {
        AuthRequest req;
        req.pan = static_data.pan;
        req.ctx = ctx;
        req.cryptogram = arqc->cryptogram;
        req.pin_token = pin_token;
        req.session_salt = options.session_salt;
        req.committed_atc = committed_atc;
        tr.append(Direction::TerminalToIssuer, "AUTH_REQUEST", serialize_auth_request(req));
        auto auth = channel.deliver(std::move(req), clock);
        clock.advance(kAuthRoundTripMs);
        if (!auth) return fail(DeclineReason::IssuerUnreachable);
        tr.append(Direction::IssuerToTerminal, "AUTH_RESPONSE", serialize_auth_response(*auth));
        if (!auth->approved) return decline(auth->reason);
        arc = auth->arc;
        arpc = auth->arpc;
    }

    if (arpc) {
        Bytes payload;
        auto arc_bytes = arc.to_bytes();
        payload.insert(payload.end(), arc_bytes.begin(), arc_bytes.end());
        payload.insert(payload.end(), arpc->mac.begin(), arpc->mac.end());
        tr.append(Direction::TerminalToCard, "EXTERNAL_AUTHENTICATE", payload);
        auto ea_resp = card.handle(ExternalAuthenticateCmd{arc, *arpc}, clock);
        clock.advance(kCardLegMs);
        if (!ea_resp) return fail(DeclineReason::CardError);
        const auto* ea = std::get_if<ExtAuthResponse>(&*ea_resp);
        if (!ea) return fail(DeclineReason::CardError);
        tr.append(Direction::CardToTerminal, "EXT_AUTH_RESULT", Bytes{ea->ok ? uint8_t{1} : uint8_t{0}});
    }

    Bytes tc_req = serialize_ctx_fields(ctx);
    auto arc_bytes = arc.to_bytes();
    tc_req.insert(tc_req.end(), arc_bytes.begin(), arc_bytes.end());
    tr.append(Direction::TerminalToCard, "GENERATE_AC_TC", tc_req);
    auto tc_resp = card.handle(GenerateAcTcCmd{ctx, arc}, clock);
    clock.advance(kCardLegMs);
    if (!tc_resp) return fail(DeclineReason::CardError);
    const auto* tc = std::get_if<CryptogramResponse>(&*tc_resp);
    if (!tc) return fail(DeclineReason::CardError);
    tr.append(Direction::CardToTerminal, "TC", serialize_cryptogram(tc->cryptogram));
    result.tc = tc->cryptogram;

    if (!options.offline_lab) {
        SettlementRecord settle;
        settle.pan = static_data.pan;
        settle.tc = tc->cryptogram;
        settle.amount = amount;
        settle.date = date;
        settle.approved_online = true;
        tr.append(Direction::TerminalToIssuer, "SETTLE_TC", serialize_cryptogram(tc->cryptogram));
        channel.deliver_settlement(std::move(settle));
        clock.advance(kSettleMs);
    }

    result.outcome = Outcome::Dispense;
    result.reason = DeclineReason::None;
    return result;
}

TransactionResult run_transaction(CardInterface& card, TerminalState& terminal, Channel& channel,
                                  uint64_t amount, SimClock& clock, const RunOptions& options) {
    return run_flow(card, terminal, channel, amount, clock, options);
}

TransactionResult run_transaction_issuer_nonce(CardInterface& card, TerminalState& terminal,
                                               Channel& channel, uint64_t amount, SimClock& clock,
                                               const RunOptions& options) {
    return run_transaction(card, terminal, channel, amount, clock, options);
}

}  // namespace emvlab
