#include "emvlab/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emvlab {

// --- skimming -----------------------------------------------------------------

PreplayTable skim(Card& card, const std::vector<Un>& targets,
                  const TransactionContext& ctx_template, const SkimParams& params,
                  SimClock& clock) {
    if (targets.empty()) throw std::invalid_argument("skim: no target UNs");
    if (params.per_harvest_cost_ms == 0) throw std::invalid_argument("skim: zero harvest cost");

    PreplayTable table;
    table.pin = card.state().pin;  // keypad capture at the evil terminal

    size_t harvested = 0;
    for (Un target : targets) {
        if ((harvested + 1) * params.per_harvest_cost_ms > params.time_budget_ms) {
            table.partial = true;
            break;
        }
        auto records = card.handle(ReadRecordsCmd{}, clock);
        if (!records || !std::holds_alternative<RecordsResponse>(*records)) {
            table.partial = true;  // victim card stopped answering
            break;
        }
        if (harvested == 0) table.static_data = std::get<RecordsResponse>(*records).data;

        PreplayEntry entry;
        entry.un = target;
        entry.ctx_template = ctx_template;
        entry.ctx_template.un = target;

        if (params.capture_dda &&
            table.static_data.supported_options == CardOptions::DdaCapable) {
            auto dda = card.handle(InternalAuthenticateCmd{target}, clock);
            if (dda && std::holds_alternative<DdaResponse>(*dda))
                entry.dda_sig = std::get<DdaResponse>(*dda).signature;
        }

        auto arqc = card.handle(GenerateAcArqcCmd{entry.ctx_template}, clock);
        if (!arqc || !std::holds_alternative<CryptogramResponse>(*arqc)) {
            table.partial = true;
            break;
        }
        entry.arqc = std::get<CryptogramResponse>(*arqc).cryptogram;

        // no EXTERNAL AUTHENTICATE: the ARPC cannot be produced without the
        // issuer, which is exactly what the settlement audit later keys on
        auto tc = card.handle(GenerateAcTcCmd{entry.ctx_template, Arc::approve()}, clock);
        if (!tc || !std::holds_alternative<CryptogramResponse>(*tc)) {
            table.partial = true;
            break;
        }
        entry.tc = std::get<CryptogramResponse>(*tc).cryptogram;

        table.entries.emplace(target.value, std::move(entry));
        ++harvested;
        clock.advance(params.per_harvest_cost_ms);
    }
    if (harvested < targets.size()) table.partial = true;
    return table;
}

// --- synchronization -------------------------------------------------------------

StallDecision synchronize(const std::vector<Un>& table_uns, const CounterPrediction& prediction,
                          double nominal_sample_ms, const SyncConfig& sync) {
    const double tick = prediction.window_ms();
    const double res = std::max(sync.rtc_resolution_ms, 0.0);
    const double cycle = static_cast<double>(prediction.modulus) * tick;
    const double latest = nominal_sample_ms + static_cast<double>(sync.max_stall_ms);
    const int shift = 32 - prediction.prefix_bits;

    // group in-prefix counters into runs of consecutive values (wrap-aware)
    std::vector<uint64_t> counters;
    for (Un un : table_uns) {
        if ((un.value >> shift) != prediction.prefix_value) continue;  // can never come up
        counters.push_back(un.value & (prediction.modulus - 1));
    }
    if (counters.empty()) return {};
    std::sort(counters.begin(), counters.end());
    counters.erase(std::unique(counters.begin(), counters.end()), counters.end());

    struct Run {
        uint64_t first = 0;
        uint64_t length = 1;
    };
    std::vector<Run> runs;
    for (uint64_t c : counters) {
        if (!runs.empty() && runs.back().first + runs.back().length == c) {
            runs.back().length += 1;
        } else {
            runs.push_back(Run{c, 1});
        }
    }
    // merge a run that wraps through zero
    if (runs.size() > 1 && runs.front().first == 0 &&
        runs.back().first + runs.back().length == prediction.modulus) {
        runs.back().length += runs.front().length;
        runs.erase(runs.begin());
    }

    StallDecision best;
    double best_aim = std::numeric_limits<double>::infinity();
    for (const Run& run : runs) {
        const double span = static_cast<double>(run.length) * tick;
        double start = prediction.next_window_start(run.first, nominal_sample_ms - span);
        for (int occurrence = 0; occurrence < 2; ++occurrence) {
            // aim so that the landing interval [aim, aim + res) is centred on
            // the run; with res <= span the landing stays inside the run
            double aim = start + static_cast<double>(occurrence) * cycle + span / 2.0 - res / 2.0;
            if (aim < nominal_sample_ms) continue;
            if (aim > latest) break;
            if (aim < best_aim) {
                best_aim = aim;
                best.window_found = true;
                best.wait_ms = static_cast<uint64_t>(std::llround(aim - nominal_sample_ms));
                double center = aim + res / 2.0;
                uint64_t offset_windows = static_cast<uint64_t>(
                    std::clamp(std::floor((center - start - occurrence * cycle) / tick), 0.0,
                               static_cast<double>(run.length - 1)));
                best.intended_un =
                    Un{(prediction.prefix_value << shift) |
                       static_cast<uint32_t>((run.first + offset_windows) & (prediction.modulus - 1))};
            }
            break;  // earliest reachable occurrence of this run is enough
        }
    }
    return best;
}

// --- the programmed clone ----------------------------------------------------------

const PreplayEntry* PreplayCard::first_unused() {
    const PreplayEntry* best = nullptr;
    for (const auto& [un, entry] : cfg_.table.entries) {
        if (used_atcs_.contains(entry.arqc.atc.value)) continue;
        if (!best || entry.arqc.atc.value < best->arqc.atc.value) best = &entry;
    }
    return best;
}

const PreplayEntry* PreplayCard::lookup(Un un) {
    auto it = cfg_.table.entries.find(un.value);
    if (it == cfg_.table.entries.end()) return nullptr;
    if (used_atcs_.contains(it->second.arqc.atc.value)) return nullptr;
    return &it->second;
}

void PreplayCard::plan(uint64_t now_ms) {
    if (planned_) return;
    planned_ = true;
    decision_ = StallDecision{};
    uint64_t session_start = session_start_ms_.value_or(now_ms);
    double nominal = static_cast<double>(session_start + kUnSampleOffsetMs);
    if (cfg_.prediction) {
        std::vector<Un> unused;
        for (const auto& [un, entry] : cfg_.table.entries)
            if (!used_atcs_.contains(entry.arqc.atc.value)) unused.push_back(Un{un});
        decision_ = synchronize(unused, *cfg_.prediction, nominal, cfg_.sync);
    }
}

const PreplayEntry* PreplayCard::intended_entry() {
    if (decision_.window_found) {
        auto it = cfg_.table.entries.find(decision_.intended_un.value);
        if (it != cfg_.table.entries.end()) return &it->second;
    }
    return first_unused();
}

std::optional<Un> PreplayCard::next_play_un() {
    const PreplayEntry* entry = intended_entry();
    if (!entry) return std::nullopt;
    return entry->un;
}

uint64_t PreplayCard::pre_sample_stall_ms(const SimClock& clock) {
    plan(clock.now_ms());
    if (!decision_.window_found) return 0;
    // delivered late by the card's RTC quantization error
    return decision_.wait_ms + static_cast<uint64_t>(std::llround(cfg_.rtc_error_ms));
}

std::optional<CardResponse> PreplayCard::handle(const CardCommand& cmd, SimClock& clock) {
    if (!session_start_ms_) session_start_ms_ = clock.now_ms();

    if (std::holds_alternative<ReadRecordsCmd>(cmd)) {
        // a fresh session: re-plan against this session's timing
        session_start_ms_ = clock.now_ms();
        planned_ = false;
        playing_ = nullptr;
        return RecordsResponse{cfg_.table.static_data};
    }

    if (std::holds_alternative<GetDataAtcCmd>(cmd)) {
        // commit to the entry this card means to play: answer one below its
        // ATC so the terminal's expected next AC matches the stored ARQC
        plan(clock.now_ms());
        const PreplayEntry* entry = intended_entry();
        uint16_t atc = entry ? static_cast<uint16_t>(entry->arqc.atc.value - 1) : 0;
        return AtcResponse{Atc{atc}};
    }
    if (const auto* ia = std::get_if<InternalAuthenticateCmd>(&cmd)) {
        const PreplayEntry* entry = cfg_.play_any ? intended_entry() : lookup(ia->un);
        if (!entry || entry->dda_sig.empty())
            return CardErrorResponse{CardErrorCode::FeignedFailure};
        return DdaResponse{entry->dda_sig};
    }
    if (const auto* vp = std::get_if<VerifyPinCmd>(&cmd))
        return PinResponse{vp->pin == cfg_.table.pin};

    if (const auto* gen = std::get_if<GenerateAcArqcCmd>(&cmd)) {
        plan(clock.now_ms());
        const PreplayEntry* entry = cfg_.play_any ? intended_entry() : lookup(gen->ctx.un);
        if (entry) {
            const TransactionContext& t = entry->ctx_template;
            bool economics_match = gen->ctx.amount == t.amount && gen->ctx.currency == t.currency &&
                                   gen->ctx.date == t.date &&
                                   gen->ctx.terminal_country == t.terminal_country;
            if (!economics_match) entry = nullptr;
        }
        if (!entry) return CardErrorResponse{CardErrorCode::FeignedFailure};
        used_atcs_.insert(entry->arqc.atc.value);
        playing_ = entry;
        return CryptogramResponse{entry->arqc};
    }
    if (std::holds_alternative<ExternalAuthenticateCmd>(cmd)) {
        // cannot verify the ARPC; accept silently
        return ExtAuthResponse{true};
    }
    if (std::holds_alternative<GenerateAcTcCmd>(cmd)) {
        if (!playing_) return CardErrorResponse{CardErrorCode::FeignedFailure};
        return CryptogramResponse{playing_->tc};
    }
    return CardErrorResponse{CardErrorCode::FeignedFailure};
}

// --- network interceptor --------------------------------------------------------------

void mitm_rewrite_un(Channel& channel, const std::optional<std::string>& trigger_pan,
                     const std::optional<std::array<uint8_t, 8>>& trigger_arqc, Un replacement_un) {
    channel.set_interceptor([=](AuthRequest req) {
        bool match = true;
        if (trigger_pan && req.pan != *trigger_pan) match = false;
        if (trigger_arqc && req.cryptogram.mac != *trigger_arqc) match = false;
        if (match) req.ctx.un = replacement_un;
        return req;
    });
}

// --- scenario assets --------------------------------------------------------------------

namespace {

constexpr uint16_t kVictimAtc0 = 5;

Udk udk_from_stream(Sha256Stream& stream) {
    Udk key;
    for (int i = 0; i < 4; ++i) {
        uint32_t w = stream.next_u32();
        key.bytes[4 * i] = static_cast<uint8_t>(w >> 24);
        key.bytes[4 * i + 1] = static_cast<uint8_t>(w >> 16);
        key.bytes[4 * i + 2] = static_cast<uint8_t>(w >> 8);
        key.bytes[4 * i + 3] = static_cast<uint8_t>(w);
    }
    return key;
}

struct ScenarioAssets {
    Udk scheme_key;
    Udk victim_udk;
    Udk attacker_udk;
    std::string victim_pan = "5301250070000191";
    std::string attacker_pan = "4929036000000123";
    std::string victim_pin = "4931";
    std::string attacker_pin = "1005";
};

ScenarioAssets make_assets(const ScenarioConfig& scenario) {
    ScenarioAssets assets;
    Sha256Stream stream(scenario.seed ^ 0x454d564c41423031ull);
    assets.scheme_key = udk_from_stream(stream);
    assets.victim_udk = udk_from_stream(stream);
    assets.attacker_udk = udk_from_stream(stream);
    return assets;
}

CardState make_card(const ScenarioAssets& assets, const ScenarioConfig& scenario,
                    const std::string& pan, const Udk& udk, const std::string& pin) {
    CardState card;
    card.static_data.pan = pan;
    card.static_data.start_date = 201001;
    card.static_data.expiry_date = 201406;
    card.static_data.supported_options =
        scenario.dda ? CardOptions::DdaCapable : CardOptions::SdaOnly;
    card.static_data.records.push_back(Bytes(pan.begin(), pan.end()));
    card.static_data.records.push_back(Bytes{0x5f, 0x24, 0x03, 0x14, 0x06, 0x30});
    card.static_data.sda_signature =
        sign_static_data(card.static_data.records, assets.scheme_key);
    card.udk = udk;
    card.dda_key = derive_dda_key(assets.scheme_key, pan);
    card.atc = Atc{kVictimAtc0};
    card.pin = pin;
    return card;
}

IssuerState make_issuer_state(const ScenarioAssets& assets, const ScenarioConfig& scenario) {
    IssuerState state;
    state.policies = scenario.policies;
    state.nonce_seed = scenario.seed ^ 0x4e4f4e4345ull;
    state.accounts[assets.victim_pan] =
        IssuerAccount{assets.victim_udk, assets.victim_pin, scenario.economics.amount * 8 + 1};
    state.accounts[assets.attacker_pan] =
        IssuerAccount{assets.attacker_udk, assets.attacker_pin, scenario.economics.amount * 8 + 1};
    return state;
}

TerminalState make_terminal(const ScenarioAssets& assets, const ScenarioConfig& scenario,
                            UnGenerator* generator) {
    TerminalState terminal;
    terminal.country = scenario.economics.country;
    terminal.currency = scenario.economics.currency;
    terminal.date = scenario.economics.date;
    terminal.un_source = generator;
    terminal.mode = scenario.mode;
    terminal.verify_sda = scenario.verify_sda;
    terminal.scheme_key = assets.scheme_key;
    return terminal;
}

TransactionContext make_template(const ScenarioConfig& scenario) {
    TransactionContext ctx;
    ctx.amount = scenario.economics.amount;
    ctx.currency = scenario.economics.currency;
    ctx.date = scenario.economics.date;
    ctx.terminal_country = scenario.economics.country;
    ctx.tvr.set_sda_not_verified(!scenario.verify_sda);
    return ctx;
}

CounterPrediction exact_counter_prediction(const GeneratorConfig& config) {
    CounterPrediction pred;
    pred.prefix_value = config.prefix17 & 0x1FFFF;
    pred.prefix_bits = 17;
    pred.modulus = 1u << 15;
    pred.ticks_per_ms = 1.0 / config.tick_ms;
    pred.phase_ms = 0.0;
    pred.anchor_counter = 0;
    return pred;
}

Un counter_un(const GeneratorConfig& config, uint64_t counter) {
    return Un{((config.prefix17 & 0x1FFFF) << 15) | static_cast<uint32_t>(counter & 0x7FFF)};
}

}  // namespace

// --- indistinguishability experiment -------------------------------------------------------

ExperimentResult indistinguishability_experiment(const CardState& card_a, const CardState& card_b,
                                                 const ScenarioConfig& scenario,
                                                 const ExperimentOptions& options) {
    if (card_a.atc != card_b.atc || !(card_a.static_data == card_b.static_data))
        throw std::invalid_argument("experiment invalid: cards differ in ATC or static data");

    const uint64_t t0[2] = {1'000'000, 1'060'000};
    const TransactionContext ctx_template = make_template(scenario);
    ScenarioAssets assets = make_assets(scenario);

    auto run_pair = [&](CardInterface& card) {
        std::vector<Transcript> transcripts;
        UnGenerator generator(scenario.generator);
        TerminalState terminal = make_terminal(assets, scenario, &generator);
        Channel channel(nullptr);
        for (int j = 0; j < 2; ++j) {
            SimClock clock(t0[j]);
            RunOptions opts;
            opts.offline_lab = true;
            auto result = run_transaction(card, terminal, channel, scenario.economics.amount,
                                          clock, opts);
            transcripts.push_back(std::move(result.transcript));
        }
        return transcripts;
    };

    // steps 1-2: two transactions each on A and B
    Card a(card_a);
    Card b(card_b);
    auto traces_a = run_pair(a);
    auto traces_b = run_pair(b);

    // step 3: GENERATE AC responses (whole traces) must match
    if (!(traces_a[0] == traces_b[0]) || !(traces_a[1] == traces_b[1]))
        return ExperimentResult{ExperimentVerdict::Distinguishable, 3};

    // step 4: skim two ARQCs from A, for the UNs the lab terminal will use
    std::vector<Un> targets;
    {
        UnGenerator probe(scenario.generator);
        SimClock probe_clock;
        for (int j = 0; j < 2; ++j) {
            probe_clock.advance_to(t0[j] + kUnSampleOffsetMs);
            targets.push_back(probe.next(probe_clock));
        }
    }
    TransactionContext skim_template = ctx_template;
    if (options.preplay_template_date) skim_template.date = *options.preplay_template_date;
    SimClock skim_clock;
    PreplayTable table =
        skim(a, targets, skim_template, SkimParams{280, 30000, scenario.dda}, skim_clock);

    // step 5: program the pre-play card from A's data
    AttackCardConfig cfg;
    cfg.table = std::move(table);
    cfg.sync = SyncConfig{1.0, 30000};
    if (scenario.generator.kind == GeneratorKind::CounterPrefix)
        cfg.prediction = exact_counter_prediction(scenario.generator);
    PreplayCard preplay(std::move(cfg));

    // steps 6-7: two transactions on B, two on the pre-play card
    auto traces_b2 = run_pair(b);
    auto traces_p = run_pair(preplay);

    // step 8: final comparison
    if (!(traces_b2[0] == traces_p[0]) || !(traces_b2[1] == traces_p[1]))
        return ExperimentResult{ExperimentVerdict::Distinguishable, 8};
    return ExperimentResult{ExperimentVerdict::Identical, 0};
}

// --- campaign --------------------------------------------------------------------------------

namespace {

constexpr size_t kMaxStoredTranscripts = 512;

void record_attempt(CampaignReport& report, const TransactionResult& result, bool preplay) {
    AttemptRecord record;
    record.preplay = preplay;
    record.outcome = result.outcome;
    record.reason = result.reason;
    if (result.un_used) record.un = result.un_used->value;
    if (result.arqc) record.atc = result.arqc->atc.value;
    report.attempt_log.push_back(record);
    if (preplay) {
        report.attempts += 1;
        switch (result.outcome) {
            case Outcome::Dispense: report.dispenses += 1; break;
            case Outcome::Decline:
                report.declines_by_reason[to_string(result.reason)] += 1;
                break;
            case Outcome::Fail: report.fails += 1; break;
        }
    } else {
        report.genuine_runs += 1;
        if (result.outcome != Outcome::Dispense) report.genuine_declines += 1;
    }
}

}  // namespace

CampaignResult run_campaign(const ScenarioConfig& scenario) {
    CampaignResult out;
    CampaignReport& report = out.report;
    report.scenario_name = scenario.name;
    report.seed = scenario.seed;

    const ScenarioAssets assets = make_assets(scenario);
    const TransactionContext ctx_template = make_template(scenario);
    const GeneratorConfig& gen_config = scenario.generator;
    const AttackConfig& attack = scenario.attack;
    const size_t k = std::max<size_t>(1, attack.table_size);
    const bool consuming = gen_config.kind != GeneratorKind::Strong || attack.mitm.has_value();

    // non-consuming scenarios reuse one harvested table across attempts
    std::optional<PreplayTable> shared_table;

    for (int attempt = 0; attempt < attack.campaign_attempts; ++attempt) {
        SplitMix64 rng(scenario.seed * 0x100000001b3ull + static_cast<uint64_t>(attempt));

        Card victim(make_card(assets, scenario, assets.victim_pan, assets.victim_udk,
                              assets.victim_pin));
        Issuer issuer(make_issuer_state(assets, scenario));
        UnGenerator generator(gen_config);
        TerminalState terminal = make_terminal(assets, scenario, &generator);
        Channel channel(&issuer);

        // --- attacker targeting -------------------------------------------
        std::vector<Un> targets;
        std::optional<CounterPrediction> prediction;
        uint64_t t_insert = 0;
        switch (gen_config.kind) {
            case GeneratorKind::CounterPrefix: {
                prediction = exact_counter_prediction(gen_config);
                uint64_t c_base = rng.next_below(1u << 15);
                for (size_t j = 0; j < k; ++j)
                    targets.push_back(counter_un(gen_config, c_base + j));
                uint64_t occurrence = 10 + rng.next_below(990);
                double aim = (static_cast<double>(occurrence * (1ull << 15) + c_base) +
                              static_cast<double>(k) / 2.0) *
                             gen_config.tick_ms;
                uint64_t lead = rng.next_below(1000);  // timed insertion, 1 s accuracy
                t_insert = static_cast<uint64_t>(aim) - kUnSampleOffsetMs - lead;
                break;
            }
            case GeneratorKind::TruncLcg:
            case GeneratorKind::TimeSeeded: {
                // two probe transactions with the attacker's own card expose
                // the state; the next k UNs are then known
                t_insert = rng.next_below(100'000'000);
                SimClock probe_clock(t_insert);
                Card attacker_card(make_card(assets, scenario, assets.attacker_pan,
                                             assets.attacker_udk, assets.attacker_pin));
                UnSequence probes;
                for (int p = 0; p < 2; ++p) {
                    RunOptions opts;
                    opts.entered_pin = assets.attacker_pin;
                    opts.session_salt = rng.next();
                    auto result = run_transaction(attacker_card, terminal, channel, 0,
                                                  probe_clock, opts);
                    if (result.un_used)
                        probes.push_back(UnObservation{probe_clock.now_ms(), *result.un_used, "probe"});
                    probe_clock.advance(15'000);
                }
                auto predicted = predict(GeneratorKind::TruncLcg, probes);
                if (const auto* lcg = std::get_if<LcgPrediction>(&predicted)) {
                    for (const Un& un : lcg->next_uns)
                        if (targets.size() < k) targets.push_back(un);
                }
                if (targets.empty()) targets.push_back(Un{rng.next_u32()});
                t_insert = probe_clock.now_ms();
                break;
            }
            case GeneratorKind::Book4Suggested: {
                // freshly rebooted terminal: accumulator zero, first draw is
                // transaction 1, and the insertion time pins the clock second
                t_insert = rng.next_below(100'000'000);
                uint64_t sample_second = (t_insert + kUnSampleOffsetMs) / 1000;
                targets.push_back(predict_book4_post_reboot(Atc{1}, sample_second));
                break;
            }
            case GeneratorKind::CharC: {
                // the attacker knows the mask and wastes no targets outside it
                for (size_t j = 0; j < k; ++j) targets.push_back(Un{rng.next_u32() & CharCGen::kMask});
                t_insert = rng.next_below(100'000'000);
                break;
            }
            case GeneratorKind::Strong:
            default: {
                for (size_t j = 0; j < k; ++j) targets.push_back(Un{rng.next_u32()});
                t_insert = rng.next_below(100'000'000);
                break;
            }
        }

        // --- harvest --------------------------------------------------------
        PreplayTable table;
        if (!consuming && shared_table) {
            table = *shared_table;
        } else {
            SimClock skim_clock;
            table = skim(victim, targets, ctx_template,
                         SkimParams{attack.per_harvest_cost_ms, attack.harvest_budget_ms,
                                    scenario.dda},
                         skim_clock);
            if (!consuming) shared_table = table;
        }

        // --- optional genuine use between skim and cash-out ------------------
        if (attack.genuine_use_between) {
            SimClock genuine_clock(t_insert > 600'000 ? t_insert - 600'000 : 0);
            RunOptions opts;
            opts.entered_pin = assets.victim_pin;
            opts.session_salt = rng.next();
            auto result = run_transaction(victim, terminal, channel, scenario.economics.amount,
                                          genuine_clock, opts);
            record_attempt(report, result, false);
            if (out.transcripts.size() < kMaxStoredTranscripts)
                out.transcripts.push_back(result.transcript);
        }

        // --- cash-out ---------------------------------------------------------
        AttackCardConfig cfg;
        cfg.table = std::move(table);
        cfg.sync = SyncConfig{attack.rtc_resolution_ms, attack.max_stall_ms};
        cfg.prediction = prediction;
        cfg.rtc_error_ms = rng.next_unit() * std::max(attack.rtc_resolution_ms, 0.0);
        cfg.play_any = attack.mitm.has_value();
        PreplayCard preplay(std::move(cfg));

        if (attack.mitm) {
            Un replacement{attack.mitm->replacement_un};
            if (attack.mitm->replacement_from_table)
                replacement = preplay.next_play_un().value_or(replacement);
            mitm_rewrite_un(channel, attack.mitm->trigger_pan.value_or(assets.victim_pan),
                            attack.mitm->trigger_arqc, replacement);
        }

        SimClock clock(t_insert);
        RunOptions opts;
        opts.entered_pin = assets.victim_pin;  // captured with the card data
        opts.session_salt = rng.next();
        auto result = scenario.policies.issuer_nonce
                          ? run_transaction_issuer_nonce(preplay, terminal, channel,
                                                         scenario.economics.amount, clock, opts)
                          : run_transaction(preplay, terminal, channel,
                                            scenario.economics.amount, clock, opts);
        if (result.outcome == Outcome::Dispense)
            report.amount_stolen += scenario.economics.amount;
        record_attempt(report, result, true);
        if (out.transcripts.size() < kMaxStoredTranscripts)
            out.transcripts.push_back(result.transcript);

        // --- issuer-side paperwork --------------------------------------------
        const IssuerState& istate = issuer.state();
        out.issuer_log.insert(out.issuer_log.end(), istate.log.begin(), istate.log.end());
        report.settlement_records += istate.settlement.size();
        if (scenario.policies.iad_audit) {
            auto findings = audit_settlement(istate.settlement);
            report.preplay_settlements_flagged += findings.size();
            report.audit_findings.insert(report.audit_findings.end(), findings.begin(),
                                         findings.end());
        }
    }
    return out;
}

CampaignResult dda_replay_check(ScenarioConfig scenario) {
    scenario.dda = true;
    return run_campaign(scenario);
}

}  // namespace emvlab
