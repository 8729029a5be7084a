#include "emvlab/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace emvlab {

using nlohmann::json;

namespace {

std::string bad_field(const std::string& field, const std::string& why) {
    return "config error: field '" + field + "': " + why;
}

TerminalMode parse_mode(const std::string& text, bool& ok) {
    ok = true;
    if (text == "ATM_ONLINE_PIN") return TerminalMode::AtmOnlinePin;
    if (text == "POS_OFFLINE_PIN") return TerminalMode::PosOfflinePin;
    ok = false;
    return TerminalMode::AtmOnlinePin;
}

}  // namespace

ScenarioParseResult parse_scenario(const std::string& json_text) {
    json doc = json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) return {std::nullopt, "config error: not valid JSON"};
    if (!doc.is_object()) return {std::nullopt, "config error: top level must be an object"};

    ScenarioConfig config;
    try {
        config.name = doc.value("name", std::string("scenario"));
        if (!doc.contains("seed")) return {std::nullopt, bad_field("seed", "required")};
        config.seed = doc.at("seed").get<uint64_t>();

        if (!doc.contains("generator") || !doc["generator"].is_object())
            return {std::nullopt, bad_field("generator", "required object")};
        const json& gen = doc["generator"];
        std::string kind_name = gen.value("kind", std::string());
        auto kind = generator_kind_from_string(kind_name);
        if (!kind)
            return {std::nullopt, bad_field("generator.kind", "unknown kind '" + kind_name + "'")};
        config.generator.kind = *kind;
        config.generator.seed = gen.value("seed", config.seed);
        config.generator.prefix17 = gen.value("prefix17", 0u);
        config.generator.tick_ms = gen.value("tick_ms", 3.3);
        config.generator.jitter = gen.value("jitter", 0.0);
        config.generator.lcg_seed = gen.value("lcg_seed", 0u);
        if (config.generator.kind == GeneratorKind::CounterPrefix && config.generator.tick_ms <= 0)
            return {std::nullopt, bad_field("generator.tick_ms", "must be positive")};

        bool mode_ok = true;
        config.mode = parse_mode(doc.value("mode", std::string("ATM_ONLINE_PIN")), mode_ok);
        if (!mode_ok) return {std::nullopt, bad_field("mode", "must be ATM_ONLINE_PIN or POS_OFFLINE_PIN")};
        config.verify_sda = doc.value("verify_sda", false);
        config.dda = doc.value("dda", false);

        if (doc.contains("policies")) {
            const json& pol = doc["policies"];
            config.policies.atc_monotonic = pol.value("atc_monotonic", false);
            config.policies.atc_gap_flagging = pol.value("atc_gap_flagging", false);
            config.policies.iad_audit = pol.value("iad_audit", false);
            config.policies.atc_commitment = pol.value("atc_commitment", false);
            config.policies.issuer_nonce = pol.value("issuer_nonce", false);
        }
        if (doc.contains("attack")) {
            const json& atk = doc["attack"];
            config.attack.table_size = atk.value("table_size", size_t{10});
            config.attack.harvest_budget_ms = atk.value("harvest_budget_ms", uint64_t{30000});
            config.attack.per_harvest_cost_ms = atk.value("per_harvest_cost_ms", uint64_t{280});
            config.attack.campaign_attempts = atk.value("campaign_attempts", 100);
            config.attack.rtc_resolution_ms = atk.value("rtc_resolution_ms", 1.0);
            config.attack.max_stall_ms = atk.value("max_stall_ms", uint64_t{30000});
            config.attack.genuine_use_between = atk.value("genuine_use_between", false);
            if (config.attack.campaign_attempts < 0)
                return {std::nullopt, bad_field("attack.campaign_attempts", "must be >= 0")};
            if (atk.contains("mitm")) {
                const json& mitm = atk["mitm"];
                MitmConfig mc;
                if (mitm.contains("trigger_pan"))
                    mc.trigger_pan = mitm["trigger_pan"].get<std::string>();
                mc.replacement_from_table = mitm.value("replacement_from_table", true);
                mc.replacement_un = mitm.value("replacement_un", 0u);
                config.attack.mitm = mc;
            }
        }
        if (doc.contains("economics")) {
            const json& eco = doc["economics"];
            config.economics.amount = eco.value("amount", uint64_t{20000});
            config.economics.currency = eco.value("currency", uint16_t{826});
            config.economics.date = eco.value("date", 20120629u);
            config.economics.country = eco.value("country", uint16_t{826});
            if (!is_valid_date(config.economics.date))
                return {std::nullopt, bad_field("economics.date", "not a valid yyyymmdd date")};
        }
        std::string experiment = doc.value("experiment", std::string("campaign"));
        if (experiment == "campaign") {
            config.experiment = ExperimentSelection::Campaign;
        } else if (experiment == "indistinguishability") {
            config.experiment = ExperimentSelection::Indistinguishability;
        } else if (experiment == "both") {
            config.experiment = ExperimentSelection::Both;
        } else {
            return {std::nullopt,
                    bad_field("experiment", "must be campaign, indistinguishability or both")};
        }
    } catch (const json::exception& e) {
        return {std::nullopt, std::string("config error: ") + e.what()};
    }
    return {config, ""};
}

ScenarioParseResult load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) return {std::nullopt, "config error: cannot open " + path};
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str());
}

std::string scenario_to_json(const ScenarioConfig& config) {
    json doc;
    doc["name"] = config.name;
    doc["seed"] = config.seed;
    doc["generator"] = {{"kind", to_string(config.generator.kind)},
                        {"seed", config.generator.seed},
                        {"prefix17", config.generator.prefix17},
                        {"tick_ms", config.generator.tick_ms},
                        {"jitter", config.generator.jitter},
                        {"lcg_seed", config.generator.lcg_seed}};
    doc["mode"] = config.mode == TerminalMode::AtmOnlinePin ? "ATM_ONLINE_PIN" : "POS_OFFLINE_PIN";
    doc["verify_sda"] = config.verify_sda;
    doc["dda"] = config.dda;
    doc["policies"] = {{"atc_monotonic", config.policies.atc_monotonic},
                       {"atc_gap_flagging", config.policies.atc_gap_flagging},
                       {"iad_audit", config.policies.iad_audit},
                       {"atc_commitment", config.policies.atc_commitment},
                       {"issuer_nonce", config.policies.issuer_nonce}};
    doc["attack"] = {{"table_size", config.attack.table_size},
                     {"harvest_budget_ms", config.attack.harvest_budget_ms},
                     {"per_harvest_cost_ms", config.attack.per_harvest_cost_ms},
                     {"campaign_attempts", config.attack.campaign_attempts},
                     {"rtc_resolution_ms", config.attack.rtc_resolution_ms},
                     {"max_stall_ms", config.attack.max_stall_ms},
                     {"genuine_use_between", config.attack.genuine_use_between}};
    if (config.attack.mitm) {
        json mitm;
        if (config.attack.mitm->trigger_pan) mitm["trigger_pan"] = *config.attack.mitm->trigger_pan;
        mitm["replacement_from_table"] = config.attack.mitm->replacement_from_table;
        mitm["replacement_un"] = config.attack.mitm->replacement_un;
        doc["attack"]["mitm"] = mitm;
    }
    doc["economics"] = {{"amount", config.economics.amount},
                        {"currency", config.economics.currency},
                        {"date", config.economics.date},
                        {"country", config.economics.country}};
    switch (config.experiment) {
        case ExperimentSelection::Campaign: doc["experiment"] = "campaign"; break;
        case ExperimentSelection::Indistinguishability: doc["experiment"] = "indistinguishability"; break;
        case ExperimentSelection::Both: doc["experiment"] = "both"; break;
    }
    return doc.dump(2);
}

}  // namespace emvlab
