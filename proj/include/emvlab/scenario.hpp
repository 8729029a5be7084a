#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emvlab/actors.hpp"
#include "emvlab/policy.hpp"
#include "emvlab/ungen.hpp"

namespace emvlab {

struct MitmConfig {
    // trigger on account number or on a known ARQC value
    std::optional<std::string> trigger_pan;
    std::optional<std::array<uint8_t, 8>> trigger_arqc;
    /// Replace with the UN the attack card is set to play (the usual
    /// coordinated deployment). A fixed replacement can be given instead.
    bool replacement_from_table = true;
    uint32_t replacement_un = 0;
};

struct AttackConfig {
    size_t table_size = 10;
    uint64_t harvest_budget_ms = 30000;
    uint64_t per_harvest_cost_ms = 280;
    int campaign_attempts = 100;
    double rtc_resolution_ms = 1.0;
    uint64_t max_stall_ms = 30000;
    bool genuine_use_between = false;  // victim uses the card once before cash-out
    std::optional<MitmConfig> mitm;
};

struct Economics {
    uint64_t amount = 20000;
    uint16_t currency = 826;
    uint32_t date = 20120629;
    uint16_t country = 826;
};

enum class ExperimentSelection { Campaign, Indistinguishability, Both };

struct ScenarioConfig {
    std::string name = "scenario";
    uint64_t seed = 1;
    GeneratorConfig generator;
    TerminalMode mode = TerminalMode::AtmOnlinePin;
    bool verify_sda = false;
    bool dda = false;  // victim card is DDA-capable and terminals exercise it
    PolicySet policies;
    AttackConfig attack;
    Economics economics;
    ExperimentSelection experiment = ExperimentSelection::Campaign;
};

/// Parses the JSON scenario dialect (schema in the README). Returns the
/// config or a diagnostic naming the offending field.
struct ScenarioParseResult {
    std::optional<ScenarioConfig> config;
    std::string error;
};

ScenarioParseResult parse_scenario(const std::string& json_text);
ScenarioParseResult load_scenario(const std::string& path);
std::string scenario_to_json(const ScenarioConfig& config);

}  // namespace emvlab
