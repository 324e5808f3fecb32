#pragma once

// Safety-case claim tree populated with computed values. Quantitative claims
// carry numbers from the engine; qualitative claims carry analyst evidence,
// shown as a TODO when none was supplied.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "misuse/evaluation.hpp"
#include "misuse/policy.hpp"
#include "misuse/uplift.hpp"

namespace misuse {

inline constexpr const char* kEvidenceTodo = "TODO: analyst evidence required";

struct ClaimNode {
    std::string id;
    std::string statement;
    bool quantitative = false;
    // Ordered (name, value) pairs; names carry units.
    std::vector<std::pair<std::string, double>> values;
    std::optional<std::string> verdict;
    std::vector<std::string> evidence;
    std::vector<ClaimNode> children;

    bool evidence_missing() const { return !quantitative && evidence.empty(); }

    friend bool operator==(const ClaimNode&, const ClaimNode&) = default;
};

struct SafetyCaseInputs {
    std::optional<RiskEstimate> risk_none;
    std::optional<RiskEstimate> risk_pre;
    std::optional<RiskEstimate> risk_post;
    std::optional<GateDecision> predeployment;

    std::optional<double> forecast_risk;
    std::optional<double> forecast_horizon_days;
    // Absent when the forecast simulation never crossed the threshold.
    std::optional<double> crossing_latency_days;
    std::optional<GateDecision> monitor;

    RiskThreshold threshold;
    GracePeriod grace;
    std::optional<BanCostModel> bans;
    std::optional<PatchPolicy> patching;
    std::map<std::string, std::vector<std::string>> evidence;
    // Free-text provenance per parameter, carried into the report verbatim.
    std::map<std::string, std::string> provenance;
};

struct SafetyCaseReport {
    RiskThreshold threshold;
    // How the monitoring decision separates harden from restrict.
    std::string decision_rule;
    std::map<std::string, std::string> provenance;
    ClaimNode root;

    friend bool operator==(const SafetyCaseReport&, const SafetyCaseReport&) = default;
};

// Every claim id in rendering order.
const std::vector<std::string>& claim_ids();

// Throws UsageError naming the claims whose computed inputs are missing.
SafetyCaseReport render_safety_case(const SafetyCaseInputs& inputs);

nlohmann::json to_json(const SafetyCaseReport& report);
SafetyCaseReport safety_case_from_json(const nlohmann::json& j);
std::string render_text(const SafetyCaseReport& report);

}  // namespace misuse
