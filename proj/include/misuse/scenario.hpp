#pragma once

// Scenario files. Analysts write them as YAML (comments allowed); the HTTP
// service accepts the same document as JSON. Field names carry their units.
// Top-level sections: schema_version, threat_model, evasion, whatif, policy,
// engine, evidence and metadata. metadata is free-form provenance and does
// not affect any result or the digest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "misuse/curves.hpp"
#include "misuse/evaluation.hpp"
#include "misuse/policy.hpp"
#include "misuse/session_log.hpp"
#include "misuse/uplift.hpp"
#include "misuse/whatif.hpp"

namespace misuse {

inline constexpr int kScenarioSchemaVersion = 1;

// p(t) = max_probability / (1 + exp(-steepness_per_day * (t - midpoint_days))),
// sampled on `knots` evenly spaced times in [0, until_days].
struct LogisticSpec {
    double midpoint_days = 0.0;
    double steepness_per_day = 0.0;
    double max_probability = 1.0;
    double until_days = 0.0;
    std::int64_t knots = 0;

    friend bool operator==(const LogisticSpec&, const LogisticSpec&) = default;
};

// Either explicit knots or a logistic form sampled onto knots.
struct TimeCostSpec {
    std::vector<CurvePoint> points;  // x = days, y = probability
    std::optional<LogisticSpec> logistic;

    friend bool operator==(const TimeCostSpec&, const TimeCostSpec&) = default;
};

struct EffortSpec {
    EffortDistribution::Kind kind = EffortDistribution::Kind::exponential;
    double mean_days = 0.0;
    double log_mean_ln_days = 0.0;
    double log_sd = 0.0;
    std::vector<WeightedDuration> samples;

    friend bool operator==(const EffortSpec&, const EffortSpec&) = default;
};

struct ThreatModelSpec {
    double attempts_per_year = 0.0;
    double damage_units_per_success = 0.0;
    double requests_per_day = 0.0;
    double resilience_damage_multiplier = 1.0;
    double resilience_success_multiplier = 1.0;
    EffortSpec effort;
    TimeCostSpec p_none;
    TimeCostSpec p_pre;

    friend bool operator==(const ThreatModelSpec&, const ThreatModelSpec&) = default;
};

struct EvasionCurveSpec {
    double weight = 1.0;
    std::vector<CurvePoint> points;  // x = requests, y = days
    std::optional<double> tail_slope_days_per_request;

    friend bool operator==(const EvasionCurveSpec&, const EvasionCurveSpec&) = default;
};

struct SessionSourceSpec {
    std::optional<std::string> log;  // path relative to the scenario file
    std::vector<SessionRecord> events;
    std::optional<std::string> variant_log;
    std::vector<SessionRecord> variant_events;
    std::int64_t variants_per_discovery = 1;
    BanCostModel ban_cost;
    std::optional<PatchPolicy> patch_policy;
    enum class Combine { aggregate, ensemble };
    Combine combine = Combine::aggregate;
    AggregationMethod aggregation;
    std::optional<double> tail_slope_days_per_request;

    friend bool operator==(const SessionSourceSpec&, const SessionSourceSpec&) = default;
};

struct EvasionSpec {
    enum class Source { curves, sessions };
    Source source = Source::curves;
    EvasionModel::Mode mode = EvasionModel::Mode::single_curve;
    std::vector<EvasionCurveSpec> curves;
    std::optional<SessionSourceSpec> sessions;

    friend bool operator==(const EvasionSpec&, const EvasionSpec&) = default;
};

struct WhatIfSpec {
    double simulation_end_days = 365.0;
    std::optional<double> jailbreak_time_days;  // absent: never
    std::uint64_t rng_seed = 0;
    std::int64_t runs = 100;
    std::optional<TimeCostSpec> p_post_override;

    friend bool operator==(const WhatIfSpec&, const WhatIfSpec&) = default;
};

struct PolicySpec {
    double threshold_units_per_year = 1.0;
    std::string threshold_label;
    double grace_period_days = 30.0;
    double forecast_horizon_days = 30.0;
    double forecast_window_days = 365.0;
    std::optional<double> forecast_warmup_days;

    friend bool operator==(const PolicySpec&, const PolicySpec&) = default;
};

struct EngineSpec {
    std::int64_t post_curve_grid_points = 512;
    double quadrature_relative_tolerance = 1e-11;
    double effort_tail_mass = 1e-9;

    friend bool operator==(const EngineSpec&, const EngineSpec&) = default;
};

struct ScenarioFile {
    std::int64_t schema_version = kScenarioSchemaVersion;
    ThreatModelSpec threat_model;
    EvasionSpec evasion;
    WhatIfSpec whatif;
    PolicySpec policy;
    EngineSpec engine;
    // Analyst evidence per safety-case claim id.
    std::map<std::string, std::vector<std::string>> evidence;
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    friend bool operator==(const ScenarioFile&, const ScenarioFile&) = default;
};

// Structure only: types, required fields, unknown keys and schema_version.
// Errors carry the dotted field path and, for text input, the line.
ScenarioFile scenario_from_json(const nlohmann::ordered_json& doc);
ScenarioFile scenario_from_text(std::string_view text, const std::string& source_name);
nlohmann::ordered_json scenario_to_json(const ScenarioFile& scenario);
std::string scenario_to_yaml(const ScenarioFile& scenario);

// Engine-ready inputs derived from a scenario.
struct ResolvedScenario {
    ScenarioFile file;
    std::filesystem::path base_dir;
    ThreatModelParams params;
    EvasionModel evasion;
    WhatIfConfig whatif;
    RiskOptions risk_options;
    RiskThreshold threshold;
    GracePeriod grace;
    ForecastSettings forecast;
    std::optional<BanCostModel> bans;
    std::optional<PatchPolicy> patching;
    std::vector<ActorCurve> actor_curves;  // session-sourced evasion only
    std::vector<std::string> warnings;
    std::string digest;
};

// Builds every engine type, running all cross-field validation. Relative
// session-log paths resolve against `base_dir`.
ResolvedScenario resolve_scenario(const ScenarioFile& scenario,
                                  const std::filesystem::path& base_dir);

// Loads, validates and returns the scenario; warnings go to `warnings` when given.
ScenarioFile load_scenario(const std::filesystem::path& path,
                           std::vector<std::string>* warnings = nullptr);
ResolvedScenario load_resolved_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioFile& scenario, const std::filesystem::path& path);

// SHA-256 over the canonical JSON form without metadata, plus the contents
// of any referenced session logs.
std::string scenario_digest(const ScenarioFile& scenario, const std::filesystem::path& base_dir);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace misuse
