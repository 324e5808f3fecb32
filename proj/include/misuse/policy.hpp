#pragma once

// Deployment decisions: the pre-deployment gate, the worst-case forecast used
// while deployed, and the ok / harden / restrict monitoring decision.

#include <optional>
#include <string>

#include "misuse/uplift.hpp"
#include "misuse/whatif.hpp"

namespace misuse {

struct RiskThreshold {
    double value = 1.0;  // harm units per year
    std::string label;

    friend bool operator==(const RiskThreshold&, const RiskThreshold&) = default;
};

struct GracePeriod {
    double days = 30.0;

    friend bool operator==(const GracePeriod&, const GracePeriod&) = default;
};

void validate(const RiskThreshold& threshold);
void validate(const GracePeriod& grace);

enum class Verdict { deploy, block, ok, harden, restrict_access };
const char* to_string(Verdict v);

struct GateDecision {
    Verdict verdict = Verdict::block;
    double forecast_risk = 0.0;
    // threshold - forecast_risk
    double margin = 0.0;
    std::string rationale;
};

// Deploy only when the estimate is strictly below the threshold.
GateDecision gate_predeployment(const RiskEstimate& estimate, const RiskThreshold& threshold);

// Simulation inputs for a deployment of `params` under `evasion`. Success
// curves are scaled by the success resilience multiplier and damage by the
// damage multiplier; p_post is the weighted mixture of the ensemble's
// post-mitigation curves unless `p_post_override` is given.
WhatIfConfig deployment_config(const ThreatModelParams& params, const EvasionModel& evasion,
                               const WhatIfConfig& sim_template,
                               const std::optional<TimeCostCurve>& p_post_override = std::nullopt,
                               std::size_t post_grid_points = 512);

struct ForecastSettings {
    // Days of deployment simulated before the jailbreak; defaults to the
    // effort distribution's 0.999 quantile so in-flight attempts are at steady state.
    std::optional<double> warmup_days;
    // Days simulated after the jailbreak, for crossing-latency measurement.
    double window_days = 365.0;
};

struct WorstCaseForecast {
    double forecast_risk = 0.0;  // max mean risk over [now, now + horizon]
    double now_day = 0.0;        // jailbreak day in the simulated series
    double horizon_days = 0.0;
    RiskSeries series;
};

// Largest mean annualized risk on days in [now, now + horizon].
double forecast_from_series(const RiskSeries& series, double now_day, double horizon_days);

// Simulates safeguards failing completely "now" (after a warm-up) and reports
// the worst risk reached within the horizon. `sim` must already carry the
// deployment's curves (see deployment_config); its jailbreak time and
// simulation end are replaced.
WorstCaseForecast forecast_worst_case(const WhatIfConfig& sim, GracePeriod horizon,
                                      const ForecastSettings& settings = {},
                                      const MonteCarloOptions& mc = {});

WorstCaseForecast forecast_worst_case(const ThreatModelParams& params,
                                      const EvasionModel& evasion, GracePeriod horizon,
                                      const WhatIfConfig& sim_template,
                                      const ForecastSettings& settings = {},
                                      const MonteCarloOptions& mc = {});

// ok while the forecast is below the threshold; otherwise restrict when the
// threshold would be crossed within the grace period and harden when there is
// time to fix safeguards first. A missing crossing counts as "later than grace".
GateDecision monitor_decision(const RiskEstimate& current, double forecast,
                              const RiskThreshold& threshold, GracePeriod grace,
                              std::optional<double> crossing);

}  // namespace misuse
