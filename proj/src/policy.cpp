#include "misuse/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "misuse/errors.hpp"

namespace misuse {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double default_warmup(const EffortDistribution& effort) {
    const double hi = effort.is_continuous() ? effort.quantile(0.999) : effort.atoms().back().days;
    return std::ceil(hi) + 1.0;
}

}  // namespace

void validate(const RiskThreshold& threshold) {
    if (!(std::isfinite(threshold.value) && threshold.value > 0.0)) {
        throw ValidationError("range", "risk threshold must be positive and finite", "threshold");
    }
}

void validate(const GracePeriod& grace) {
    if (!(std::isfinite(grace.days) && grace.days > 0.0)) {
        throw ValidationError("range", "grace period must be positive", "grace_period_days");
    }
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::deploy: return "deploy";
        case Verdict::block: return "block";
        case Verdict::ok: return "ok";
        case Verdict::harden: return "harden";
        case Verdict::restrict_access: return "restrict";
    }
    return "?";
}

GateDecision gate_predeployment(const RiskEstimate& estimate, const RiskThreshold& threshold) {
    validate(threshold);
    GateDecision d;
    d.forecast_risk = estimate.annualized_risk;
    d.margin = threshold.value - estimate.annualized_risk;
    if (estimate.annualized_risk < threshold.value) {
        d.verdict = Verdict::deploy;
        d.rationale = "estimated risk " + num(estimate.annualized_risk) +
                      " is below the threshold " + num(threshold.value);
    } else {
        d.verdict = Verdict::block;
        d.rationale = "estimated risk " + num(estimate.annualized_risk) +
                      " is not below the threshold " + num(threshold.value) +
                      " (ties block)";
    }
    return d;
}

WhatIfConfig deployment_config(const ThreatModelParams& params, const EvasionModel& evasion,
                               const WhatIfConfig& sim_template,
                               const std::optional<TimeCostCurve>& p_post_override,
                               std::size_t post_grid_points) {
    validate(params);
    WhatIfConfig cfg = sim_template;
    const double success = params.resilience_success_multiplier;
    TimeCostCurve post = p_post_override ? *p_post_override
                                         : blended_post_curve(params, evasion, post_grid_points);
    cfg.p_pre = success < 1.0 ? params.p_pre.scaled(success) : params.p_pre;
    cfg.p_post = success < 1.0 ? post.scaled(success) : post;
    cfg.effort = params.effort;
    cfg.attempts_per_year = params.attempts_per_year;
    cfg.damage_per_success = params.damage_per_success * params.resilience_damage_multiplier;
    return cfg;
}

double forecast_from_series(const RiskSeries& series, double now_day, double horizon_days) {
    double best = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < series.day_index.size(); ++i) {
        const auto day = static_cast<double>(series.day_index[i]);
        if (day >= now_day && day <= now_day + horizon_days) {
            best = any ? std::max(best, series.annualized_risk[i]) : series.annualized_risk[i];
            any = true;
        }
    }
    if (!any) {
        throw UsageError("forecast window lies outside the simulated series");
    }
    return best;
}

WorstCaseForecast forecast_worst_case(const WhatIfConfig& sim, GracePeriod horizon,
                                      const ForecastSettings& settings,
                                      const MonteCarloOptions& mc) {
    if (!(horizon.days >= 0.0 && std::isfinite(horizon.days))) {
        throw ValidationError("range", "forecast horizon must be finite and >= 0",
                              "forecast_horizon_days");
    }
    WhatIfConfig cfg = sim;
    const double now = std::ceil(settings.warmup_days.value_or(default_warmup(sim.effort)));
    cfg.jailbreak_time = now;
    cfg.simulation_end = now + std::max(horizon.days, settings.window_days) + 1.0;

    WorstCaseForecast out;
    out.now_day = now;
    out.horizon_days = horizon.days;
    out.series = monte_carlo(cfg, mc);
    out.forecast_risk = forecast_from_series(out.series, now, horizon.days);
    return out;
}

WorstCaseForecast forecast_worst_case(const ThreatModelParams& params,
                                      const EvasionModel& evasion, GracePeriod horizon,
                                      const WhatIfConfig& sim_template,
                                      const ForecastSettings& settings,
                                      const MonteCarloOptions& mc) {
    return forecast_worst_case(deployment_config(params, evasion, sim_template), horizon,
                               settings, mc);
}

GateDecision monitor_decision(const RiskEstimate& current, double forecast,
                              const RiskThreshold& threshold, GracePeriod grace,
                              std::optional<double> crossing) {
    validate(threshold);
    validate(grace);
    GateDecision d;
    d.forecast_risk = forecast;
    d.margin = threshold.value - forecast;
    const std::string head = "current risk " + num(current.annualized_risk) +
                             ", worst-case forecast " + num(forecast) + " vs threshold " +
                             num(threshold.value);
    if (forecast < threshold.value) {
        d.verdict = Verdict::ok;
        d.rationale = head + ": forecast stays below the threshold";
    } else if (crossing && *crossing <= grace.days) {
        d.verdict = Verdict::restrict_access;
        d.rationale = head + ": threshold crossed " + num(*crossing) +
                      " days after safeguard failure, within the " + num(grace.days) +
                      "-day grace period; restrict access";
    } else {
        d.verdict = Verdict::harden;
        d.rationale = head + ": threshold crossed " +
                      (crossing ? num(*crossing) + " days" : std::string("no sooner than")) +
                      " after safeguard failure, beyond the " + num(grace.days) +
                      "-day grace period; harden safeguards";
    }
    return d;
}

}  // namespace misuse
