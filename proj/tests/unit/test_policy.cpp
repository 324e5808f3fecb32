#include <doctest.h>

#include <cmath>
#include <random>

#include "misuse/errors.hpp"
#include "misuse/policy.hpp"

using namespace misuse;

namespace {

RiskEstimate est(double v) {
    RiskEstimate e;
    e.annualized_risk = v;
    return e;
}

WhatIfConfig forecast_config() {
    WhatIfConfig c;
    c.p_pre = make_time_cost_curve({{0, 0}, {60, 0.8}});
    c.p_post = make_time_cost_curve({{0, 0}, {240, 0.8}});
    c.effort = EffortDistribution::lognormal(std::log(30.0), 0.3);
    c.attempts_per_year = 400;
    c.damage_per_success = 1;
    c.rng_seed = 3;
    c.runs = 20;
    return c;
}

}  // namespace

TEST_CASE("pre-deployment gate examples") {
    const RiskThreshold t{1.0, "x"};
    auto d = gate_predeployment(est(0.5), t);
    CHECK(d.verdict == Verdict::deploy);
    CHECK(d.margin == 0.5);
    CHECK(gate_predeployment(est(1.0), t).verdict == Verdict::block);
    d = gate_predeployment(est(2.0), t);
    CHECK(d.verdict == Verdict::block);
    CHECK(d.margin == -1.0);
    CHECK(std::string(to_string(Verdict::restrict_access)) == "restrict");
    CHECK_THROWS_AS(gate_predeployment(est(1), RiskThreshold{0, ""}), ValidationError);
}

TEST_CASE("gate verdict is invariant under common rescaling") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double r = u(rng) * 10;
        const double t = 0.01 + u(rng) * 10;
        const double k = i % 2 ? std::ldexp(1.0, static_cast<int>(u(rng) * 20) - 10) : 1 + u(rng);
        const auto a = gate_predeployment(est(r), RiskThreshold{t, ""});
        const auto b = gate_predeployment(est(r * k), RiskThreshold{t * k, ""});
        if ((r * k < t * k) == (r < t)) CHECK(a.verdict == b.verdict);
    }
    // Exact ties stay ties under power-of-two scaling.
    CHECK(gate_predeployment(est(4), RiskThreshold{4, ""}).verdict ==
          gate_predeployment(est(0.5), RiskThreshold{0.5, ""}).verdict);
}

TEST_CASE("monitor decision examples") {
    const RiskThreshold t{10, ""};
    const GracePeriod g{30};
    CHECK(monitor_decision(est(1), 5, t, g, std::nullopt).verdict == Verdict::ok);
    CHECK(monitor_decision(est(1), 12, t, g, 90.0).verdict == Verdict::harden);
    CHECK(monitor_decision(est(1), 12, t, g, 10.0).verdict == Verdict::restrict_access);
    CHECK(monitor_decision(est(1), 12, t, g, 30.0).verdict == Verdict::restrict_access);
    CHECK(monitor_decision(est(1), 12, t, g, std::nullopt).verdict == Verdict::harden);
    CHECK(monitor_decision(est(1), 10, t, g, 90.0).verdict != Verdict::ok);
    const auto d = monitor_decision(est(1), 12, t, g, 90.0);
    CHECK(d.margin == -2);
    CHECK(d.rationale.find("harden") != std::string::npos);
}

TEST_CASE("monitor never says ok at or above the threshold") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const double t = 0.1 + u(rng);
        const double f = 2 * u(rng);
        std::optional<double> crossing;
        if (u(rng) < 0.7) crossing = 100 * u(rng);
        const auto d = monitor_decision(est(0), f, RiskThreshold{t, ""}, GracePeriod{30}, crossing);
        CHECK((d.verdict == Verdict::ok) == (f < t));
        CHECK(d.margin == t - f);
    }
}

TEST_CASE("deployment config applies the resilience multipliers") {
    ThreatModelParams p;
    p.p_none = make_time_cost_curve({{0, 0}});
    p.p_pre = make_time_cost_curve({{0, 0}, {100, 1}});
    p.damage_per_success = 4;
    p.resilience_damage_multiplier = 0.5;
    p.resilience_success_multiplier = 0.25;
    const auto ev = EvasionModel::single(EvasionCostCurve{});
    const WhatIfConfig c = deployment_config(p, ev, WhatIfConfig{});
    CHECK(c.damage_per_success == 2);
    CHECK(c.p_pre(100) == 0.25);
    CHECK(c.p_post(100) == 0.25);
    const auto override_curve = make_time_cost_curve({{0, 0.1}});
    CHECK(deployment_config(p, ev, WhatIfConfig{}, override_curve).p_post(5) == 0.025);
}

TEST_CASE("forecast from a series is a running maximum over the window") {
    RiskSeries s;
    for (int d = 0; d < 20; ++d) {
        s.day_index.push_back(d);
        s.annualized_risk.push_back(std::sin(d * 0.7) + d * 0.1);
    }
    double prev = -1e9;
    for (double h = 0; h < 15; h += 0.5) {
        const double f = forecast_from_series(s, 4, h);
        CHECK(f >= prev);
        prev = f;
    }
    CHECK(forecast_from_series(s, 4, 0) == s.annualized_risk[4]);
    CHECK(forecast_from_series(s, 3.5, 0.5) == s.annualized_risk[4]);
    CHECK_THROWS_AS(forecast_from_series(s, 3.5, 0.4), UsageError);
    CHECK_THROWS_AS(forecast_from_series(s, 50, 3), UsageError);
}

TEST_CASE("worst-case forecast: no-op switch, degenerate horizon, monotone horizon") {
    WhatIfConfig same = forecast_config();
    same.p_post = same.p_pre;
    ForecastSettings settings;
    settings.window_days = 60;
    const auto flat = forecast_worst_case(same, GracePeriod{30}, settings);
    const double plateau = flat.series.annualized_risk[static_cast<std::size_t>(flat.now_day) - 1];
    CHECK(flat.forecast_risk == doctest::Approx(plateau).epsilon(0.1));

    const WhatIfConfig c = forecast_config();
    const auto zero = forecast_worst_case(c, GracePeriod{0}, settings);
    const auto now = static_cast<std::size_t>(zero.now_day);
    CHECK(zero.forecast_risk == zero.series.annualized_risk[now]);

    double prev = 0;
    for (double h : {1.0, 5.0, 15.0, 30.0, 59.0}) {
        const auto f = forecast_worst_case(c, GracePeriod{h}, settings);
        CHECK(f.forecast_risk >= prev);
        prev = f.forecast_risk;
    }
}

TEST_CASE("explicit warm-up sets the jailbreak day") {
    ForecastSettings s;
    s.warmup_days = 40.2;
    s.window_days = 10;
    const auto f = forecast_worst_case(forecast_config(), GracePeriod{5}, s);
    CHECK(f.now_day == 41);
    CHECK(f.series.annualized_risk.size() == 52);
}
