#include "misuse/commands.hpp"

#include <chrono>
#include <ctime>

#include "misuse/digest.hpp"
#include "misuse/errors.hpp"

namespace misuse {

using nlohmann::json;

namespace {

void merge_warnings(std::vector<std::string>& into, const std::vector<std::string>& from) {
    for (const auto& w : from) {
        if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
    }
}

json estimate_json(const RiskEstimate& e) {
    return {{"annualized_risk_units_per_year", e.annualized_risk},
            {"quadrature_error_bound_units_per_year", e.quadrature_error_bound}};
}

json decision_json(const GateDecision& d) {
    return {{"verdict", to_string(d.verdict)},
            {"forecast_risk_units_per_year", d.forecast_risk},
            {"margin_units_per_year", d.margin},
            {"rationale", d.rationale}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

json curve_json(const EvasionCostCurve& c) {
    json pts = json::array();
    for (const auto& p : c.points()) pts.push_back({{"requests", p.x}, {"days", p.y}});
    return {{"points", std::move(pts)},
            {"tail_slope_days_per_request", c.tail_slope()}};
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

const char* engine_version() { return MISUSE_RISK_VERSION; }

EvaluateResult run_evaluate(const ResolvedScenario& s) {
    EvaluateResult r;
    r.none = risk(s.params, Scenario::none, nullptr, s.risk_options);
    r.pre = risk(s.params, Scenario::pre, nullptr, s.risk_options);
    r.post = risk(s.params, Scenario::post, &s.evasion, s.risk_options);
    r.uplift = r.post.annualized_risk - r.none.annualized_risk;
    merge_warnings(r.warnings, s.warnings);
    merge_warnings(r.warnings, r.none.warnings);
    merge_warnings(r.warnings, r.pre.warnings);
    merge_warnings(r.warnings, r.post.warnings);
    return r;
}

json to_json(const EvaluateResult& r) {
    return {{"risk_none", estimate_json(r.none)},
            {"risk_pre", estimate_json(r.pre)},
            {"risk_post", estimate_json(r.post)},
            {"uplift_units_per_year", r.uplift},
            {"warnings", r.warnings}};
}

std::string format_text(const EvaluateResult& r) {
    std::string out = "quantity,harm_units_per_year\n";
    out += "risk_none," + format_double(r.none.annualized_risk) + "\n";
    out += "risk_pre," + format_double(r.pre.annualized_risk) + "\n";
    out += "risk_post," + format_double(r.post.annualized_risk) + "\n";
    out += "uplift," + format_double(r.uplift) + "\n";
    return out;
}

WhatIfConfig simulation_config(const ResolvedScenario& s, const SimulationRequest& req) {
    WhatIfConfig cfg = s.whatif;
    if (req.seed) cfg.rng_seed = *req.seed;
    if (req.runs) cfg.runs = *req.runs;
    validate(cfg);
    return cfg;
}

RiskSeries run_simulate(const ResolvedScenario& s, const SimulationRequest& req,
                        const MonteCarloOptions& mc) {
    return monte_carlo(simulation_config(s, req), mc);
}

json to_json(const RiskSeries& series) {
    json j = {{"day", series.day_index},
              {"mean_harm_units_per_year", series.annualized_risk}};
    if (series.bands) {
        j["p05_harm_units_per_year"] = series.bands->p05;
        j["p50_harm_units_per_year"] = series.bands->p50;
        j["p95_harm_units_per_year"] = series.bands->p95;
    }
    return j;
}

std::string format_csv(const RiskSeries& series) {
    std::string out = "day,mean_harm_units_per_year";
    if (series.bands) {
        out += ",p05_harm_units_per_year,p50_harm_units_per_year,p95_harm_units_per_year";
    }
    out += "\n";
    for (std::size_t i = 0; i < series.day_index.size(); ++i) {
        out += std::to_string(series.day_index[i]) + "," + format_double(series.annualized_risk[i]);
        if (series.bands) {
            out += "," + format_double(series.bands->p05[i]) + "," +
                   format_double(series.bands->p50[i]) + "," + format_double(series.bands->p95[i]);
        }
        out += "\n";
    }
    return out;
}

GateResult run_gate(const ResolvedScenario& s, const SimulationRequest& req,
                    const MonteCarloOptions& mc) {
    GateResult g;
    g.estimates = run_evaluate(s);
    g.predeployment = gate_predeployment(g.estimates.post, s.threshold);
    const WhatIfConfig cfg = simulation_config(s, req);
    g.forecast = forecast_worst_case(cfg, GracePeriod{s.file.policy.forecast_horizon_days},
                                     s.forecast, mc);
    g.crossing_latency_days =
        crossing_latency(g.forecast.series, s.threshold.value, g.forecast.now_day);
    g.monitor = monitor_decision(g.estimates.post, g.forecast.forecast_risk, s.threshold, s.grace,
                                 g.crossing_latency_days);
    return g;
}

json to_json(const GateResult& g) {
    return {{"estimates", to_json(g.estimates)},
            {"predeployment", decision_json(g.predeployment)},
            {"forecast",
             {{"forecast_risk_units_per_year", g.forecast.forecast_risk},
              {"horizon_days", g.forecast.horizon_days},
              {"jailbreak_day", g.forecast.now_day},
              {"crossing_latency_days", optional_number(g.crossing_latency_days)}}},
            {"monitor", decision_json(g.monitor)}};
}

std::string format_text(const GateResult& g) {
    std::string out;
    out += "predeployment: " + std::string(to_string(g.predeployment.verdict)) +
           " (risk_post " + format_double(g.predeployment.forecast_risk) +
           " harm units/year, margin " + format_double(g.predeployment.margin) + ")\n";
    out += "  " + g.predeployment.rationale + "\n";
    out += "monitor: " + std::string(to_string(g.monitor.verdict)) + " (forecast " +
           format_double(g.monitor.forecast_risk) + " harm units/year over " +
           format_double(g.forecast.horizon_days) + " days, margin " +
           format_double(g.monitor.margin) + ", crossing latency " +
           (g.crossing_latency_days ? format_double(*g.crossing_latency_days) + " days"
                                    : std::string("none")) +
           ")\n";
    out += "  " + g.monitor.rationale + "\n";
    return out;
}

json run_ingest(const ResolvedScenario& s) {
    if (s.file.evasion.source != EvasionSpec::Source::sessions) {
        throw UsageError("ingest requires evasion.source: sessions");
    }
    json actors = json::array();
    for (const auto& a : s.actor_curves) {
        json j = curve_json(a.curve);
        j["actor_id"] = a.actor_id;
        j["weight"] = a.weight;
        j["variant"] = a.variant;
        j["patch_times_days"] = a.patch_times;
        actors.push_back(std::move(j));
    }
    json combined = json::array();
    for (const auto& c : s.evasion.curves) {
        json j = curve_json(c.curve);
        j["weight"] = c.weight;
        combined.push_back(std::move(j));
    }
    return {{"actors", std::move(actors)},
            {"evasion_mode",
             s.evasion.mode == EvasionModel::Mode::single_curve ? "single_curve" : "ensemble"},
            {"evasion_curves", std::move(combined)},
            {"warnings", s.warnings}};
}

std::string format_ingest_text(const json& ingest) {
    std::string out = "curve,weight,requests,days\n";
    auto rows = [&](const json& c, const std::string& name) {
        for (const auto& p : c.at("points")) {
            out += name + "," + format_double(c.at("weight").get<double>()) + "," +
                   format_double(p.at("requests").get<double>()) + "," +
                   format_double(p.at("days").get<double>()) + "\n";
        }
    };
    for (const auto& a : ingest.at("actors")) {
        rows(a, a.at("actor_id").get<std::string>() + (a.at("variant").get<bool>() ? "~variant" : ""));
    }
    std::size_t i = 0;
    for (const auto& c : ingest.at("evasion_curves")) {
        rows(c, "evasion[" + std::to_string(i++) + "]");
    }
    return out;
}

SafetyCaseInputs safety_case_inputs(const ResolvedScenario& s, const GateResult& g) {
    SafetyCaseInputs in;
    in.risk_none = g.estimates.none;
    in.risk_pre = g.estimates.pre;
    in.risk_post = g.estimates.post;
    in.predeployment = g.predeployment;
    in.forecast_risk = g.forecast.forecast_risk;
    in.forecast_horizon_days = g.forecast.horizon_days;
    in.crossing_latency_days = g.crossing_latency_days;
    in.monitor = g.monitor;
    in.threshold = s.threshold;
    in.grace = s.grace;
    in.bans = s.bans;
    in.patching = s.patching;
    in.evidence = s.file.evidence;
    if (s.file.metadata.is_object()) {
        if (auto it = s.file.metadata.find("provenance");
            it != s.file.metadata.end() && it->is_object()) {
            for (const auto& [name, text] : it->items()) {
                in.provenance[name] = text.is_string() ? text.get<std::string>() : text.dump();
            }
        }
    }
    return in;
}

SafetyCaseReport run_report(const ResolvedScenario& s, const MonteCarloOptions& mc) {
    return render_safety_case(safety_case_inputs(s, run_gate(s, {}, mc)));
}

std::string run_digest(const std::string& scenario_digest, const std::string& command,
                       std::uint64_t seed, std::size_t runs) {
    return sha256_hex(scenario_digest + "\n" + command + "\n" + std::to_string(seed) + "\n" +
                      std::to_string(runs) + "\n" + engine_version());
}

json make_run_record(const ResolvedScenario& s, const std::string& command, std::uint64_t seed,
                     std::size_t runs, json outputs) {
    return {{"run_digest", run_digest(s.digest, command, seed, runs)},
            {"scenario_digest", s.digest},
            {"engine_version", engine_version()},
            {"command", command},
            {"seed", seed},
            {"runs", runs},
            {"timestamp", utc_timestamp()},
            {"outputs", std::move(outputs)}};
}

}  // namespace misuse
