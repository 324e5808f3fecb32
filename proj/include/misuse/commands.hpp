#pragma once

// Operations shared by the command-line tool and the HTTP service, so both
// produce the same numbers and the same JSON structures.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "misuse/policy.hpp"
#include "misuse/safety_case.hpp"
#include "misuse/scenario.hpp"
#include "misuse/uplift.hpp"
#include "misuse/whatif.hpp"

namespace misuse {

const char* engine_version();

struct EvaluateResult {
    RiskEstimate none;
    RiskEstimate pre;
    RiskEstimate post;
    double uplift = 0.0;
    std::vector<std::string> warnings;
};

EvaluateResult run_evaluate(const ResolvedScenario& scenario);
nlohmann::json to_json(const EvaluateResult& result);
std::string format_text(const EvaluateResult& result);

struct SimulationRequest {
    std::optional<std::uint64_t> seed;  // defaults to whatif.rng_seed
    std::optional<std::size_t> runs;    // defaults to whatif.runs
};

WhatIfConfig simulation_config(const ResolvedScenario& scenario, const SimulationRequest& request);
RiskSeries run_simulate(const ResolvedScenario& scenario, const SimulationRequest& request,
                        const MonteCarloOptions& mc = {});
nlohmann::json to_json(const RiskSeries& series);
// Columns: day, mean and p05/p50/p95 in harm units per year.
std::string format_csv(const RiskSeries& series);

struct GateResult {
    EvaluateResult estimates;
    GateDecision predeployment;
    WorstCaseForecast forecast;
    std::optional<double> crossing_latency_days;
    GateDecision monitor;
};

GateResult run_gate(const ResolvedScenario& scenario, const SimulationRequest& request = {},
                    const MonteCarloOptions& mc = {});
nlohmann::json to_json(const GateResult& result);
std::string format_text(const GateResult& result);

// Requires session-sourced evasion.
nlohmann::json run_ingest(const ResolvedScenario& scenario);
std::string format_ingest_text(const nlohmann::json& ingest);

SafetyCaseInputs safety_case_inputs(const ResolvedScenario& scenario, const GateResult& gate);
SafetyCaseReport run_report(const ResolvedScenario& scenario, const MonteCarloOptions& mc = {});

// Content address of a run: scenario digest, command, seed, runs and engine version.
std::string run_digest(const std::string& scenario_digest, const std::string& command,
                       std::uint64_t seed, std::size_t runs);

nlohmann::json make_run_record(const ResolvedScenario& scenario, const std::string& command,
                               std::uint64_t seed, std::size_t runs, nlohmann::json outputs);

}  // namespace misuse
