#pragma once

// Monte Carlo "what-if" deployment simulation: attempts start uniformly over
// the simulated window and progress along the post-mitigation time-cost curve
// until a universal jailbreak is released. From then on an in-flight attempt
// continues on the pre-mitigation curve from the point of equal success
// probability, so its success probability is continuous at the switch.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "misuse/curves.hpp"

namespace misuse {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct WhatIfConfig {
    TimeCostCurve p_pre;
    TimeCostCurve p_post;
    EffortDistribution effort = EffortDistribution::exponential(30.0);
    double damage_per_success = 1.0;
    double attempts_per_year = 1.0;
    double simulation_end = 365.0;  // days
    double jailbreak_time = kNever;  // days
    std::uint64_t rng_seed = 0;
    std::size_t runs = 1;
};

void validate(const WhatIfConfig& cfg);

// Warnings that hold for every run, e.g. progress that p_pre cannot match.
std::vector<std::string> simulation_warnings(const WhatIfConfig& cfg);

struct RiskBands {
    std::vector<double> p05;
    std::vector<double> p50;
    std::vector<double> p95;

    friend bool operator==(const RiskBands&, const RiskBands&) = default;
};

struct RiskSeries {
    std::vector<std::int64_t> day_index;
    // Mean across runs when aggregated; harm units per year.
    std::vector<double> annualized_risk;
    std::optional<RiskBands> bands;

    friend bool operator==(const RiskSeries&, const RiskSeries&) = default;
};

// Success probability trajectory of one attempt started at `start`.
class AttemptTrajectory {
public:
    AttemptTrajectory(double start, const WhatIfConfig& cfg);

    double operator()(double t) const;

    double start() const noexcept { return start_; }
    // Pre-mitigation time with the same success probability as the attempt
    // had reached when the jailbreak was released.
    double matched_time() const noexcept { return matched_time_; }
    // True when that probability exceeded the pre-mitigation maximum.
    bool clamped() const noexcept { return clamped_; }

private:
    const WhatIfConfig* cfg_;
    double start_;
    double matched_time_ = 0.0;
    bool clamped_ = false;
};

double attempt_success(double t, double start, const WhatIfConfig& cfg);

// Stable 64-bit hash of (master seed, run index).
std::uint64_t derive_run_seed(std::uint64_t master, std::uint64_t run_index);

// round(attempts_per_year * simulation_end / 365) uniform start times.
std::vector<double> sample_attempt_starts(const WhatIfConfig& cfg, std::uint64_t seed);

// Daily annualized risk for explicit attempt start times.
RiskSeries simulate_attempts(const WhatIfConfig& cfg, const std::vector<double>& starts);

RiskSeries run_once(const WhatIfConfig& cfg, std::uint64_t seed);

struct MonteCarloOptions {
    // 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
    // Called on the calling thread with (completed runs, total runs).
    std::function<void(std::size_t, std::size_t)> progress;
};

// Runs cfg.runs simulations seeded by derive_run_seed(cfg.rng_seed, i) and
// returns the per-day mean with p05/p50/p95 bands.
RiskSeries monte_carlo(const WhatIfConfig& cfg, const MonteCarloOptions& options = {});

// Days from the jailbreak to the first day at or after it whose mean risk
// exceeds `threshold`; nullopt when never exceeded.
std::optional<double> crossing_latency(const RiskSeries& series, double threshold,
                                       double jailbreak_time);

}  // namespace misuse
