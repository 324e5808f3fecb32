#pragma once

// Annualized misuse risk with no assistant, the pre-mitigation assistant and
// the post-mitigation assistant, and the resulting uplift.
//
//   R(scenario) = a * D * m_D * integral_0^inf m_S * p_scenario(t) f_T(t) dt
//   uplift      = R(post) - R(none)
//
// where m_D, m_S are the resilience multipliers on damage and success. The
// no-assistant risk integrates p_none (not p_pre). The post-mitigation curve
// satisfies p_post(r/Q + E(r)) = p_pre(r/Q) for every cumulative request
// count r; a random E is represented by a weighted ensemble of deterministic
// curves whose risks are mixed.

#include <cstddef>
#include <string>
#include <vector>

#include "misuse/curves.hpp"
#include "misuse/evaluation.hpp"
#include "misuse/quadrature.hpp"

namespace misuse {

struct ThreatModelParams {
    double attempts_per_year = 1.0;
    double damage_per_success = 1.0;
    EffortDistribution effort = EffortDistribution::exponential(30.0);
    TimeCostCurve p_none;
    TimeCostCurve p_pre;
    double requests_per_day = 1.0;
    double resilience_damage_multiplier = 1.0;
    double resilience_success_multiplier = 1.0;
};

// Throws ValidationError; a p_pre below p_none names the offending knot time.
void validate(const ThreatModelParams& params);

struct EvasionModel {
    enum class Mode { single_curve, ensemble };
    Mode mode = Mode::single_curve;
    std::vector<WeightedCurve> curves;

    static EvasionModel single(EvasionCostCurve curve) {
        return {Mode::single_curve, {{std::move(curve), 1.0}}};
    }
};

void validate(const EvasionModel& model);

enum class Scenario { none, pre, post };
const char* to_string(Scenario s);

struct RiskEstimate {
    Scenario scenario = Scenario::none;
    double annualized_risk = 0.0;  // harm units per year
    double quadrature_error_bound = 0.0;
    std::vector<std::string> warnings;
};

struct RiskOptions {
    // Minimum number of request-grid points used to build p_post.
    std::size_t post_grid_points = 512;
    // Target quadrature accuracy relative to the integral's magnitude.
    double relative_tolerance = 1e-11;
    // Upper integration limit is the effort quantile at 1 - tail_mass.
    double tail_mass = 1e-9;
};

struct PostMitigationCurve {
    TimeCostCurve curve;
    // Cumulative request counts r whose images (r/Q + E(r), p_pre(r/Q)) are knots.
    std::vector<double> grid_requests;
};

PostMitigationCurve build_post_mitigation_curve(const TimeCostCurve& p_pre,
                                                double requests_per_day,
                                                const EvasionCostCurve& evasion,
                                                std::size_t grid_points = 512);

TimeCostCurve post_mitigation_curve(const TimeCostCurve& p_pre, double requests_per_day,
                                    const EvasionCostCurve& evasion,
                                    std::size_t grid_points = 512);

// Weighted pointwise mixture of the ensemble members' post-mitigation curves.
TimeCostCurve blended_post_curve(const ThreatModelParams& params, const EvasionModel& evasion,
                                 std::size_t grid_points = 512);

struct ExpectedSuccess {
    double value = 0.0;  // integral of p(t) f_T(t) dt
    double error_bound = 0.0;
    std::vector<std::string> warnings;
};

// Expected per-attempt success probability for one curve.
ExpectedSuccess expected_success(const TimeCostCurve& curve, const EffortDistribution& effort,
                                 const RiskOptions& options = {});

// Upper integration limit used for continuous effort distributions.
double integration_upper_limit(const EffortDistribution& effort, const RiskOptions& options = {});

// Assumption-level warnings about the effort distribution (attempt floor).
std::vector<std::string> effort_warnings(const EffortDistribution& effort);

// Throws UsageError when scenario is post and no evasion model is given.
RiskEstimate risk(const ThreatModelParams& params, Scenario scenario,
                  const EvasionModel* evasion = nullptr, const RiskOptions& options = {});

double uplift(const ThreatModelParams& params, const EvasionModel& evasion,
              const RiskOptions& options = {});

}  // namespace misuse
