#include "misuse/uplift.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "misuse/errors.hpp"

namespace misuse {

namespace {

constexpr double kAttemptFloorDays = 14.0;

void require_positive(double v, const char* field) {
    if (!(std::isfinite(v) && v > 0.0)) {
        throw ValidationError("range", std::string(field) + " must be positive and finite", field);
    }
}

void require_multiplier(double v, const char* field) {
    if (!(v > 0.0 && v <= 1.0)) {
        throw ValidationError("range", std::string(field) + " must lie in (0,1]", field);
    }
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void add_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
    for (const auto& w : from) {
        if (std::find(into.begin(), into.end(), w) == into.end()) {
            into.push_back(w);
        }
    }
}

}  // namespace

const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::none: return "none";
        case Scenario::pre: return "pre";
        case Scenario::post: return "post";
    }
    return "?";
}

void validate(const ThreatModelParams& params) {
    require_positive(params.attempts_per_year, "attempts_per_year");
    if (!(std::isfinite(params.damage_per_success) && params.damage_per_success >= 0.0)) {
        throw ValidationError("range", "damage_per_success must be finite and >= 0",
                              "damage_units_per_success");
    }
    require_positive(params.requests_per_day, "requests_per_day");
    require_multiplier(params.resilience_damage_multiplier, "resilience_damage_multiplier");
    require_multiplier(params.resilience_success_multiplier, "resilience_success_multiplier");

    std::set<double> knots(params.p_none.times().begin(), params.p_none.times().end());
    knots.insert(params.p_pre.times().begin(), params.p_pre.times().end());
    for (const double t : knots) {
        const double pre = params.p_pre(t);
        const double none = params.p_none(t);
        if (pre < none) {
            throw ValidationError("dominance",
                                  "p_pre (" + num(pre) + ") is below p_none (" + num(none) +
                                      ") at knot t=" + num(t) + " days",
                                  "p_pre");
        }
    }
}

void validate(const EvasionModel& model) {
    if (model.curves.empty()) {
        throw ValidationError("range", "evasion model needs at least one curve", "curves");
    }
    for (const auto& c : model.curves) {
        require_positive(c.weight, "weight");
    }
}

PostMitigationCurve build_post_mitigation_curve(const TimeCostCurve& p_pre,
                                                double requests_per_day,
                                                const EvasionCostCurve& evasion,
                                                std::size_t grid_points) {
    require_positive(requests_per_day, "requests_per_day");
    const double q = requests_per_day;
    const double r_max = q * p_pre.last_time();

    std::vector<double> grid{0.0};
    for (const double r : evasion.requests()) {
        if (r <= r_max) grid.push_back(r);
    }
    for (const double t : p_pre.times()) {
        grid.push_back(q * t);
    }
    if (r_max > 0.0) {
        const std::size_t m = std::max<std::size_t>(grid_points, 2);
        for (std::size_t k = 0; k < m; ++k) {
            grid.push_back(r_max * static_cast<double>(k) / static_cast<double>(m - 1));
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    while (!grid.empty() && grid.back() > r_max) {
        grid.pop_back();
    }

    PostMitigationCurve out;
    std::vector<CurvePoint> pts;
    pts.reserve(grid.size());
    for (const double r : grid) {
        const double t = r / q + evasion(r);
        double p = p_pre(r / q);
        if (!pts.empty()) {
            if (!(t > pts.back().x)) {
                continue;
            }
            // One-ulp overshoot at a segment end must not break monotonicity.
            p = std::max(p, pts.back().y);
        }
        pts.push_back({t, p});
        out.grid_requests.push_back(r);
    }
    if (pts.empty() || pts.front().x != 0.0) {
        throw InternalError("post-mitigation curve does not start at time zero");
    }
    out.curve = TimeCostCurve(pts);
    return out;
}

TimeCostCurve post_mitigation_curve(const TimeCostCurve& p_pre, double requests_per_day,
                                    const EvasionCostCurve& evasion, std::size_t grid_points) {
    return build_post_mitigation_curve(p_pre, requests_per_day, evasion, grid_points).curve;
}

TimeCostCurve blended_post_curve(const ThreatModelParams& params, const EvasionModel& evasion,
                                 std::size_t grid_points) {
    validate(evasion);
    std::vector<TimeCostCurve> members;
    members.reserve(evasion.curves.size());
    for (const auto& c : evasion.curves) {
        members.push_back(
            post_mitigation_curve(params.p_pre, params.requests_per_day, c.curve, grid_points));
    }
    if (members.size() == 1) {
        return members.front();
    }
    std::vector<double> times;
    for (const auto& m : members) {
        times.insert(times.end(), m.times().begin(), m.times().end());
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    double total = 0.0;
    for (const auto& c : evasion.curves) total += c.weight;

    std::vector<CurvePoint> pts;
    pts.reserve(times.size());
    for (const double t : times) {
        double p = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            p += evasion.curves[i].weight * members[i](t);
        }
        p = std::clamp(p / total, 0.0, 1.0);
        if (!pts.empty()) p = std::max(p, pts.back().y);
        pts.push_back({t, p});
    }
    return TimeCostCurve(pts);
}

double integration_upper_limit(const EffortDistribution& effort, const RiskOptions& options) {
    if (!effort.is_continuous()) {
        return effort.atoms().back().days;
    }
    return effort.quantile(1.0 - options.tail_mass);
}

std::vector<std::string> effort_warnings(const EffortDistribution& effort) {
    std::vector<std::string> out;
    const double below = effort.cdf_below(kAttemptFloorDays);
    if (below > 1e-6) {
        out.push_back("effort distribution places " + num(below) +
                      " of its mass below the 14-day attempt floor");
    }
    return out;
}

ExpectedSuccess expected_success(const TimeCostCurve& curve, const EffortDistribution& effort,
                                 const RiskOptions& options) {
    ExpectedSuccess out;
    const double support = effort.is_continuous() ? effort.quantile(0.999)
                                                  : effort.atoms().back().days;
    if (support > curve.last_time() && curve.size() > 1) {
        out.warnings.push_back("effort quantile 0.999 (" + num(support) +
                               " days) exceeds the last curve knot (" + num(curve.last_time()) +
                               " days); success probability is held constant beyond it");
    }

    if (!effort.is_continuous()) {
        for (const auto& a : effort.atoms()) {
            out.value += a.weight * curve(a.days);
        }
        return out;
    }
    if (curve.max_probability() == 0.0) {
        return out;
    }

    const double t_hi = integration_upper_limit(effort, options);
    std::vector<double> bps{0.0, t_hi};
    for (const double t : curve.times()) {
        if (t > 0.0 && t < t_hi) bps.push_back(t);
    }
    for (const double q : {1e-6, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999,
                           1.0 - 1e-6}) {
        const double t = effort.quantile(q);
        if (t > 0.0 && t < t_hi) bps.push_back(t);
    }
    std::sort(bps.begin(), bps.end());
    bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

    auto integrand = [&](double t) { return curve(t) * effort.pdf(t); };

    // Coarse Simpson pass fixes the absolute tolerance at the integral's scale.
    double coarse = 0.0;
    for (std::size_t i = 1; i < bps.size(); ++i) {
        const double a = bps[i - 1];
        const double b = bps[i];
        coarse += (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
    }
    const double scale = std::max(std::abs(coarse), 1e-6 * curve.max_probability());
    const QuadratureResult q =
        integrate_adaptive(integrand, bps, options.relative_tolerance * scale);
    out.value = q.value;
    out.error_bound = q.error_bound;
    if (!q.converged) {
        out.warnings.push_back("adaptive quadrature hit its subdivision limit");
    }
    const double truncated = curve.max_probability() * (1.0 - effort.cdf(t_hi));
    if (truncated > 1e-9 * curve.max_probability() * (1.0 + 1e-6)) {
        out.warnings.push_back("integrand support truncation exceeds tolerance: up to " +
                               num(truncated) + " of expected success lies beyond " +
                               num(t_hi) + " days");
    }
    return out;
}

RiskEstimate risk(const ThreatModelParams& params, Scenario scenario,
                  const EvasionModel* evasion, const RiskOptions& options) {
    validate(params);
    RiskEstimate est;
    est.scenario = scenario;
    add_unique(est.warnings, effort_warnings(params.effort));
    const double factor = params.attempts_per_year * params.damage_per_success *
                          params.resilience_damage_multiplier *
                          params.resilience_success_multiplier;

    auto accumulate = [&](const ExpectedSuccess& es, double weight) {
        est.annualized_risk += weight * factor * es.value;
        est.quadrature_error_bound += weight * factor * es.error_bound;
        add_unique(est.warnings, es.warnings);
    };

    switch (scenario) {
        case Scenario::none:
            accumulate(expected_success(params.p_none, params.effort, options), 1.0);
            break;
        case Scenario::pre:
            accumulate(expected_success(params.p_pre, params.effort, options), 1.0);
            break;
        case Scenario::post: {
            if (evasion == nullptr) {
                throw UsageError("post-mitigation risk requires an evasion model");
            }
            validate(*evasion);
            double total = 0.0;
            for (const auto& c : evasion->curves) total += c.weight;
            for (const auto& c : evasion->curves) {
                const TimeCostCurve p_post = post_mitigation_curve(
                    params.p_pre, params.requests_per_day, c.curve, options.post_grid_points);
                accumulate(expected_success(p_post, params.effort, options), c.weight / total);
            }
            break;
        }
    }
    est.annualized_risk = std::max(est.annualized_risk, 0.0);
    return est;
}

double uplift(const ThreatModelParams& params, const EvasionModel& evasion,
              const RiskOptions& options) {
    return risk(params, Scenario::post, &evasion, options).annualized_risk -
           risk(params, Scenario::none, nullptr, options).annualized_risk;
}

}  // namespace misuse
