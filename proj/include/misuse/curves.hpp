#pragma once

// Piecewise-linear curves and effort distributions shared by every module.
//
// Time is measured in days throughout. A TimeCostCurve maps time invested in
// an attempt to success probability; an EvasionCostCurve maps the cumulative
// (helpfulness-weighted) number of fulfilled requests to the cumulative time
// spent evading safeguards. Both are immutable after construction.

#include <optional>
#include <span>
#include <vector>

namespace misuse {

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

class TimeCostCurve {
public:
    // Constant zero curve.
    TimeCostCurve();

    // Validating constructor; see make_time_cost_curve.
    explicit TimeCostCurve(std::span<const CurvePoint> points);

    // Linear between knots, held at the last value afterwards, clamped to [0,1].
    // Throws DomainError for negative or NaN `days`.
    double operator()(double days) const;

    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> probabilities() const noexcept { return probs_; }
    // slopes()[i] is the slope of the segment starting at knot i.
    std::span<const double> slopes() const noexcept { return slopes_; }
    std::vector<CurvePoint> points() const;

    double min_probability() const noexcept { return probs_.front(); }
    double max_probability() const noexcept { return probs_.back(); }
    double last_time() const noexcept { return times_.back(); }
    std::size_t size() const noexcept { return times_.size(); }

    // Every probability multiplied by `factor` in (0,1].
    TimeCostCurve scaled(double factor) const;

    friend bool operator==(const TimeCostCurve& a, const TimeCostCurve& b) {
        return a.times_ == b.times_ && a.probs_ == b.probs_;
    }

private:
    std::vector<double> times_;
    std::vector<double> probs_;
    std::vector<double> slopes_;
};

// Builds a validated curve, prepending a (0, p0) anchor when the first point
// is later than time zero. Errors: ValidationError with kind "times"
// (non-increasing times), "monotone" (decreasing probability) or "range"
// (negative time, probability outside [0,1], non-finite values, no points).
TimeCostCurve make_time_cost_curve(std::span<const CurvePoint> points);
TimeCostCurve make_time_cost_curve(std::initializer_list<CurvePoint> points);

class EvasionCostCurve {
public:
    // Degenerate curve [(0,0)] with zero tail slope.
    EvasionCostCurve();

    // x = cumulative requests fulfilled, y = cumulative evasion days.
    // `tail_slope` overrides the extrapolation slope past the last knot
    // (days per request); by default the final segment's slope is extended.
    explicit EvasionCostCurve(std::span<const CurvePoint> points,
                              std::optional<double> tail_slope = std::nullopt);

    double operator()(double requests) const;

    std::span<const double> requests() const noexcept { return requests_; }
    std::span<const double> days() const noexcept { return days_; }
    std::vector<CurvePoint> points() const;
    std::size_t size() const noexcept { return requests_.size(); }

    // Slope actually used past the last knot.
    double tail_slope() const noexcept { return tail_slope_; }
    const std::optional<double>& tail_slope_override() const noexcept { return tail_override_; }

    friend bool operator==(const EvasionCostCurve& a, const EvasionCostCurve& b) {
        return a.requests_ == b.requests_ && a.days_ == b.days_ &&
               a.tail_override_ == b.tail_override_;
    }

private:
    std::vector<double> requests_;
    std::vector<double> days_;
    std::optional<double> tail_override_;
    double tail_slope_ = 0.0;
};

// Prepends (0,0) when absent. Requires strictly increasing request counts,
// nondecreasing days, a first knot of exactly (0,0) when x=0 is given, and a
// finite nonnegative tail slope.
EvasionCostCurve make_evasion_cost_curve(std::span<const CurvePoint> points,
                                         std::optional<double> tail_slope = std::nullopt);
EvasionCostCurve make_evasion_cost_curve(std::initializer_list<CurvePoint> points,
                                         std::optional<double> tail_slope = std::nullopt);

double eval_curve(const TimeCostCurve& curve, double days);
double eval_curve(const EvasionCostCurve& curve, double requests);

// Generalized inverse: the smallest t with curve(t) >= target. Flat segments
// resolve to their left endpoint; targets at or below the curve minimum give
// 0; targets above the maximum throw UnreachableError.
double invert_monotone(const TimeCostCurve& curve, double target);

// Samples an arbitrary nondecreasing function onto `knots` evenly spaced
// points over [0, until_days].
template <class Fn>
TimeCostCurve sample_time_cost_curve(Fn&& fn, double until_days, std::size_t knots) {
    std::vector<CurvePoint> pts;
    pts.reserve(knots);
    for (std::size_t i = 0; i < knots; ++i) {
        const double t = until_days * static_cast<double>(i) / static_cast<double>(knots - 1);
        pts.push_back({t, fn(t)});
    }
    return make_time_cost_curve(pts);
}

struct WeightedDuration {
    double days = 0.0;
    double weight = 0.0;

    friend bool operator==(const WeightedDuration&, const WeightedDuration&) = default;
};

// Distribution of the time an actor is willing to invest in one attempt.
class EffortDistribution {
public:
    enum class Kind { exponential, lognormal, empirical };

    static EffortDistribution exponential(double mean_days);
    // Parameters of the underlying normal of ln(days).
    static EffortDistribution lognormal(double log_mean, double log_sd);
    // Weighted sample of durations; weights are normalized to sum to one.
    static EffortDistribution empirical(std::vector<WeightedDuration> samples);

    Kind kind() const noexcept { return kind_; }
    bool is_continuous() const noexcept { return kind_ != Kind::empirical; }

    double mean_days() const noexcept { return a_; }
    double log_mean() const noexcept { return a_; }
    double log_sd() const noexcept { return b_; }
    // Normalized, sorted, merged atoms (empirical only).
    std::span<const WeightedDuration> atoms() const noexcept { return atoms_; }

    // P(T <= t).
    double cdf(double t) const;
    // P(T < t); differs from cdf only at empirical atoms.
    double cdf_below(double t) const;
    // Density; UsageError for the empirical kind.
    double pdf(double t) const;
    // Left inverse inf{t : cdf(t) >= q} for q in [0,1).
    double quantile(double q) const;
    double expected_value() const;

    friend bool operator==(const EffortDistribution&, const EffortDistribution&) = default;

private:
    EffortDistribution() = default;

    Kind kind_ = Kind::exponential;
    double a_ = 1.0;
    double b_ = 0.0;
    std::vector<WeightedDuration> atoms_;
    std::vector<double> cumulative_;
};

double effort_cdf(const EffortDistribution& dist, double t);
double effort_quantile(const EffortDistribution& dist, double q);

}  // namespace misuse
