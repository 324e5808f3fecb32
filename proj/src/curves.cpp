#include "misuse/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/lognormal.hpp>

#include "misuse/errors.hpp"

namespace misuse {

namespace {

std::string fmt_point(const CurvePoint& p) {
    std::ostringstream os;
    os << "(" << p.x << ", " << p.y << ")";
    return os.str();
}

void require_finite(const CurvePoint& p, std::size_t i) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw ValidationError("range", "knot " + std::to_string(i) + " is not finite");
    }
}

// Index of the segment containing x: the last knot with knot <= x.
std::size_t segment_index(std::span<const double> knots, double x) {
    auto it = std::upper_bound(knots.begin(), knots.end(), x);
    return static_cast<std::size_t>(std::distance(knots.begin(), it)) - 1;
}

}  // namespace

// ---------------------------------------------------------------- TimeCostCurve

TimeCostCurve::TimeCostCurve() : times_{0.0}, probs_{0.0}, slopes_{0.0} {}

TimeCostCurve::TimeCostCurve(std::span<const CurvePoint> points) {
    if (points.empty()) {
        throw ValidationError("range", "time-cost curve needs at least one point");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        require_finite(points[i], i);
        if (points[i].x < 0.0) {
            throw ValidationError("range", "negative time at knot " + fmt_point(points[i]));
        }
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i].x > points[i - 1].x)) {
            throw ValidationError("times", "knot times must be strictly increasing at " +
                                               fmt_point(points[i]));
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].y < 0.0 || points[i].y > 1.0) {
            throw ValidationError("range",
                                  "probability outside [0,1] at knot " + fmt_point(points[i]));
        }
        if (i > 0 && points[i].y < points[i - 1].y) {
            throw ValidationError("monotone",
                                  "probability decreases at knot " + fmt_point(points[i]));
        }
    }

    const bool anchor = points.front().x > 0.0;
    times_.reserve(points.size() + 1);
    probs_.reserve(points.size() + 1);
    if (anchor) {
        times_.push_back(0.0);
        probs_.push_back(points.front().y);
    }
    for (const auto& p : points) {
        times_.push_back(p.x);
        probs_.push_back(p.y);
    }
    slopes_.assign(times_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
        slopes_[i] = (probs_[i + 1] - probs_[i]) / (times_[i + 1] - times_[i]);
    }
}

double TimeCostCurve::operator()(double days) const {
    if (!(days >= 0.0)) {
        throw DomainError("time-cost curve evaluated at negative or NaN time");
    }
    const std::size_t i = segment_index(times_, days);
    if (i + 1 == times_.size()) {
        return probs_.back();
    }
    const double y = probs_[i] + (days - times_[i]) * slopes_[i];
    return std::clamp(y, 0.0, 1.0);
}

std::vector<CurvePoint> TimeCostCurve::points() const {
    std::vector<CurvePoint> out(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) {
        out[i] = {times_[i], probs_[i]};
    }
    return out;
}

TimeCostCurve TimeCostCurve::scaled(double factor) const {
    if (!(factor > 0.0 && factor <= 1.0)) {
        throw ValidationError("range", "curve scale factor must lie in (0,1]");
    }
    auto pts = points();
    for (auto& p : pts) {
        p.y *= factor;
    }
    return TimeCostCurve(pts);
}

TimeCostCurve make_time_cost_curve(std::span<const CurvePoint> points) {
    return TimeCostCurve(points);
}

TimeCostCurve make_time_cost_curve(std::initializer_list<CurvePoint> points) {
    return TimeCostCurve(std::span<const CurvePoint>(points.begin(), points.size()));
}

// ------------------------------------------------------------- EvasionCostCurve

EvasionCostCurve::EvasionCostCurve() : requests_{0.0}, days_{0.0} {}

EvasionCostCurve::EvasionCostCurve(std::span<const CurvePoint> points,
                                   std::optional<double> tail_slope)
    : tail_override_(tail_slope) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        require_finite(points[i], i);
        if (points[i].x < 0.0 || points[i].y < 0.0) {
            throw ValidationError("range", "negative coordinate at knot " + fmt_point(points[i]));
        }
    }
    if (!points.empty() && points.front().x == 0.0 && points.front().y != 0.0) {
        throw ValidationError("range", "evasion curve must start at (0, 0), got " +
                                           fmt_point(points.front()));
    }
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (!(points[i].x > points[i - 1].x)) {
            throw ValidationError("times", "request counts must be strictly increasing at " +
                                               fmt_point(points[i]));
        }
        if (points[i].y < points[i - 1].y) {
            throw ValidationError("monotone",
                                  "evasion time decreases at knot " + fmt_point(points[i]));
        }
    }
    if (tail_slope && !(std::isfinite(*tail_slope) && *tail_slope >= 0.0)) {
        throw ValidationError("range", "tail slope must be finite and nonnegative");
    }

    requests_.reserve(points.size() + 1);
    days_.reserve(points.size() + 1);
    if (points.empty() || points.front().x > 0.0) {
        requests_.push_back(0.0);
        days_.push_back(0.0);
    }
    for (const auto& p : points) {
        requests_.push_back(p.x);
        days_.push_back(p.y);
    }
    if (tail_override_) {
        tail_slope_ = *tail_override_;
    } else if (requests_.size() >= 2) {
        const std::size_t n = requests_.size();
        tail_slope_ = (days_[n - 1] - days_[n - 2]) / (requests_[n - 1] - requests_[n - 2]);
    }
}

double EvasionCostCurve::operator()(double requests) const {
    if (!(requests >= 0.0)) {
        throw DomainError("evasion curve evaluated at negative or NaN request count");
    }
    const std::size_t i = segment_index(requests_, requests);
    if (i + 1 == requests_.size()) {
        return days_.back() + (requests - requests_.back()) * tail_slope_;
    }
    const double slope = (days_[i + 1] - days_[i]) / (requests_[i + 1] - requests_[i]);
    return days_[i] + (requests - requests_[i]) * slope;
}

std::vector<CurvePoint> EvasionCostCurve::points() const {
    std::vector<CurvePoint> out(requests_.size());
    for (std::size_t i = 0; i < requests_.size(); ++i) {
        out[i] = {requests_[i], days_[i]};
    }
    return out;
}

EvasionCostCurve make_evasion_cost_curve(std::span<const CurvePoint> points,
                                         std::optional<double> tail_slope) {
    return EvasionCostCurve(points, tail_slope);
}

EvasionCostCurve make_evasion_cost_curve(std::initializer_list<CurvePoint> points,
                                         std::optional<double> tail_slope) {
    return EvasionCostCurve(std::span<const CurvePoint>(points.begin(), points.size()),
                            tail_slope);
}

double eval_curve(const TimeCostCurve& curve, double days) { return curve(days); }
double eval_curve(const EvasionCostCurve& curve, double requests) { return curve(requests); }

double invert_monotone(const TimeCostCurve& curve, double target) {
    if (std::isnan(target)) {
        throw DomainError("inversion target is NaN");
    }
    const auto t = curve.times();
    const auto p = curve.probabilities();
    if (target <= p.front()) {
        return 0.0;
    }
    if (target > p.back()) {
        std::ostringstream os;
        os << "target probability " << target << " exceeds curve maximum " << p.back();
        throw UnreachableError(os.str());
    }
    // First knot reaching the target; the segment before it crosses it.
    const auto it = std::lower_bound(p.begin(), p.end(), target);
    const auto j = static_cast<std::size_t>(std::distance(p.begin(), it));
    if (p[j] == target && (j == 0 || p[j - 1] < target)) {
        return t[j];
    }
    const double frac = (target - p[j - 1]) / (p[j] - p[j - 1]);
    return std::min(t[j - 1] + frac * (t[j] - t[j - 1]), t[j]);
}

// ----------------------------------------------------------- EffortDistribution

EffortDistribution EffortDistribution::exponential(double mean_days) {
    if (!(std::isfinite(mean_days) && mean_days > 0.0)) {
        throw ValidationError("range", "exponential effort mean must be positive and finite",
                              "mean_days");
    }
    EffortDistribution d;
    d.kind_ = Kind::exponential;
    d.a_ = mean_days;
    return d;
}

EffortDistribution EffortDistribution::lognormal(double log_mean, double log_sd) {
    if (!std::isfinite(log_mean)) {
        throw ValidationError("range", "lognormal log_mean must be finite", "log_mean");
    }
    if (!(std::isfinite(log_sd) && log_sd > 0.0)) {
        throw ValidationError("range", "lognormal log_sd must be positive and finite", "log_sd");
    }
    EffortDistribution d;
    d.kind_ = Kind::lognormal;
    d.a_ = log_mean;
    d.b_ = log_sd;
    return d;
}

EffortDistribution EffortDistribution::empirical(std::vector<WeightedDuration> samples) {
    if (samples.empty()) {
        throw ValidationError("range", "empirical effort distribution needs samples", "samples");
    }
    double total = 0.0;
    for (const auto& s : samples) {
        if (!(std::isfinite(s.days) && s.days >= 0.0)) {
            throw ValidationError("range", "empirical durations must be finite and >= 0",
                                  "samples");
        }
        if (!(std::isfinite(s.weight) && s.weight > 0.0)) {
            throw ValidationError("range", "empirical weights must be positive", "samples");
        }
        total += s.weight;
    }
    std::stable_sort(samples.begin(), samples.end(),
                     [](const auto& l, const auto& r) { return l.days < r.days; });
    EffortDistribution d;
    d.kind_ = Kind::empirical;
    for (const auto& s : samples) {
        if (!d.atoms_.empty() && d.atoms_.back().days == s.days) {
            d.atoms_.back().weight += s.weight / total;
        } else {
            d.atoms_.push_back({s.days, s.weight / total});
        }
    }
    double acc = 0.0;
    for (const auto& a : d.atoms_) {
        acc += a.weight;
        d.cumulative_.push_back(acc);
    }
    d.cumulative_.back() = 1.0;
    d.a_ = 0.0;
    for (const auto& a : d.atoms_) {
        d.a_ += a.days * a.weight;
    }
    return d;
}

double EffortDistribution::cdf(double t) const {
    if (!(t > 0.0)) {
        if (kind_ == Kind::empirical && t == 0.0 && atoms_.front().days == 0.0) {
            return cumulative_.front();
        }
        return 0.0;
    }
    switch (kind_) {
        case Kind::exponential:
            return -std::expm1(-t / a_);
        case Kind::lognormal:
            return 0.5 * std::erfc(-((std::log(t) - a_) / b_) * M_SQRT1_2);
        case Kind::empirical: {
            auto it = std::upper_bound(atoms_.begin(), atoms_.end(), t,
                                       [](double v, const auto& a) { return v < a.days; });
            if (it == atoms_.begin()) return 0.0;
            return cumulative_[static_cast<std::size_t>(std::distance(atoms_.begin(), it)) - 1];
        }
    }
    return 0.0;
}

double EffortDistribution::cdf_below(double t) const {
    if (kind_ != Kind::empirical) {
        return cdf(t);
    }
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), t,
                               [](const auto& a, double v) { return a.days < v; });
    if (it == atoms_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(std::distance(atoms_.begin(), it)) - 1];
}

double EffortDistribution::pdf(double t) const {
    if (kind_ == Kind::empirical) {
        throw UsageError("empirical effort distribution has no density");
    }
    if (!(t > 0.0)) {
        return (kind_ == Kind::exponential && t == 0.0) ? 1.0 / a_ : 0.0;
    }
    if (kind_ == Kind::exponential) {
        return std::exp(-t / a_) / a_;
    }
    const double z = (std::log(t) - a_) / b_;
    return std::exp(-0.5 * z * z) / (t * b_ * std::sqrt(2.0 * M_PI));
}

double EffortDistribution::quantile(double q) const {
    if (!(q >= 0.0 && q < 1.0)) {
        throw DomainError("effort quantile requires q in [0,1)");
    }
    switch (kind_) {
        case Kind::exponential:
            return -a_ * std::log1p(-q);
        case Kind::lognormal:
            if (q == 0.0) return 0.0;
            return boost::math::quantile(boost::math::lognormal_distribution<double>(a_, b_), q);
        case Kind::empirical: {
            auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), q);
            if (it == cumulative_.end()) --it;
            return atoms_[static_cast<std::size_t>(std::distance(cumulative_.begin(), it))].days;
        }
    }
    return 0.0;
}

double EffortDistribution::expected_value() const {
    switch (kind_) {
        case Kind::exponential:
            return a_;
        case Kind::lognormal:
            return std::exp(a_ + 0.5 * b_ * b_);
        case Kind::empirical:
            return a_;
    }
    return 0.0;
}

double effort_cdf(const EffortDistribution& dist, double t) { return dist.cdf(t); }
double effort_quantile(const EffortDistribution& dist, double q) { return dist.quantile(q); }

}  // namespace misuse
