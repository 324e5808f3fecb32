#include "misuse/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "misuse/errors.hpp"

namespace misuse {

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
using Gauss = boost::math::quadrature::gauss<double, 7>;

// Every initial panel is split at least this often before the error test
// applies, so a peak between the sampled nodes is not missed.
constexpr int kMinDepth = 2;

struct Panel {
    double a, b;
    int depth;
};

struct PanelEstimate {
    double kronrod, gauss, magnitude;
};

// Gauss nodes sit at the even Kronrod indices.
PanelEstimate estimate(const std::function<double(double)>& fn, double a, double b) {
    const auto& xk = Kronrod::abscissa();
    const auto& wk = Kronrod::weights();
    const auto& wg = Gauss::weights();
    const double c = 0.5 * (a + b);
    const double r = 0.5 * (b - a);
    const double f0 = fn(c);
    PanelEstimate e{wk[0] * f0, wg[0] * f0, wk[0] * std::abs(f0)};
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double left = fn(c - r * xk[i]);
        const double right = fn(c + r * xk[i]);
        e.kronrod += wk[i] * (left + right);
        e.magnitude += wk[i] * (std::abs(left) + std::abs(right));
        if (i % 2 == 0) e.gauss += wg[i / 2] * (left + right);
    }
    e.kronrod *= r;
    e.gauss *= r;
    e.magnitude *= r;
    return e;
}

constexpr std::size_t kNodesPerPanel = 15;

}  // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& fn,
                                    std::span<const double> breakpoints, double abs_tol,
                                    int max_depth) {
    QuadratureResult out;
    if (breakpoints.size() < 2) {
        return out;
    }
    const double lo = breakpoints.front();
    const double hi = breakpoints.back();
    const double width = hi - lo;
    if (!(width > 0.0)) {
        return out;
    }
    if (!(abs_tol > 0.0)) {
        throw UsageError("quadrature tolerance must be positive");
    }
    const double tol_density = abs_tol / width;

    std::vector<Panel> stack;
    std::size_t panels = 0;
    double magnitude = 0.0;
    double prev_x = breakpoints.front();
    for (std::size_t i = 1; i < breakpoints.size(); ++i) {
        const double x = breakpoints[i];
        if (!(x > prev_x)) {
            continue;
        }
        stack.push_back({prev_x, x, 0});
        while (!stack.empty()) {
            const Panel p = stack.back();
            stack.pop_back();
            const double h = p.b - p.a;
            const double m = p.a + 0.5 * h;
            const bool floor_hit = !(m > p.a && m < p.b);
            if (p.depth < kMinDepth && !floor_hit) {
                stack.push_back({m, p.b, p.depth + 1});
                stack.push_back({p.a, m, p.depth + 1});
                continue;
            }
            const PanelEstimate e = estimate(fn, p.a, p.b);
            out.evaluations += kNodesPerPanel;
            const double diff = std::abs(e.kronrod - e.gauss);
            if (diff <= tol_density * h || p.depth >= max_depth || floor_hit) {
                if (diff > tol_density * h) {
                    out.converged = false;
                }
                out.value += e.kronrod;
                out.error_bound += diff;
                magnitude += e.magnitude;
                ++panels;
                continue;
            }
            // Right half first so the left half is integrated (and summed) first.
            stack.push_back({m, p.b, p.depth + 1});
            stack.push_back({p.a, m, p.depth + 1});
        }
        prev_x = x;
    }
    // Rounding in the node sums and the running total (gamma_n bound).
    const double unit = std::numeric_limits<double>::epsilon();
    out.error_bound += static_cast<double>(kNodesPerPanel + panels) * unit * magnitude;
    return out;
}

}  // namespace misuse
