#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace misuse {

struct QuadratureResult {
    double value = 0.0;
    // Sum over accepted panels of |Kronrod - Gauss|, plus a floating-point
    // rounding bound for the node and panel sums.
    double error_bound = 0.0;
    std::size_t evaluations = 0;
    bool converged = true;
};

// Adaptive integration of `fn` over [breakpoints.front(), breakpoints.back()].
//
// Each initial panel between consecutive breakpoints is halved until the
// 7-point Gauss and 15-point Kronrod estimates agree to within its share (by
// width) of `abs_tol`; accepted panels contribute the Kronrod value.
// Panels are summed in left-to-right order so the result does not depend on
// evaluation scheduling. Breakpoints must be sorted; duplicates are ignored.
QuadratureResult integrate_adaptive(const std::function<double(double)>& fn,
                                    std::span<const double> breakpoints, double abs_tol,
                                    int max_depth = 48);

}  // namespace misuse
