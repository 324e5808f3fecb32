#pragma once

// Data-parallel inner loops of the what-if simulator.
//
// Every kernel evaluates at an arithmetic sequence x_k = x0 + k * step,
// k = 0 .. out.size()-1, which is how the simulator walks day bins. The scalar
// table is the reference and the AVX2 table matches it bit for bit, so
// simulation output does not depend on the CPU. The CDFs use Cephes-style
// exp/log/erfc rather than libm for that reason; they stay within 1e-14 of
// the libm values.
//
// The active table is chosen once per process from CPU features. Setting the
// environment variable MISUSE_RISK_SIMD to "scalar" or "avx2" overrides it.

#include <cstddef>
#include <span>
#include <string_view>

namespace misuse::simd {

// Borrowed view of a TimeCostCurve's knots; slopes[i] belongs to segment i.
struct PiecewiseLinearView {
    std::span<const double> xs;
    std::span<const double> ys;
    std::span<const double> slopes;
};

struct Kernels {
    std::string_view name;

    // out[k] = curve(x_k): linear within a segment, held before the first and
    // after the last knot, clamped to [0,1]. Requires step >= 0.
    void (*eval_time_cost)(PiecewiseLinearView curve, double x0, double step,
                           std::span<double> out);

    // out[k] = P(T < x_k) for T ~ Exponential(mean); 0 for x_k <= 0.
    void (*exponential_cdf)(double mean, double x0, double step, std::span<double> out);

    // out[k] = P(T < x_k) for ln T ~ Normal(log_mean, log_sd); 0 for x_k <= 0.
    void (*lognormal_cdf)(double log_mean, double log_sd, double x0, double step,
                          std::span<double> out);

    // out[k] += p[k] * (cdf[k+1] - cdf[k]); cdf has out.size()+1 entries.
    void (*accumulate_bin_mass)(std::span<const double> p, std::span<const double> cdf,
                                std::span<double> out);
};

const Kernels& scalar_kernels();

// Null when the build lacks AVX2 support or the running CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();

const Kernels& active_kernels();

}  // namespace misuse::simd
