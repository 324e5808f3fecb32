#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "misuse/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace misuse::simd {

namespace detail {

double time_cost_at(const PiecewiseLinearView& c, std::size_t seg, double x) {
    if (x < c.xs[0]) {
        return c.ys[0];
    }
    if (seg + 1 == c.xs.size()) {
        return c.ys[seg];
    }
    const double y = c.ys[seg] + (x - c.xs[seg]) * c.slopes[seg];
    return std::clamp(y, 0.0, 1.0);
}

std::size_t find_segment(const PiecewiseLinearView& c, double x) {
    auto it = std::upper_bound(c.xs.begin(), c.xs.end(), x);
    if (it == c.xs.begin()) {
        return 0;
    }
    return static_cast<std::size_t>(std::distance(c.xs.begin(), it)) - 1;
}

namespace {

template <std::size_t N>
double horner(double x, const std::array<double, N>& c) {
    double acc = c[0];
    for (std::size_t i = 1; i < N; ++i) acc = std::fma(acc, x, c[i]);
    return acc;
}

template <std::size_t N>
double horner1(double x, const std::array<double, N>& c) {
    double acc = x + c[0];
    for (std::size_t i = 1; i < N; ++i) acc = std::fma(acc, x, c[i]);
    return acc;
}

double cephes_exp(double x) {
    const bool underflow = x < -700.0;
    x = std::min(std::max(x, -700.0), 700.0);
    const double fx = std::nearbyint(x * M_LOG2E);
    double r = std::fma(-fx, cephes::kLn2Hi, x);
    r = std::fma(-fx, cephes::kLn2Lo, r);
    const double rr = r * r;
    const double px = r * horner(rr, cephes::kExpP);
    const double qx = horner(rr, cephes::kExpQ);
    double e = px / (qx - px);
    e = std::fma(e, 2.0, 1.0);
    const auto n = static_cast<std::uint64_t>(static_cast<std::int64_t>(fx));
    const double scaled = std::bit_cast<double>(std::bit_cast<std::uint64_t>(e) + (n << 52));
    return underflow ? 0.0 : scaled;
}

// Positive normal inputs only.
double cephes_log(double x) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    double e = static_cast<double>(bits >> 52) - 1023.0;
    double m = std::bit_cast<double>((bits & 0x000FFFFFFFFFFFFFULL) | 0x3FF0000000000000ULL);
    if (m > M_SQRT2) {
        m = m * 0.5;
        e = e + 1.0;
    }
    const double s = (m - 1.0) / (m + 1.0);
    const double s2 = s * s;
    const double log_m = (s + s) * horner(s2, cephes::kAtanh);
    return std::fma(e, cephes::kLn2Hi, std::fma(e, cephes::kLn2Lo, log_m));
}

double cephes_erfc(double a) {
    const double x = std::abs(a);
    if (x < 1.0) {
        const double zz = a * a;
        return 1.0 - (a * horner(zz, cephes::kErfT)) / horner1(zz, cephes::kErfU);
    }
    if (x >= 27.0) {
        return a < 0.0 ? 2.0 : 0.0;
    }
    const double z = cephes_exp(-(a * a));
    const double ratio = x < 8.0 ? horner(x, cephes::kErfcP) / horner1(x, cephes::kErfcQ)
                                 : horner(x, cephes::kErfcR) / horner1(x, cephes::kErfcS);
    const double y = z * ratio;
    return a < 0.0 ? 2.0 - y : y;
}

}  // namespace

double exponential_cdf_at(double mean, double x) {
    return x > 0.0 ? 1.0 - cephes_exp(x / -mean) : 0.0;
}

double lognormal_cdf_at(double log_mean, double log_sd, double x) {
    if (!(x > 0.0)) return 0.0;
    const double zscore = (cephes_log(std::max(x, 0x1p-1000)) - log_mean) / log_sd;
    return 0.5 * cephes_erfc(-zscore * M_SQRT1_2);
}

}  // namespace detail

namespace {

void eval_time_cost_scalar(PiecewiseLinearView c, double x0, double step, std::span<double> out) {
    std::size_t seg = detail::find_segment(c, x0);
    const std::size_t last = c.xs.size() - 1;
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        while (seg < last && c.xs[seg + 1] <= x) {
            ++seg;
        }
        out[k] = detail::time_cost_at(c, seg, x);
    }
}

void exponential_cdf_scalar(double mean, double x0, double step, std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        out[k] = detail::exponential_cdf_at(mean, x);
    }
}

void lognormal_cdf_scalar(double log_mean, double log_sd, double x0, double step,
                          std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        out[k] = detail::lognormal_cdf_at(log_mean, log_sd, x);
    }
}

void accumulate_bin_mass_scalar(std::span<const double> p, std::span<const double> cdf,
                                std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] += p[k] * (cdf[k + 1] - cdf[k]);
    }
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels table{"scalar", eval_time_cost_scalar, exponential_cdf_scalar,
                               lognormal_cdf_scalar, accumulate_bin_mass_scalar};
    return table;
}

}  // namespace misuse::simd
