// AVX2 + FMA variants of the simulator kernels. Compiled with -mavx2 -mfma
// and only reached after a runtime CPU check.

#if defined(MISUSE_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "kernels_internal.hpp"
#include "misuse/simd/kernels.hpp"

namespace misuse::simd {

namespace {

namespace cephes = detail::cephes;

constexpr std::size_t kLanes = 4;

inline __m256d iota_from(std::size_t k) {
    const __m256d base = _mm256_set1_pd(static_cast<double>(k));
    return _mm256_add_pd(base, _mm256_set_pd(3.0, 2.0, 1.0, 0.0));
}

// x_k = x0 + k * step with the same rounding as the scalar loop.
inline __m256d arith_seq(double x0, double step, std::size_t k) {
    return _mm256_add_pd(_mm256_set1_pd(x0), _mm256_mul_pd(iota_from(k), _mm256_set1_pd(step)));
}

template <std::size_t N>
inline __m256d horner(__m256d x, const std::array<double, N>& c) {
    __m256d acc = _mm256_set1_pd(c[0]);
    for (std::size_t i = 1; i < N; ++i) {
        acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(c[i]));
    }
    return acc;
}

// Polynomial whose leading coefficient is an implicit 1.
template <std::size_t N>
inline __m256d horner1(__m256d x, const std::array<double, N>& c) {
    __m256d acc = _mm256_add_pd(x, _mm256_set1_pd(c[0]));
    for (std::size_t i = 1; i < N; ++i) {
        acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(c[i]));
    }
    return acc;
}

// Cephes-style exp(x); lanes below -700 return 0.
inline __m256d exp_pd(__m256d x) {
    const __m256d lo = _mm256_set1_pd(-700.0);
    const __m256d hi = _mm256_set1_pd(700.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
    x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(M_LOG2E)),
                                       _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(cephes::kLn2Hi), x);
    r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(cephes::kLn2Lo), r);

    const __m256d rr = _mm256_mul_pd(r, r);
    const __m256d px = _mm256_mul_pd(r, horner(rr, cephes::kExpP));
    const __m256d qx = horner(rr, cephes::kExpQ);
    __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

    const __m256d magic = _mm256_set1_pd(0x1.8p52);
    const __m256i n = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(fx, magic)),
                                       _mm256_castpd_si256(magic));
    const __m256i scaled = _mm256_add_epi64(_mm256_castpd_si256(e), _mm256_slli_epi64(n, 52));
    return _mm256_andnot_pd(underflow, _mm256_castsi256_pd(scaled));
}

// Natural log for positive normal inputs.
inline __m256d log_pd(__m256d x) {
    const __m256i bits = _mm256_castpd_si256(x);
    const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
    const __m256d two52 = _mm256_set1_pd(0x1p52);
    __m256d e = _mm256_sub_pd(
        _mm256_castsi256_pd(_mm256_add_epi64(exp_bits, _mm256_castpd_si256(two52))), two52);
    e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

    const __m256i mant = _mm256_or_si256(
        _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
        _mm256_set1_epi64x(0x3FF0000000000000LL));
    __m256d m = _mm256_castsi256_pd(mant);
    const __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(M_SQRT2), _CMP_GT_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
    e = _mm256_add_pd(e, _mm256_and_pd(big, _mm256_set1_pd(1.0)));

    // ln m = 2 atanh(s), s = (m-1)/(m+1), |s| <= 0.172.
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    const __m256d s2 = _mm256_mul_pd(s, s);
    const __m256d log_m = _mm256_mul_pd(_mm256_add_pd(s, s), horner(s2, cephes::kAtanh));

    const __m256d ln2_hi = _mm256_set1_pd(cephes::kLn2Hi);
    const __m256d ln2_lo = _mm256_set1_pd(cephes::kLn2Lo);
    return _mm256_fmadd_pd(e, ln2_hi, _mm256_fmadd_pd(e, ln2_lo, log_m));
}

// Cephes erfc rational approximations, evaluated on all branches and blended.
inline __m256d erfc_pd(__m256d a) {

    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d x = _mm256_andnot_pd(sign_mask, a);
    const __m256d aa = _mm256_mul_pd(a, a);

    // |a| < 1: 1 - erf(a).
    const __m256d small_x = _mm256_min_pd(x, one);
    const __m256d small_a = _mm256_or_pd(small_x, _mm256_and_pd(a, sign_mask));
    const __m256d zz = _mm256_mul_pd(small_a, small_a);
    const __m256d erf_small =
        _mm256_div_pd(_mm256_mul_pd(small_a, horner(zz, cephes::kErfT)), horner1(zz, cephes::kErfU));
    const __m256d y_small = _mm256_sub_pd(one, erf_small);

    // |a| >= 1: exp(-a^2) * rational(|a|), reflected for negative a.
    const __m256d capped = _mm256_min_pd(x, _mm256_set1_pd(27.0));
    const __m256d z = exp_pd(_mm256_xor_pd(_mm256_min_pd(aa, _mm256_set1_pd(729.0)), sign_mask));
    const __m256d mid = _mm256_div_pd(horner(capped, cephes::kErfcP), horner1(capped, cephes::kErfcQ));
    const __m256d far = _mm256_div_pd(horner(capped, cephes::kErfcR), horner1(capped, cephes::kErfcS));
    const __m256d lt8 = _mm256_cmp_pd(x, _mm256_set1_pd(8.0), _CMP_LT_OQ);
    __m256d y = _mm256_mul_pd(z, _mm256_blendv_pd(far, mid, lt8));
    const __m256d beyond = _mm256_cmp_pd(x, _mm256_set1_pd(27.0), _CMP_GE_OQ);
    y = _mm256_andnot_pd(beyond, y);
    const __m256d negative = _mm256_cmp_pd(a, _mm256_setzero_pd(), _CMP_LT_OQ);
    y = _mm256_blendv_pd(y, _mm256_sub_pd(two, y), negative);

    const __m256d lt1 = _mm256_cmp_pd(x, one, _CMP_LT_OQ);
    return _mm256_blendv_pd(y, y_small, lt1);
}

void eval_time_cost_avx2(PiecewiseLinearView c, double x0, double step, std::span<double> out) {
    const std::size_t n = out.size();
    const std::size_t last = c.xs.size() - 1;
    std::size_t seg = detail::find_segment(c, x0);
    std::size_t k = 0;
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);

    for (; k + kLanes <= n; k += kLanes) {
        const double first = x0 + static_cast<double>(k) * step;
        const double final = x0 + static_cast<double>(k + kLanes - 1) * step;
        while (seg < last && c.xs[seg + 1] <= first) {
            ++seg;
        }
        const bool before_start = first < c.xs[0];
        if (!before_start && seg == last) {
            _mm256_storeu_pd(&out[k], _mm256_set1_pd(c.ys[last]));
            continue;
        }
        if (before_start || final >= c.xs[seg + 1]) {
            // Block straddles a knot; fall back to the per-element expression.
            for (std::size_t j = 0; j < kLanes; ++j) {
                const double x = x0 + static_cast<double>(k + j) * step;
                std::size_t s = seg;
                while (s < last && c.xs[s + 1] <= x) {
                    ++s;
                }
                out[k + j] = detail::time_cost_at(c, s, x);
            }
            continue;
        }
        const __m256d x = arith_seq(x0, step, k);
        __m256d y = _mm256_add_pd(
            _mm256_set1_pd(c.ys[seg]),
            _mm256_mul_pd(_mm256_sub_pd(x, _mm256_set1_pd(c.xs[seg])),
                          _mm256_set1_pd(c.slopes[seg])));
        // Same selection order as std::clamp so signed zeros match.
        y = _mm256_blendv_pd(y, zero, _mm256_cmp_pd(y, zero, _CMP_LT_OQ));
        y = _mm256_blendv_pd(y, one, _mm256_cmp_pd(one, y, _CMP_LT_OQ));
        _mm256_storeu_pd(&out[k], y);
    }
    for (; k < n; ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        while (seg < last && c.xs[seg + 1] <= x) {
            ++seg;
        }
        out[k] = detail::time_cost_at(c, seg, x);
    }
}

void exponential_cdf_avx2(double mean, double x0, double step, std::span<double> out) {
    const std::size_t n = out.size();
    std::size_t k = 0;
    const __m256d zero = _mm256_setzero_pd();
    const __m256d neg_mean = _mm256_set1_pd(-mean);
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d x = arith_seq(x0, step, k);
        const __m256d g = _mm256_sub_pd(_mm256_set1_pd(1.0), exp_pd(_mm256_div_pd(x, neg_mean)));
        _mm256_storeu_pd(&out[k], _mm256_and_pd(_mm256_cmp_pd(x, zero, _CMP_GT_OQ), g));
    }
    for (; k < n; ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        out[k] = detail::exponential_cdf_at(mean, x);
    }
}

void lognormal_cdf_avx2(double log_mean, double log_sd, double x0, double step,
                        std::span<double> out) {
    const std::size_t n = out.size();
    std::size_t k = 0;
    const __m256d zero = _mm256_setzero_pd();
    const __m256d mu = _mm256_set1_pd(log_mean);
    const __m256d sd = _mm256_set1_pd(log_sd);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d tiny = _mm256_set1_pd(0x1p-1000);
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d x = arith_seq(x0, step, k);
        const __m256d positive = _mm256_cmp_pd(x, zero, _CMP_GT_OQ);
        const __m256d safe = _mm256_max_pd(x, tiny);
        const __m256d zscore = _mm256_div_pd(_mm256_sub_pd(log_pd(safe), mu), sd);
        const __m256d arg = _mm256_mul_pd(_mm256_xor_pd(zscore, sign_mask),
                                          _mm256_set1_pd(M_SQRT1_2));
        const __m256d g = _mm256_mul_pd(_mm256_set1_pd(0.5), erfc_pd(arg));
        _mm256_storeu_pd(&out[k], _mm256_and_pd(positive, g));
    }
    for (; k < n; ++k) {
        const double x = x0 + static_cast<double>(k) * step;
        out[k] = detail::lognormal_cdf_at(log_mean, log_sd, x);
    }
}

void accumulate_bin_mass_avx2(std::span<const double> p, std::span<const double> cdf,
                              std::span<double> out) {
    const std::size_t n = out.size();
    std::size_t k = 0;
    for (; k + kLanes <= n; k += kLanes) {
        const __m256d lo = _mm256_loadu_pd(&cdf[k]);
        const __m256d hi = _mm256_loadu_pd(&cdf[k + 1]);
        const __m256d mass = _mm256_mul_pd(_mm256_loadu_pd(&p[k]), _mm256_sub_pd(hi, lo));
        _mm256_storeu_pd(&out[k], _mm256_add_pd(_mm256_loadu_pd(&out[k]), mass));
    }
    for (; k < n; ++k) {
        out[k] += p[k] * (cdf[k + 1] - cdf[k]);
    }
}

}  // namespace

namespace detail {

const Kernels& avx2_table() {
    static const Kernels table{"avx2", eval_time_cost_avx2, exponential_cdf_avx2,
                               lognormal_cdf_avx2, accumulate_bin_mass_avx2};
    return table;
}

}  // namespace detail

}  // namespace misuse::simd

#endif  // MISUSE_HAVE_AVX2
