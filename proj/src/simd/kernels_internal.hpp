#pragma once

#include <array>
#include <cstddef>

#include "misuse/simd/kernels.hpp"

namespace misuse::simd::detail {

// Shared by the scalar table and the AVX2 tail loops so both compute the
// same expression for a single element.
double time_cost_at(const PiecewiseLinearView& c, std::size_t seg, double x);
std::size_t find_segment(const PiecewiseLinearView& c, double x);

// Effort CDFs at one point. These mirror the AVX2 lane arithmetic operation
// for operation (fused steps use std::fma), so both tables round identically.
double exponential_cdf_at(double mean, double x);
double lognormal_cdf_at(double log_mean, double log_sd, double x);

// Cephes exp and erfc coefficients.
namespace cephes {
inline constexpr std::array<double, 3> kExpP{1.26177193074810590878e-4, 3.02994407707441961300e-2,
                                             9.99999999999999999910e-1};
inline constexpr std::array<double, 4> kExpQ{3.00198505138664455042e-6, 2.52448340349684104192e-3,
                                             2.27265548208155028766e-1, 2.00000000000000000009e0};
inline constexpr double kLn2Hi = 6.93145751953125e-1;
inline constexpr double kLn2Lo = 1.42860682030941723212e-6;
// 2 atanh(s) = 2s * sum s^(2k) / (2k+1), highest power first.
inline constexpr std::array<double, 12> kAtanh{1.0 / 23, 1.0 / 21, 1.0 / 19, 1.0 / 17,
                                               1.0 / 15, 1.0 / 13, 1.0 / 11, 1.0 / 9,
                                               1.0 / 7,  1.0 / 5,  1.0 / 3,  1.0};
inline constexpr std::array<double, 9> kErfcP{
    2.46196981473530512524e-10, 5.64189564831068821977e-1, 7.46321056442269912687e0,
    4.86371970985681366614e1,   1.96520832956077098242e2,  5.26445194995477358631e2,
    9.34528527171957607540e2,   1.02755188689515710272e3,  5.57535335369399327526e2};
inline constexpr std::array<double, 8> kErfcQ{
    1.32281951154744992508e1, 8.67072140885989742329e1, 3.54937778887819891062e2,
    9.75708501743205489753e2, 1.82390916687909736289e3, 2.24633760818710981792e3,
    1.65666309194161350182e3, 5.57535340817727675546e2};
inline constexpr std::array<double, 6> kErfcR{5.64189583547755073984e-1, 1.27536670759978104416e0,
                                              5.01905042251180477414e0,  6.16021097993053585195e0,
                                              7.40974269950448939160e0,  2.97886665372100240670e0};
inline constexpr std::array<double, 6> kErfcS{2.26052863220117276590e0, 9.39603524938001434673e0,
                                              1.20489539808096656605e1, 1.70814450747565897222e1,
                                              9.60896809063285878198e0, 3.36907645100081516050e0};
inline constexpr std::array<double, 5> kErfT{9.60497373987051638749e0, 9.00260197203842689217e1,
                                             2.23200534594684319226e3, 7.00332514112805075473e3,
                                             5.55923013010394962768e4};
inline constexpr std::array<double, 5> kErfU{3.35617141647503099647e1, 5.21357949780152679795e2,
                                             4.59432382970980127987e3, 2.26290000613890934246e4,
                                             4.92673942608635921086e4};
}  // namespace cephes

#if defined(MISUSE_HAVE_AVX2)
const Kernels& avx2_table();
#endif

}  // namespace misuse::simd::detail
