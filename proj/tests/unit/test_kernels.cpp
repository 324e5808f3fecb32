#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "misuse/curves.hpp"
#include "misuse/simd/kernels.hpp"
#include "oracles.hpp"

using namespace misuse;

namespace {

// Distance allowed between the kernel CDFs and the libm-based definitions.
constexpr double kCdfTolerance = 1e-14;

simd::PiecewiseLinearView view(const TimeCostCurve& c) {
    return {c.times(), c.probabilities(), c.slopes()};
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("scalar kernels match the curve and distribution definitions") {
    const auto& k = simd::scalar_kernels();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto c = make_time_cost_curve(oracle::random_success_curve(rng, 0.05));
        std::vector<double> out(300);
        k.eval_time_cost(view(c), 0.25, c.last_time() / 200, out);
        for (std::size_t j = 0; j < out.size(); ++j) {
            CHECK(same_bits(out[j], c(0.25 + static_cast<double>(j) * (c.last_time() / 200))));
        }
    }
    const auto ex = EffortDistribution::exponential(37.0);
    const auto ln = EffortDistribution::lognormal(4.2, 0.6);
    std::vector<double> a(400);
    std::vector<double> b(400);
    k.exponential_cdf(37.0, -3.5, 1.0, a);
    k.lognormal_cdf(4.2, 0.6, -3.5, 1.0, b);
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double x = -3.5 + static_cast<double>(j);
        CHECK(std::abs(a[j] - ex.cdf(x)) <= kCdfTolerance);
        CHECK(std::abs(b[j] - ln.cdf(x)) <= kCdfTolerance);
    }
    // Wide parameter sweep, including deep tails on both sides.
    double worst = 0.0;
    for (const double sd : {0.05, 0.3, 1.0, 2.5}) {
        for (const double mu : {0.0, 2.0, 5.0}) {
            const auto d = EffortDistribution::lognormal(mu, sd);
            k.lognormal_cdf(mu, sd, 1e-3, 0.37, b);
            for (std::size_t j = 0; j < b.size(); ++j) {
                worst = std::max(worst, std::abs(b[j] - d.cdf(1e-3 + static_cast<double>(j) * 0.37)));
            }
        }
    }
    MESSAGE("largest lognormal CDF distance from libm " << worst);
    CHECK(worst <= kCdfTolerance);
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
    const simd::Kernels* avx = simd::avx2_kernels();
    if (avx == nullptr) {
        MESSAGE("AVX2 kernels unavailable on this machine; skipping");
        return;
    }
    const auto& ref = simd::scalar_kernels();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SUBCASE("eval_time_cost is bit-identical") {
        for (int i = 0; i < 300; ++i) {
            const auto c = make_time_cost_curve(oracle::random_success_curve(rng, 0.2 * u(rng)));
            const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 700);
            const double x0 = u(rng) * 20.0;
            const double step = i % 7 == 0 ? 0.0 : u(rng) * 3.0;
            std::vector<double> a(n);
            std::vector<double> b(n);
            ref.eval_time_cost(view(c), x0, step, a);
            avx->eval_time_cost(view(c), x0, step, b);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(same_bits(a[j], b[j]));
            }
        }
    }

    SUBCASE("accumulate_bin_mass is bit-identical") {
        for (int i = 0; i < 100; ++i) {
            const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 1000);
            std::vector<double> p(n);
            std::vector<double> cdf(n + 1);
            for (auto& x : p) x = u(rng);
            double acc = 0.0;
            for (auto& x : cdf) x = (acc += u(rng) / static_cast<double>(n));
            std::vector<double> a(n, 0.5);
            std::vector<double> b(n, 0.5);
            ref.accumulate_bin_mass(p, cdf, a);
            avx->accumulate_bin_mass(p, cdf, b);
            for (std::size_t j = 0; j < n; ++j) CHECK(same_bits(a[j], b[j]));
        }
    }

    SUBCASE("effort CDFs are bit-identical") {
        for (int i = 0; i < 200; ++i) {
            const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 1500);
            const double x0 = -5.0 + u(rng) * 10.0;
            const double mean = 1.0 + u(rng) * 400.0;
            const double mu = std::log(1.0 + u(rng) * 400.0);
            const double sd = 0.05 + u(rng) * 2.0;
            std::vector<double> a(n);
            std::vector<double> b(n);
            ref.exponential_cdf(mean, x0, 1.0, a);
            avx->exponential_cdf(mean, x0, 1.0, b);
            for (std::size_t j = 0; j < n; ++j) CHECK(same_bits(a[j], b[j]));
            ref.lognormal_cdf(mu, sd, x0, 1.0, a);
            avx->lognormal_cdf(mu, sd, x0, 1.0, b);
            for (std::size_t j = 0; j < n; ++j) CHECK(same_bits(a[j], b[j]));
        }
    }

    SUBCASE("zero-length outputs are fine") {
        std::vector<double> empty;
        const auto c = make_time_cost_curve({{0, 0}, {1, 1}});
        avx->eval_time_cost(view(c), 0, 1, empty);
        avx->exponential_cdf(1.0, 0, 1, empty);
        avx->lognormal_cdf(0.0, 1.0, 0, 1, empty);
        std::vector<double> one{0.0};
        avx->accumulate_bin_mass(empty, one, empty);
    }
}

TEST_CASE("active kernels are one of the tables") {
    const auto& active = simd::active_kernels();
    CHECK((active.name == "scalar" || active.name == "avx2"));
}
