#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "misuse/quadrature.hpp"

using namespace misuse;

TEST_CASE("integrates smooth functions to the requested tolerance") {
    const std::vector<double> bps{0.0, std::numbers::pi};
    const auto r = integrate_adaptive([](double x) { return std::sin(x); }, bps, 1e-12);
    CHECK(r.converged);
    CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.error_bound >= 0.0);
}

TEST_CASE("piecewise-linear integrands with breakpoints are exact") {
    const std::vector<double> bps{0.0, 1.0, 3.0};
    auto f = [](double x) { return x < 1.0 ? x : 1.0 + 0.5 * (x - 1.0); };
    const auto r = integrate_adaptive(f, bps, 1e-14);
    CHECK(r.value == doctest::Approx(0.5 + 2.0 + 1.0).epsilon(1e-15));
}

TEST_CASE("a narrow peak between coarse samples is not missed") {
    const std::vector<double> bps{0.0, 8.0};
    auto f = [](double x) { return std::exp(-200.0 * (x - 1.3) * (x - 1.3)); };
    const auto r = integrate_adaptive(f, bps, 1e-12);
    CHECK(r.value == doctest::Approx(std::sqrt(std::numbers::pi / 200.0)).epsilon(1e-10));
}

TEST_CASE("duplicate breakpoints and empty ranges") {
    const std::vector<double> bps{0.0, 0.0, 2.0, 2.0};
    CHECK(integrate_adaptive([](double) { return 1.0; }, bps, 1e-12).value ==
          doctest::Approx(2.0));
    const std::vector<double> single{1.0};
    CHECK(integrate_adaptive([](double) { return 1.0; }, single, 1e-12).value == 0.0);
}

TEST_CASE("reports non-convergence at the depth limit") {
    const std::vector<double> bps{0.0, 1.0};
    auto wild = [](double x) { return std::sin(1e7 * x); };
    const auto r = integrate_adaptive(wild, bps, 1e-300, 6);
    CHECK_FALSE(r.converged);
}
