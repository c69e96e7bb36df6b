#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "slgraph/secular.hpp"
#include "support.hpp"

using Catch::Approx;
using namespace slg;

namespace {

double count(const MetricGraph& g, const BoundaryConditionSet& bc, double lo, double hi, int expected) {
    const SecularCounter sc(g, bc);
    const auto c = sc.count(lo, hi);
    INFO("raw count " << c.raw);
    CHECK(std::abs(c.raw - expected) < 1e-6);
    CHECK(c.crossings == expected);
    return c.raw;
}

}  // namespace

TEST_CASE("Crossing counts for classical problems") {
    const double pi = std::numbers::pi;
    const auto fe = slgtest::free_edge();
    count(fe, build_friedrichs(fe), 0.0, 100.0, 3);
    count(fe, build_neumann_kirchhoff(fe), -1.0, 100.0, 4);
    const auto leg = slgtest::legendre_edge();
    count(leg, build_friedrichs(leg), -0.5, 30.5, 6);
    const auto bes = slgtest::bessel_edge();
    count(bes, build_friedrichs(bes), 0.0, 20.0, 3);
    const auto star = slgtest::free_star({1, 1, 1});
    count(star, build_neumann_kirchhoff(star), -1.0, 30.0, 6);
    (void)pi;
}

TEST_CASE("Root location") {
    const double pi = std::numbers::pi;
    const auto fe = slgtest::free_edge();
    const SecularCounter sc(fe, build_friedrichs(fe));
    for (int n = 1; n <= 4; ++n) {
        const double l = n * n * pi * pi;
        CHECK(sc.locate(l - 1.0, l + 1.5) == Approx(l).epsilon(1e-10));
    }
    const auto leg = slgtest::legendre_edge();
    const SecularCounter sl(leg, build_friedrichs(leg));
    for (int n = 0; n <= 5; ++n) CHECK(sl.locate(n * (n + 1) - 0.5, n * (n + 1) + 0.7) == Approx(n * (n + 1)).margin(1e-10));
    CHECK(std::abs(secular_det(fe, build_friedrichs(fe), pi * pi)) < 1e-10);
    CHECK(std::abs(secular_det(fe, build_friedrichs(fe), 5.0)) > 1e-3);
}
