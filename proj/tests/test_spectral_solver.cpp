#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "slgraph/spectral_solver.hpp"
#include "support.hpp"

using Catch::Approx;
using namespace slg;

namespace {

const double pi = std::numbers::pi;

std::vector<double> expanded(const Spectrum& s) {
    std::vector<double> v;
    for (const auto& e : s.eigenvalues)
        for (int k = 0; k < e.multiplicity; ++k) v.push_back(e.lambda);
    return v;
}

}  // namespace

TEST_CASE("J0 zero oracle agrees with the library routine") {
    const auto z = oracle::j0_zeros(12);
    REQUIRE(z.size() == 12);
    for (int n = 1; n <= 12; ++n) CHECK(z[n - 1] == Approx(boost::math::cyl_bessel_j_zero(0.0, n)).epsilon(1e-13));
    CHECK(z[0] == Approx(2.404825557695773).epsilon(1e-14));
}

TEST_CASE("Dirichlet free edge") {
    const auto g = slgtest::free_edge();
    const auto s = eigenvalues(g, build_friedrichs(g), 4000.0);
    CHECK(s.consistent);
    const auto v = expanded(s);
    REQUIRE(v.size() >= 20);
    for (int n = 1; n <= 20; ++n) CHECK(v[n - 1] == Approx(n * n * pi * pi).epsilon(1e-6));
    CHECK(counting_function(s, pi * pi - 1) == 0);
    CHECK(counting_function(s, pi * pi + 1) == 1);
    CHECK_THROWS_AS(counting_function(s, 4001.0), InputError);
    for (const auto& e : s.eigenvalues) {
        CHECK(e.confirmed);
        CHECK(e.residual <= 1e-6);
    }
}

TEST_CASE("Legendre edge, Friedrichs, two lengths") {
    for (double L : {2.0, 3.5}) {
        const auto g = slgtest::legendre_edge(L);
        const auto s = eigenvalues(g, build_friedrichs(g), 120.0);
        CHECK(s.consistent);
        const auto v = expanded(s);
        REQUIRE(v.size() >= 10);
        for (int n = 0; n < 10; ++n) CHECK(std::abs(v[n] - n * (n + 1.0)) <= 1e-5);
        CHECK(counting_function(s, 7.0) == 3);
    }
}

TEST_CASE("Bessel edge, Friedrichs") {
    const auto g = slgtest::bessel_edge(1.0);
    const auto z = oracle::j0_zeros(10);
    const auto s = eigenvalues(g, build_friedrichs(g), 250.0);
    CHECK(s.consistent);
    const auto v = expanded(s);
    REQUIRE(v.size() >= 10);
    for (int n = 0; n < 10; ++n) CHECK(v[n] == Approx(z[n] * z[n] / 4).epsilon(1e-5));
    CHECK(counting_function(s, 10.0) == 2);
}

TEST_CASE("Kirchhoff vertex of degree two disappears") {
    const auto g = load_graph(std::string(SLG_DATA_DIR) + "/split-free-edge.json");
    const auto bc = build_mixed(g, {{"m", {VertexRule::Kirchhoff, 0.0}}}, {VertexRule::Dirichlet, 0.0});
    const auto s = eigenvalues(g, bc, 2300.0);
    CHECK(s.consistent);
    const auto v = expanded(s);
    REQUIRE(v.size() >= 15);
    for (int n = 1; n <= 15; ++n) CHECK(v[n - 1] == Approx(n * n * pi * pi).epsilon(1e-6));
}

TEST_CASE("Two unit edges glued: symmetric and antisymmetric modes") {
    const auto g = slgtest::free_star({1.0, 1.0});
    const auto bc = build_mixed(g, {{"hub", {VertexRule::Kirchhoff, 0.0}}}, {VertexRule::Dirichlet, 0.0});
    const auto s = eigenvalues(g, bc, 400.0);
    CHECK(s.consistent);
    const auto v = expanded(s);
    // merged interval of length 2: (n pi / 2)^2; odd n are even about the vertex, even n odd
    REQUIRE(v.size() == 12);
    for (int n = 1; n <= 12; ++n) CHECK(v[n - 1] == Approx(n * n * pi * pi / 4).epsilon(1e-7));
}

TEST_CASE("Delta interaction on an equilateral star") {
    const double alpha = 2.0;
    const auto g = slgtest::free_star({1.0, 1.0, 1.0});
    const auto bc = build_mixed(g, {{"hub", {VertexRule::Delta, alpha}}}, {VertexRule::Kirchhoff, 0.0});
    const auto s = eigenvalues(g, bc, 150.0);
    CHECK(s.consistent);
    // symmetric modes cos(k(1-x)): 3 k tan k = -alpha; below zero 3 kappa tanh kappa = alpha
    std::vector<double> oracle_vals;
    for (double kap : oracle::scan_roots([&](long double x) { return 3 * x * std::tanh(x) - alpha; }, 1e-6, 10, 1e-3, 5))
        oracle_vals.push_back(-kap * kap);
    for (double k : oracle::scan_roots(
             [&](long double x) { return 3 * x * std::sin(x) + alpha * std::cos(x); }, 1e-6, std::sqrt(150.0), 1e-3, 20))
        oracle_vals.push_back(k * k);
    // antisymmetric modes cos k = 0, multiplicity two
    for (int n = 0; (n + 0.5) * pi < std::sqrt(150.0); ++n) {
        oracle_vals.push_back((n + 0.5) * (n + 0.5) * pi * pi);
        oracle_vals.push_back((n + 0.5) * (n + 0.5) * pi * pi);
    }
    std::sort(oracle_vals.begin(), oracle_vals.end());
    const auto v = expanded(s);
    REQUIRE(v.size() == oracle_vals.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == Approx(oracle_vals[i]).epsilon(1e-7).margin(1e-8));
    int doubles = 0;
    for (const auto& e : s.eigenvalues) doubles += e.multiplicity == 2;
    CHECK(doubles == 4);
}

TEST_CASE("Observed convergence order") {
    SolverOptions opt;
    opt.kappa = 2.0;
    auto order = [&](const MetricGraph& g, const BoundaryConditionSet& bc, double exact, double lam_hi) {
        const auto be = detail::boundary_embedding(g, bc);
        const auto meshes = build_meshes(g, bc.layout, lam_hi, opt);
        double err[3];
        for (int l = 0; l < 3; ++l) {
            const auto lev = galerkin_level(g, bc, be, meshes, l, -1.0, lam_hi, 1e-13, 1);
            REQUIRE(!lev.values.empty());
            // largest eigenvalue in range is the least resolved
            err[l] = std::abs(lev.values.back() - exact);
        }
        INFO("errors " << err[0] << " " << err[1] << " " << err[2]);
        return std::log2(err[0] / err[1]);
    };
    const auto fe = slgtest::free_edge();
    CHECK(order(fe, build_friedrichs(fe), 25 * pi * pi, 250.0) >= 2.0);
    const auto be = slgtest::bessel_edge();
    const auto z = oracle::j0_zeros(6);
    CHECK(order(be, build_friedrichs(be), z[5] * z[5] / 4, 100.0) >= 2.0);
    const auto le = slgtest::legendre_edge();
    CHECK(order(le, build_friedrichs(le), 72.0, 80.0) >= 2.0);
}

TEST_CASE("Results do not depend on the worker count") {
    const auto g = load_graph(std::string(SLG_DATA_DIR) + "/legendre-3star.json");
    SolverOptions one, many;
    many.workers = 4;
    const auto bc = build_neumann_kirchhoff(g);
    const auto a = eigenvalues(g, bc, 150.0, one), b = eigenvalues(g, bc, 150.0, many);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("Galerkin and secular sets agree on random graphs") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    for (int t = 0; t < 12; ++t) {
        const auto g = slgtest::random_graph(rng, 1 + t % 3, 2);
        const double qmin = potential_lower_bound(g), ess = essential_threshold(g);
        double lam = qmin + 60.0;
        if (std::isfinite(ess)) {
            if (ess < qmin + 1.0) continue;
            lam = std::min(lam, ess - 0.05);
        }
        for (const auto& bc : {build_friedrichs(g), build_neumann_kirchhoff(g), build_delta(g, -1.5)}) {
            const auto s = eigenvalues(g, bc, lam);
            INFO("graph " << t << " " << bc.provenance << ": " << s.diagnostics);
            CHECK(s.consistent);
            CHECK(s.galerkin_total == s.secular_total);
            ++checked;
        }
    }
    CHECK(checked >= 15);
}

TEST_CASE("Solver input errors") {
    const auto g = slgtest::free_edge();
    CHECK_THROWS_AS(eigenvalues(g, build_friedrichs(g), -1.0), InputError);
    const auto lp = slgtest::single_edge(0, 1, 2, 2, {1.0}, {1.0});
    CHECK_THROWS_AS(eigenvalues(lp, build_friedrichs(lp), 2.0), InputError);
    const auto s = eigenvalues(lp, build_friedrichs(lp), 1.2);
    CHECK(s.consistent);
    SolverOptions bad;
    bad.refine = 0;
    CHECK_THROWS_AS(eigenvalues(g, build_friedrichs(g), 50.0, bad), InputError);
}

TEST_CASE("Staircase and JSON") {
    const auto g = slgtest::legendre_edge();
    const auto s = eigenvalues(g, build_friedrichs(g), 13.0);
    const auto csv = staircase_csv(s);
    CHECK(csv.rfind("lambda,N\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto j = to_json(s);
    CHECK(j["eigenvalues"].size() == 4);
    CHECK(j["metadata"]["consistent"] == true);
}
