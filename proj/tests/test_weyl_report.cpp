#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "slgraph/weyl_report.hpp"
#include "support.hpp"

using Catch::Approx;
using namespace slg;

namespace {
const double pi = std::numbers::pi;

Spectrum synthetic(const std::vector<double>& values, double lambda_max) {
    Spectrum s;
    s.lambda_max = lambda_max;
    s.lower_bound = std::min(0.0, values.empty() ? 0.0 : values.front()) - 1.0;
    for (double v : values) {
        EigenEntry e;
        e.lambda = v;
        e.multiplicity = 1;
        e.half_width = 1e-8 * std::max(1.0, std::abs(v));
        s.eigenvalues.push_back(e);
    }
    return s;
}
}  // namespace

TEST_CASE("edge classes and constants") {
    for (double L : {0.5, 2.0, 6.0}) {
        const auto leg = weyl_constants(slgtest::legendre_edge(L));
        CHECK(leg.edges[0].cls == EdgeClass::LC);
        CHECK(leg.c_der == Approx(1.0).epsilon(1e-9));
        CHECK(leg.c_class == 1.0);

        const auto fr = weyl_constants(slgtest::free_edge(L));
        CHECK(fr.edges[0].cls == EdgeClass::R);
        CHECK(fr.c_der == Approx(L / pi).epsilon(1e-10));
        CHECK(fr.c_class == Approx(std::sqrt(L / pi)).epsilon(1e-14));

        const auto be = weyl_constants(slgtest::bessel_edge(L));
        CHECK(be.edges[0].cls == EdgeClass::RLC);
        CHECK(be.c_der == Approx(2 * std::sqrt(L) / pi).epsilon(1e-9));
        CHECK(be.c_class == Approx(std::sqrt(2.0) * std::pow(L, 0.25) / std::sqrt(pi)).epsilon(1e-14));
    }
    const auto lp = weyl_constants(load_graph(std::string(SLG_DATA_DIR) + "/all-lp.json"));
    CHECK(lp.edges[0].cls == EdgeClass::LP);
    CHECK_FALSE(lp.c_der_finite);
    CHECK(std::isinf(lp.c_der));
    CHECK(to_json(lp)["c_der"] == "infinity");

    const auto star = weyl_constants(load_graph(std::string(SLG_DATA_DIR) + "/legendre-3star.json"));
    CHECK(star.c_der == Approx(3.0).epsilon(1e-9));
    CHECK(star.c_class == 3.0);
}

TEST_CASE("C_der is additive and matches an independent quadrature") {
    std::mt19937_64 rng(8);
    boost::math::quadrature::tanh_sinh<double> ts;
    for (int t = 0; t < 20; ++t) {
        const unsigned ma = t % 2, mb = (t / 2) % 2;
        const auto g = slgtest::random_edge(rng, ma, mb);
        const Edge& e = g.edge(0);
        const double ref = ts.integrate([&](double x) { return 1.0 / std::sqrt(e.p.value(x)); }, e.p.a, e.p.b) / pi;
        CHECK(weyl_constants(g).c_der == Approx(ref).epsilon(1e-8));
    }
    // p = c (x-a)(b-x) gives 1/sqrt(c) for every interval
    for (double c : {0.25, 1.0, 3.0}) {
        const auto g = slgtest::single_edge(-0.3, 1.7, 1, 1, {c});
        CHECK(weyl_constants(g).c_der == Approx(1.0 / std::sqrt(c)).epsilon(1e-9));
    }
    const auto mixed = load_graph(std::string(SLG_DATA_DIR) + "/mixed.json");
    const auto w = weyl_constants(mixed);
    CHECK(w.c_der == Approx(1.0 / pi + 1.0).epsilon(1e-9));
    CHECK(w.c_der == Approx(w.edges[0].c_der + w.edges[1].c_der).epsilon(1e-15));
}

TEST_CASE("slope fit on exact staircases") {
    // lambda_n = (n pi)^2 up to 10^4
    std::vector<double> v;
    for (int n = 1; n * pi <= 100.0; ++n) v.push_back(n * n * pi * pi);
    auto f = empirical_slope(synthetic(v, 1e4));
    CHECK(f.slope == Approx(1.0 / pi).epsilon(0.02));
    CHECK(f.window_lo == 1e3);
    v.clear();
    for (int n = 0; n * (n + 1.0) <= 1e4; ++n) v.push_back(n * (n + 1.0));
    CHECK(empirical_slope(synthetic(v, 1e4)).slope == Approx(1.0).epsilon(0.02));
    v.clear();
    for (double z : oracle::j0_zeros(80))
        if (z * z / 4 <= 1e4) v.push_back(z * z / 4);
    CHECK(empirical_slope(synthetic(v, 1e4)).slope == Approx(2.0 / pi).epsilon(0.02));
    CHECK_THROWS_AS(empirical_slope(synthetic({1, 2, 3}, 4)), InputError);
}

TEST_CASE("verdict flags the class constant for regular edges") {
    const auto g = slgtest::free_edge();
    const auto s = eigenvalues(g, build_friedrichs(g), 5000.0);
    const auto v = weyl_verdict(g, s);
    CHECK(std::abs(v.deviation_der) <= 0.02);
    CHECK(v.class_constant_disagrees);
    CHECK(v.class_vs_der == Approx((std::sqrt(1 / pi) - 1 / pi) / (1 / pi)).epsilon(1e-10));
    CHECK(std::abs(v.deviation_class) > 0.3);
    // at L = pi both constants coincide
    const auto gp = slgtest::free_edge(pi);
    CHECK_FALSE(weyl_verdict(gp, eigenvalues(gp, build_friedrichs(gp), 5000.0)).class_constant_disagrees);

    const auto leg = slgtest::legendre_edge();
    const auto vl = weyl_verdict(leg, eigenvalues(leg, build_friedrichs(leg), 2500.0));
    CHECK_FALSE(vl.class_constant_disagrees);
    CHECK(vl.fit.slope == Approx(1.0).epsilon(0.02));
    const auto j = to_json(vl);
    CHECK(j.contains("c_emp"));
    CHECK(j["constants"]["edges"][0]["class"] == "LC");
}

TEST_CASE("interlacing") {
    SECTION("free edge Dirichlet against Neumann") {
        const auto g = slgtest::free_edge();
        const auto D = eigenvalues(g, build_friedrichs(g), 900.0);
        const auto N = eigenvalues(g, build_neumann_kirchhoff(g), 900.0);
        const auto r = interlacing_check(N, D, graph_deficiency(g).total);
        CHECK(r.deficiency == 2);
        CHECK(r.holds);
        CHECK(r.worst_gap == 1);
        // the nonzero eigenvalues coincide, so the grid sits between consecutive (n pi)^2
        REQUIRE(r.rows.size() >= 9);
        for (const auto& row : r.rows)
            if (row.lambda > 0.0) CHECK(row.gap == 1);
        CHECK(weyl_csv(r, weyl_constants(g)).rfind("lambda,N_P,N_F,C_der_sqrt_lambda,C_class_sqrt_lambda\n", 0) == 0);
    }
    SECTION("Legendre edge, flux-coupled and delta") {
        const auto g = slgtest::legendre_edge();
        const auto F = eigenvalues(g, build_friedrichs(g), 400.0);
        for (const auto& bc : {build_neumann_kirchhoff(g), build_delta(g, 3.0), build_delta(g, -3.0)}) {
            const auto P = eigenvalues(g, bc, 400.0);
            const auto r = interlacing_check(P, F, 2);
            CHECK(r.holds);
            CHECK(r.worst_gap <= 2);
        }
    }
    SECTION("essentially self-adjoint graph") {
        const auto g = load_graph(std::string(SLG_DATA_DIR) + "/all-lp.json");
        const auto F = eigenvalues(g, build_friedrichs(g), 1.2);
        const auto K = eigenvalues(g, build_neumann_kirchhoff(g), 1.2);
        const auto r = interlacing_check(K, F, graph_deficiency(g).total);
        CHECK(r.deficiency == 0);
        CHECK(r.holds);
        CHECK(r.worst_gap == 0);
    }
    SECTION("random graphs and extensions") {
        std::mt19937_64 rng(99);
        for (int t = 0; t < 6; ++t) {
            const auto g = slgtest::random_graph(rng, 1 + t % 3, 1);
            const int d = graph_deficiency(g).total;
            const double lam = potential_lower_bound(g) + 150.0;
            const auto F = eigenvalues(g, build_friedrichs(g), lam);
            for (const auto& bc : {build_neumann_kirchhoff(g), build_delta(g, -5.0), build_delta(g, 10.0)}) {
                const auto r = interlacing_check(eigenvalues(g, bc, lam), F, d);
                INFO("graph " << t << " " << bc.provenance);
                CHECK(r.holds);
            }
        }
    }
}

TEST_CASE("slope does not depend on the metric of a Legendre star") {
    const auto g = load_graph(std::string(SLG_DATA_DIR) + "/legendre-3star.json");
    const auto a = empirical_slope(eigenvalues(g, build_friedrichs(g), 2500.0));
    const auto b = empirical_slope(eigenvalues(g, build_neumann_kirchhoff(g), 2500.0));
    CHECK(a.slope == Approx(3.0).epsilon(0.03));
    CHECK(std::abs(a.slope - b.slope) <= 2 * 2 / std::sqrt(2500.0) + a.error + b.error);

    std::ifstream in(std::string(SLG_DATA_DIR) + "/legendre-3star.json");
    auto doc = nlohmann::json::parse(in);
    for (auto& e : doc["edges"]) e["interval"] = {e["interval"][0].get<double>() * 1.7, e["interval"][1].get<double>() * 1.7};
    const auto h = build_graph(doc);
    const auto c = empirical_slope(eigenvalues(h, build_friedrichs(h), 2500.0));
    CHECK(std::abs(a.slope - c.slope) <= 3 * (a.error + c.error) + 0.01);
}
