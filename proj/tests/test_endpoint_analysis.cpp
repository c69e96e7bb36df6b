#include <catch_amalgamated.hpp>

#include <random>

#include "slgraph/endpoint_analysis.hpp"
#include "support.hpp"

using namespace slg;

TEST_CASE("classification follows the vanishing order") {
    const Edge free = slgtest::free_edge().edge(0);
    CHECK(classify_endpoint(free, Side::Left).kind == EndpointKind::Regular);
    CHECK(classify_endpoint(free, Side::Right).kind == EndpointKind::Regular);
    const Edge leg = slgtest::legendre_edge().edge(0);
    CHECK(classify_endpoint(leg, Side::Left).kind == EndpointKind::LimitCircle);
    CHECK(classify_endpoint(leg, Side::Right).kind == EndpointKind::LimitCircle);
    const Edge sq = slgtest::single_edge(0, 1, 0, 2).edge(0);
    CHECK(classify_endpoint(sq, Side::Right).kind == EndpointKind::LimitPoint);
    CHECK(classify_endpoint(sq, Side::Right).order == 2);
    for (unsigned m = 0; m < 8; ++m) {
        const Edge e = slgtest::single_edge(0, 1, m, 0).edge(0);
        const auto c = classify_endpoint(e, Side::Left);
        CHECK(c.order == m);
        CHECK((c.kind == EndpointKind::Regular) == (m == 0));
        CHECK((c.kind == EndpointKind::LimitCircle) == (m == 1));
        CHECK((c.kind == EndpointKind::LimitPoint) == (m >= 2));
    }
}

TEST_CASE("deficiency indices") {
    CHECK(deficiency_index(slgtest::free_edge().edge(0)) == 2);
    CHECK(deficiency_index(slgtest::bessel_edge().edge(0)) == 2);
    CHECK(deficiency_index(slgtest::single_edge(0, 1, 2, 2).edge(0)) == 0);
    CHECK(deficiency_index(slgtest::single_edge(0, 1, 1, 3).edge(0)) == 1);

    const auto cycle = graph_deficiency(slgtest::legendre_cycle(4));
    CHECK(cycle.total == 8);
    CHECK_FALSE(cycle.essentially_selfadjoint);

    const auto lp = graph_deficiency(load_graph(SLG_DATA_DIR "/all-lp.json"));
    CHECK(lp.total == 0);
    CHECK(lp.essentially_selfadjoint);
    CHECK(lp.non_lp_endpoints.empty());

    const auto star = graph_deficiency(slgtest::free_star({1.0, 1.0, 1.0}));
    CHECK(star.total == 6);

    const auto j = to_json(cycle);
    CHECK(j["totals"]["N"] == 8);
    CHECK(j["edges"].size() == 4);
    CHECK(j["edges"][0]["left_class"] == "LC");
}

TEST_CASE("deficiency total equals the number of non-LP endpoints on random graphs") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const MetricGraph g = slgtest::random_graph(rng, 1 + trial % 6);
        const auto r = graph_deficiency(g);
        int count = 0;
        for (const auto& e : g.edges())
            for (Side s : {Side::Left, Side::Right}) count += e.p.order(s) < 2;
        CHECK(r.total == count);
        CHECK(static_cast<int>(r.non_lp_endpoints.size()) == count);
        CHECK(r.essentially_selfadjoint == (count == 0));
    }
}

TEST_CASE("L2 test on the reference edges") {
    const Edge free = slgtest::free_edge().edge(0);
    CHECK(l2_solution_test(free, Side::Left).verdict == L2Verdict::AllL2);
    CHECK(l2_solution_test(free, Side::Right).verdict == L2Verdict::AllL2);
    const Edge leg = slgtest::legendre_edge().edge(0);
    CHECK(l2_solution_test(leg, Side::Left).verdict == L2Verdict::AllL2);
    CHECK(l2_solution_test(leg, Side::Right).verdict == L2Verdict::AllL2);

    // p = (1-x)^2, q = 0 at lambda = 0: indicial roots 0 and -1, so |u|^2 ~ d^-2.
    const Edge sq = slgtest::single_edge(0, 1, 0, 2).edge(0);
    const auto r = l2_solution_test(sq, Side::Right);
    CHECK(r.verdict == L2Verdict::NotAllL2);
    CHECK(r.amplitude_exponent == Catch::Approx(-1.0).margin(0.05));
}

TEST_CASE("L2 test agrees with the classification on random edges") {
    std::mt19937_64 rng(99);
    int disagreements = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const unsigned ma = trial % 4, mb = (trial * 7 + 1) % 4;
        const Edge e = slgtest::random_edge(rng, ma, mb).edge(0);
        const double lambda = std::min(e.q.value(e.p.a), e.q.value(e.p.b)) - 1.0;
        for (Side s : {Side::Left, Side::Right}) {
            const bool lp = classify_endpoint(e, s).kind == EndpointKind::LimitPoint;
            const bool all_l2 = l2_solution_test(e, s, lambda).verdict == L2Verdict::AllL2;
            if (lp == all_l2) ++disagreements;
        }
    }
    CHECK(disagreements == 0);
}

TEST_CASE("domain quotient dimensions") {
    const auto cyc = domain_quotient_dims(slgtest::legendre_cycle(4));
    CHECK(cyc.max_over_max == 4);
    CHECK(cyc.max_over_min == 8);

    const auto free = domain_quotient_dims(slgtest::free_edge());
    CHECK(free.max_over_max == 0);
    CHECK(free.max_over_min == 0);

    using slgtest::json;
    json doc{{"vertices",
              {slgtest::vertex_doc("a", true), slgtest::vertex_doc("m", true), slgtest::vertex_doc("b", true)}},
             {"edges",
              {slgtest::edge_doc("leg", -1, 1, 1, 1, {1.0}, {0.0}, "a", "m"),
               slgtest::edge_doc("lp", 0, 1, 2, 2, {1.0}, {0.0}, "m", "b")}}};
    const auto chain = domain_quotient_dims(build_graph(doc));
    CHECK(chain.n_p == 1);
    CHECK(chain.n_c == 0);
    CHECK(chain.n_b == 1);
    CHECK(chain.max_over_max == 1);
    CHECK(chain.max_over_min == 2);

    CHECK_THROWS_AS(domain_quotient_dims(slgtest::free_star({1, 1, 1})), InputError);
}
