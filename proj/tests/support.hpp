#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "slgraph/graph_io.hpp"

namespace slgtest {

using nlohmann::json;

inline json edge_doc(const std::string& id, double a, double b, unsigned ma, unsigned mb,
                     const std::vector<double>& phi, const std::vector<double>& q, const std::string& from,
                     const std::string& to) {
    return {{"id", id},
            {"interval", {a, b}},
            {"p", {{"left_order", ma}, {"right_order", mb}, {"phi", {{"poly", phi}}}}},
            {"q", {{"poly", q}}},
            {"from", from},
            {"to", to}};
}

inline json vertex_doc(const std::string& id, bool singular) {
    return {{"id", id}, {"kind", singular ? "singular" : "regular"}};
}

inline slg::MetricGraph single_edge(double a, double b, unsigned ma, unsigned mb, std::vector<double> phi = {1.0},
                                    std::vector<double> q = {0.0}) {
    json doc{{"vertices", {vertex_doc("va", ma > 0), vertex_doc("vb", mb > 0)}},
             {"edges", {edge_doc("e", a, b, ma, mb, phi, q, "va", "vb")}}};
    return slg::build_graph(doc);
}

inline slg::MetricGraph free_edge(double L = 1.0) { return single_edge(0.0, L, 0, 0); }
inline slg::MetricGraph legendre_edge(double L = 2.0) { return single_edge(-L / 2, L / 2, 1, 1); }
inline slg::MetricGraph bessel_edge(double L = 1.0) { return single_edge(0.0, L, 1, 0); }

/// Cycle of n Legendre edges [-1,1] joined at singular vertices.
inline slg::MetricGraph legendre_cycle(int n) {
    json vs = json::array(), es = json::array();
    for (int i = 0; i < n; ++i) vs.push_back(vertex_doc("v" + std::to_string(i), true));
    for (int i = 0; i < n; ++i)
        es.push_back(edge_doc("e" + std::to_string(i), -1, 1, 1, 1, {1.0}, {0.0}, "v" + std::to_string(i),
                              "v" + std::to_string((i + 1) % n)));
    return slg::build_graph(json{{"vertices", vs}, {"edges", es}});
}

/// Star of free edges of the given lengths, hub at the left end of each.
inline slg::MetricGraph free_star(const std::vector<double>& lengths) {
    json vs = json::array({vertex_doc("hub", false)}), es = json::array();
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        vs.push_back(vertex_doc("t" + std::to_string(i), false));
        es.push_back(edge_doc("e" + std::to_string(i), 0, lengths[i], 0, 0, {1.0}, {0.0}, "hub",
                              "t" + std::to_string(i)));
    }
    return slg::build_graph(json{{"vertices", vs}, {"edges", es}});
}

/// Random polynomial strictly positive on [a,b]: c + small perturbation.
inline std::vector<double> random_positive_phi(std::mt19937_64& rng, double a, double b) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    // phi(x) = c0 + c1 t + c2 t^2 with t = (x-mid)/half in [-1,1], |c1|+|c2| <= 0.6 c0.
    const double c0 = 1.0 + 0.5 * (u(rng) + 1.0);
    const double c1 = 0.3 * c0 * u(rng), c2 = 0.3 * c0 * u(rng);
    // expand in x
    const double s = 1.0 / half;
    return {c0 - c1 * mid * s + c2 * mid * mid * s * s, c1 * s - 2 * c2 * mid * s * s, c2 * s * s};
}

inline std::vector<double> random_q(std::mt19937_64& rng, double a, double b) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double mid = 0.5 * (a + b), s = 2.0 / (b - a);
    const double c0 = 2.0 * u(rng), c1 = u(rng);
    return {c0 - c1 * mid * s, c1 * s};
}

/// Random edge with the given orders on a random interval.
inline slg::MetricGraph random_edge(std::mt19937_64& rng, unsigned ma, unsigned mb) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double a = -1.0 + u(rng), b = a + 0.5 + 1.5 * u(rng);
    return single_edge(a, b, ma, mb, random_positive_phi(rng, a, b), random_q(rng, a, b));
}

/// Random connected graph: a random tree of `n_edges` edges plus optional extra edges.
/// Each vertex gets a random kind; endpoint orders follow the kind (regular: 0, singular: 1..3).
inline slg::MetricGraph random_graph(std::mt19937_64& rng, int n_edges, int max_order = 3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n_vertices = n_edges + 1;
    std::vector<bool> singular(n_vertices);
    for (int v = 0; v < n_vertices; ++v) singular[v] = u(rng) < 0.5;
    json vs = json::array(), es = json::array();
    for (int v = 0; v < n_vertices; ++v) vs.push_back(vertex_doc("v" + std::to_string(v), singular[v]));
    auto pick_order = [&](int v) -> unsigned {
        if (!singular[v]) return 0;
        return 1 + static_cast<unsigned>(u(rng) * max_order) % max_order;
    };
    for (int e = 0; e < n_edges; ++e) {
        const int from = static_cast<int>(u(rng) * (e + 1)) % (e + 1), to = e + 1;
        const double a = -0.5 * u(rng), b = a + 0.5 + u(rng);
        es.push_back(edge_doc("e" + std::to_string(e), a, b, pick_order(from), pick_order(to),
                              random_positive_phi(rng, a, b), random_q(rng, a, b), "v" + std::to_string(from),
                              "v" + std::to_string(to)));
    }
    return slg::build_graph(json{{"vertices", vs}, {"edges", es}});
}

}  // namespace slgtest
