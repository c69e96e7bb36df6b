#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slgraph/errors.hpp"
#include "slgraph/polynomial.hpp"

namespace slg {

enum class Side { Left, Right };

inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

/// One endpoint of one edge.
struct EndpointRef {
    std::size_t edge = 0;
    Side side = Side::Left;

    friend bool operator==(const EndpointRef&, const EndpointRef&) = default;
};

/// A coefficient function given either as raw power-basis coefficients in the
/// edge coordinate or as a named closed form with parameters. Every supported
/// named form is polynomial, so both resolve to a Polynomial.
struct CoefficientForm {
    std::string named;                       // empty for raw polynomials
    std::map<std::string, double> params;    // named-form parameters
    std::vector<double> poly;                // raw coefficients (when named is empty)
    Polynomial resolved;

    double operator()(double x) const { return resolved(x); }

    friend bool operator==(const CoefficientForm& a, const CoefficientForm& b) {
        return a.named == b.named && a.params == b.params && a.poly == b.poly;
    }
};

/// Names accepted in {"named": ...}: constant (param value, default 1), one, zero,
/// linear (params left, right: values at the interval ends), legendre-shifted
/// (unit multiplier; with orders 1/1 it gives p = (x-a)(b-x)).
inline Polynomial resolve_named(const std::string& name, const std::map<std::string, double>& params,
                                double a, double b, const std::string& location) {
    auto param = [&](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (name == "constant") return Polynomial::constant(param("value", 1.0));
    if (name == "one" || name == "legendre-shifted") return Polynomial::constant(1.0);
    if (name == "zero") return Polynomial::constant(0.0);
    if (name == "linear") {
        const double l = param("left", 1.0), r = param("right", 1.0);
        const double slope = (r - l) / (b - a);
        return Polynomial({l - slope * a, slope});
    }
    throw InputError(location, "unknown named form '" + name + "'");
}

/// Leading coefficient p(x) = (x-a)^{m_a} (b-x)^{m_b} phi(x) with phi > 0 on [a,b].
struct CoefficientP {
    double a = 0.0;
    double b = 1.0;
    unsigned left_order = 0;
    unsigned right_order = 0;
    CoefficientForm phi;

    double length() const noexcept { return b - a; }
    unsigned order(Side s) const noexcept { return s == Side::Left ? left_order : right_order; }

    double value(double x) const {
        return std::pow(x - a, left_order) * std::pow(b - x, right_order) * phi(x);
    }

    double derivative(double x) const {
        const double ph = phi(x);
        const double dph = phi.resolved.derivative()(x);
        const double l = std::pow(x - a, left_order), r = std::pow(b - x, right_order);
        double dl = left_order == 0 ? 0.0 : left_order * std::pow(x - a, left_order - 1);
        double dr = right_order == 0 ? 0.0 : -1.0 * right_order * std::pow(b - x, right_order - 1);
        return dl * r * ph + l * dr * ph + l * r * dph;
    }

    /// p expanded in the power basis of the edge coordinate.
    Polynomial expanded() const {
        return Polynomial({-a, 1.0}).pow(left_order) * Polynomial({b, -1.0}).pow(right_order) *
               phi.resolved;
    }

    /// psi with p = d^m psi(d), d the distance from the given endpoint.
    Polynomial regular_factor(Side s) const {
        const double L = length();
        if (s == Side::Left) {
            // x = a + d: (b-x) = L - d
            return Polynomial({L, -1.0}).pow(right_order) * phi.resolved.compose_affine(a, 1.0);
        }
        // x = b - d: (x-a) = L - d
        return Polynomial({L, -1.0}).pow(left_order) * phi.resolved.compose_affine(b, -1.0);
    }

    friend bool operator==(const CoefficientP&, const CoefficientP&) = default;
};

struct PotentialQ {
    CoefficientForm form;

    double value(double x) const { return form(x); }
    const Polynomial& poly() const noexcept { return form.resolved; }

    friend bool operator==(const PotentialQ&, const PotentialQ&) = default;
};

struct Edge {
    std::string id;
    CoefficientP p;
    PotentialQ q;
    std::size_t from = 0;  // vertex at the left endpoint a
    std::size_t to = 0;    // vertex at the right endpoint b

    std::size_t vertex(Side s) const noexcept { return s == Side::Left ? from : to; }
    double endpoint(Side s) const noexcept { return s == Side::Left ? p.a : p.b; }
    /// Orientation sign: -1 at the left endpoint, +1 at the right endpoint.
    static constexpr int epsilon(Side s) noexcept { return s == Side::Left ? -1 : 1; }

    friend bool operator==(const Edge&, const Edge&) = default;
};

enum class VertexKind { Regular, Singular };

struct Vertex {
    std::string id;
    VertexKind kind = VertexKind::Regular;
    std::vector<EndpointRef> incidence;

    friend bool operator==(const Vertex&, const Vertex&) = default;
};

/// Immutable after construction through build_graph / make_graph.
class MetricGraph {
public:
    MetricGraph() = default;
    MetricGraph(std::vector<Vertex> vertices, std::vector<Edge> edges)
        : vertices_(std::move(vertices)), edges_(std::move(edges)) {
        for (auto& v : vertices_) v.incidence.clear();
        for (std::size_t e = 0; e < edges_.size(); ++e) {
            vertices_.at(edges_[e].from).incidence.push_back({e, Side::Left});
            vertices_.at(edges_[e].to).incidence.push_back({e, Side::Right});
        }
    }

    const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Edge& edge(std::size_t i) const { return edges_.at(i); }
    const Vertex& vertex(std::size_t i) const { return vertices_.at(i); }

    std::optional<std::size_t> find_vertex(const std::string& id) const {
        for (std::size_t i = 0; i < vertices_.size(); ++i)
            if (vertices_[i].id == id) return i;
        return std::nullopt;
    }
    std::optional<std::size_t> find_edge(const std::string& id) const {
        for (std::size_t i = 0; i < edges_.size(); ++i)
            if (edges_[i].id == id) return i;
        return std::nullopt;
    }

    unsigned order(const EndpointRef& r) const { return edge(r.edge).p.order(r.side); }

    friend bool operator==(const MetricGraph&, const MetricGraph&) = default;

private:
    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
};

namespace detail {

inline void check_inside(const Edge& e, double x) {
    const double slack = 1e-14 * e.p.length();
    if (!(x >= e.p.a - slack && x <= e.p.b + slack))
        throw InputError("edge " + e.id, "x=" + std::to_string(x) + " outside [" +
                                             std::to_string(e.p.a) + ", " + std::to_string(e.p.b) + "]");
}

}  // namespace detail

inline double evaluate_p(const Edge& e, double x) {
    detail::check_inside(e, x);
    return e.p.value(x);
}

inline double evaluate_dp(const Edge& e, double x) {
    detail::check_inside(e, x);
    return e.p.derivative(x);
}

inline double evaluate_q(const Edge& e, double x) {
    detail::check_inside(e, x);
    return e.q.value(x);
}

/// Minimum of q over all edges, sampled densely (q is polynomial).
inline double potential_lower_bound(const MetricGraph& g) {
    double lo = INFINITY;
    for (const auto& e : g.edges()) {
        for (int i = 0; i <= 2000; ++i) {
            const double x = e.p.a + e.p.length() * i / 2000.0;
            lo = std::min(lo, e.q.value(x));
        }
    }
    return std::isfinite(lo) ? lo : 0.0;
}

}  // namespace slg
