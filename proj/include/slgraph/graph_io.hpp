#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "slgraph/graph_model.hpp"

namespace slg {

using json = nlohmann::json;

namespace detail {

inline double require_number(const json& j, const std::string& loc) {
    if (!j.is_number()) throw InputError(loc, "expected a number");
    return j.get<double>();
}

inline const json& require_field(const json& obj, const char* key, const std::string& loc) {
    if (!obj.is_object()) throw InputError(loc, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw InputError(loc, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& loc) {
    const json& v = require_field(obj, key, loc);
    if (!v.is_string()) throw InputError(loc + "." + key, "expected a string");
    return v.get<std::string>();
}

inline CoefficientForm parse_form(const json& j, double a, double b, const std::string& loc) {
    if (!j.is_object()) throw InputError(loc, "expected {\"poly\": [...]} or {\"named\": \"...\"}");
    CoefficientForm f;
    const bool has_poly = j.contains("poly"), has_named = j.contains("named");
    if (has_poly == has_named) throw InputError(loc, "exactly one of 'poly' or 'named' is required");
    if (has_poly) {
        const json& c = j.at("poly");
        if (!c.is_array() || c.empty()) throw InputError(loc + ".poly", "expected a non-empty array");
        for (std::size_t k = 0; k < c.size(); ++k)
            f.poly.push_back(require_number(c[k], loc + ".poly[" + std::to_string(k) + "]"));
        f.resolved = Polynomial(f.poly);
    } else {
        if (!j.at("named").is_string()) throw InputError(loc + ".named", "expected a string");
        f.named = j.at("named").get<std::string>();
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == "named") continue;
            f.params[it.key()] = require_number(it.value(), loc + "." + it.key());
        }
        f.resolved = resolve_named(f.named, f.params, a, b, loc + ".named");
    }
    return f;
}

inline json form_to_json(const CoefficientForm& f) {
    if (f.named.empty()) return json{{"poly", f.poly}};
    json j{{"named", f.named}};
    for (const auto& [k, v] : f.params) j[k] = v;
    return j;
}

inline unsigned parse_order(const json& j, const std::string& loc) {
    if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
        throw InputError(loc, "order must be an integer");
    const long long v = j.is_number_integer() ? j.get<long long>() : static_cast<long long>(j.get<double>());
    if (v < 0) throw InputError(loc, "negative order");
    if (v > 16) throw InputError(loc, "order too large (max 16)");
    return static_cast<unsigned>(v);
}

}  // namespace detail

/// Validate the cross-cutting invariants of an assembled graph; throws InputError.
inline void validate_graph(const MetricGraph& g) {
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
        const Edge& ed = g.edges()[e];
        const std::string loc = "edges[" + std::to_string(e) + "]";
        if (!(ed.p.b > ed.p.a)) throw InputError(loc + ".interval", "zero-length or reversed interval");
        constexpr int kSamples = 1000;
        for (int i = 0; i <= kSamples; ++i) {
            const double x = ed.p.a + ed.p.length() * i / kSamples;
            const double ph = ed.p.phi(x);
            if (!(ph > 0.0) || !std::isfinite(ph))
                throw InputError(loc + ".p.phi", "positive_part not positive at x=" + std::to_string(x));
            if (!std::isfinite(ed.q.value(x))) throw InputError(loc + ".q", "q not finite");
        }
    }
    for (std::size_t v = 0; v < g.vertices().size(); ++v) {
        const Vertex& vx = g.vertices()[v];
        for (const auto& r : vx.incidence) {
            const unsigned m = g.order(r);
            if (vx.kind == VertexKind::Regular && m != 0)
                throw InputError("vertices[" + std::to_string(v) + "]",
                                 "regular vertex '" + vx.id + "' has incident endpoint of order " +
                                     std::to_string(m) + " (edge " + g.edge(r.edge).id + ")");
            if (vx.kind == VertexKind::Singular && m == 0)
                throw InputError("vertices[" + std::to_string(v) + "]",
                                 "singular vertex '" + vx.id + "' has incident endpoint of order 0 (edge " +
                                     g.edge(r.edge).id + ")");
        }
    }
}

/// Parse a graph-description document into a fully linked, validated MetricGraph.
inline MetricGraph build_graph(const json& doc) {
    using namespace detail;
    if (!doc.is_object()) throw InputError("$", "document must be an object");
    const json& jv = require_field(doc, "vertices", "$");
    const json& je = require_field(doc, "edges", "$");
    if (!jv.is_array()) throw InputError("vertices", "expected an array");
    if (!je.is_array()) throw InputError("edges", "expected an array");

    std::vector<Vertex> vertices;
    std::map<std::string, std::size_t> vindex;
    for (std::size_t i = 0; i < jv.size(); ++i) {
        const std::string loc = "vertices[" + std::to_string(i) + "]";
        Vertex v;
        v.id = require_string(jv[i], "id", loc);
        const std::string kind = require_string(jv[i], "kind", loc);
        if (kind == "regular") v.kind = VertexKind::Regular;
        else if (kind == "singular") v.kind = VertexKind::Singular;
        else throw InputError(loc + ".kind", "expected 'regular' or 'singular', got '" + kind + "'");
        if (!vindex.emplace(v.id, i).second) throw InputError(loc + ".id", "duplicate vertex id '" + v.id + "'");
        vertices.push_back(std::move(v));
    }

    std::vector<Edge> edges;
    std::map<std::string, std::size_t> eindex;
    for (std::size_t i = 0; i < je.size(); ++i) {
        const std::string loc = "edges[" + std::to_string(i) + "]";
        const json& j = je[i];
        Edge e;
        e.id = require_string(j, "id", loc);
        if (!eindex.emplace(e.id, i).second) throw InputError(loc + ".id", "duplicate edge id '" + e.id + "'");
        const json& iv = require_field(j, "interval", loc);
        if (!iv.is_array() || iv.size() != 2) throw InputError(loc + ".interval", "expected [a, b]");
        e.p.a = require_number(iv[0], loc + ".interval[0]");
        e.p.b = require_number(iv[1], loc + ".interval[1]");
        if (!(e.p.b > e.p.a)) throw InputError(loc + ".interval", "zero-length or reversed interval");
        const json& jp = require_field(j, "p", loc);
        e.p.left_order = parse_order(require_field(jp, "left_order", loc + ".p"), loc + ".p.left_order");
        e.p.right_order = parse_order(require_field(jp, "right_order", loc + ".p"), loc + ".p.right_order");
        e.p.phi = parse_form(require_field(jp, "phi", loc + ".p"), e.p.a, e.p.b, loc + ".p.phi");
        e.q.form = parse_form(require_field(j, "q", loc), e.p.a, e.p.b, loc + ".q");
        for (const char* key : {"from", "to"}) {
            const std::string vid = require_string(j, key, loc);
            auto it = vindex.find(vid);
            if (it == vindex.end())
                throw InputError(loc + "." + key, "dangling vertex reference '" + vid + "'");
            (std::string(key) == "from" ? e.from : e.to) = it->second;
        }
        edges.push_back(std::move(e));
    }
    MetricGraph g(std::move(vertices), std::move(edges));
    validate_graph(g);
    return g;
}

inline MetricGraph build_graph_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& ex) {
        throw InputError("$", std::string("malformed JSON: ") + ex.what());
    }
    return build_graph(doc);
}

inline MetricGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path, "cannot open graph description");
    std::stringstream ss;
    ss << in.rdbuf();
    return build_graph_from_text(ss.str());
}

inline json serialize(const MetricGraph& g) {
    json jv = json::array(), je = json::array();
    for (const auto& v : g.vertices())
        jv.push_back({{"id", v.id}, {"kind", v.kind == VertexKind::Regular ? "regular" : "singular"}});
    for (const auto& e : g.edges()) {
        je.push_back({{"id", e.id},
                      {"interval", {e.p.a, e.p.b}},
                      {"p",
                       {{"left_order", e.p.left_order},
                        {"right_order", e.p.right_order},
                        {"phi", detail::form_to_json(e.p.phi)}}},
                      {"q", detail::form_to_json(e.q.form)},
                      {"from", g.vertex(e.from).id},
                      {"to", g.vertex(e.to).id}});
    }
    return json{{"vertices", jv}, {"edges", je}};
}

}  // namespace slg
