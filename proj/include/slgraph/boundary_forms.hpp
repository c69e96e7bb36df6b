#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/frobenius.hpp"
#include "slgraph/graph_model.hpp"
#include "slgraph/numerics.hpp"

namespace slg {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Brackets and Green's formula
// ---------------------------------------------------------------------------

/// A test function on an edge with its first two derivatives.
struct TestFunction {
    std::function<cplx(double)> value;
    std::function<cplx(double)> d1;
    std::function<cplx(double)> d2;
};

/// [y, z](x) = y p conj(z') - conj(z) p y'.
inline cplx lagrange_bracket(const Edge& e, const TestFunction& y, const TestFunction& z, double x) {
    const double p = evaluate_p(e, x);
    return y.value(x) * p * std::conj(z.d1(x)) - std::conj(z.value(x)) * p * y.d1(x);
}

/// P y = -(p y')' + q y.
inline cplx apply_operator(const Edge& e, const TestFunction& y, double x) {
    return -evaluate_dp(e, x) * y.d1(x) - evaluate_p(e, x) * y.d2(x) + evaluate_q(e, x) * y.value(x);
}

/// |int_alpha^beta (conj(z) P y - y conj(P z)) - ([y,z](beta) - [y,z](alpha))|.
inline double green_residual(const Edge& e, const TestFunction& y, const TestFunction& z, double alpha,
                             double beta) {
    if (!(alpha > e.p.a && beta < e.p.b && alpha < beta))
        throw InputError("green_residual", "[alpha, beta] must be an interior subinterval");
    auto integrand = [&](double x) {
        return std::conj(z.value(x)) * apply_operator(e, y, x) - y.value(x) * std::conj(apply_operator(e, z, x));
    };
    const auto re = adaptive_integrate([&](double x) { return integrand(x).real(); }, alpha, beta);
    const auto im = adaptive_integrate([&](double x) { return integrand(x).imag(); }, alpha, beta);
    const cplx lhs(re.value, im.value);
    const cplx rhs = lagrange_bracket(e, y, z, beta) - lagrange_bracket(e, y, z, alpha);
    return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Boundary traces
// ---------------------------------------------------------------------------

struct BoundaryTrace {
    EndpointRef endpoint;
    cplx g;  // regularized value
    cplx f;  // flux lim p y'
    int epsilon = 0;
};

using TraceVector = std::vector<BoundaryTrace>;

struct TraceOptions {
    double first_distance = 0.0;  // 0: choose min(matching radius / 2, 1e-3 L)
    double tolerance = 1e-6;      // agreement of the extrapolants on shifted node sets
};

/// Generalized Richardson extrapolation to d -> 0 from samples at d0 2^-k, k = 0..7.
/// Seven nodes eliminate d log^2 d, d log d, d, d^2 log^2 d, d^2 log d, d^2, the terms
/// that appear at an LC endpoint; the fit is done in t = d / d0 for conditioning.
/// Returns the fit on nodes 0..6 and its distance to the fit on nodes 1..7.
inline std::pair<cplx, double> extrapolate_to_endpoint(const std::array<double, 8>& d,
                                                       const std::array<cplx, 8>& vals) {
    auto solve = [&](int first) {
        Eigen::MatrixXd A(7, 7);
        Eigen::VectorXcd b(7);
        for (int i = 0; i < 7; ++i) {
            const double t = d[first + i] / d[0], l = std::log(t);
            const double basis[7] = {1.0, t * l * l, t * l, t, t * t * l * l, t * t * l, t * t};
            for (int j = 0; j < 7; ++j) A(i, j) = basis[j];
            b(i) = vals[first + i];
        }
        const Eigen::VectorXcd c = A.cast<cplx>().fullPivLu().solve(b);
        return c(0);
    };
    const cplx coarse = solve(0), fine = solve(1);
    return {coarse, std::abs(coarse - fine)};
}

/// Traces of a solution sampled near the endpoint. `sample(d)` returns y and p y' at
/// distance d. Regular endpoints are read directly at d = 0.
inline BoundaryTrace boundary_trace(const Edge& e, std::size_t edge_index, Side side,
                                    const std::function<std::pair<cplx, cplx>(double)>& sample,
                                    TraceOptions opt = {}) {
    const auto cls = classify_endpoint(e, side);
    BoundaryTrace t;
    t.endpoint = {edge_index, side};
    t.epsilon = Edge::epsilon(side);
    if (cls.kind == EndpointKind::LimitPoint)
        throw InputError("edge " + e.id, "no trace at a limit-point endpoint");
    if (cls.kind == EndpointKind::Regular) {
        const auto [y, F] = sample(0.0);
        t.g = y;
        t.f = F;
        return t;
    }
    const ComparisonSolution v(e, side);
    const double d0 = opt.first_distance > 0.0 ? opt.first_distance
                                               : std::min(0.5 * v.matching_radius(), 1e-3 * e.p.length());
    std::array<double, 8> ds{};
    std::array<cplx, 8> fs{}, gs{};
    for (int k = 0; k < 8; ++k) {
        ds[k] = d0 * std::ldexp(1.0, -k);
        const auto [y, F] = sample(ds[k]);
        fs[k] = F;
        gs[k] = y - v.at_distance(ds[k]).y * F;
    }
    const auto [f, ef] = extrapolate_to_endpoint(ds, fs);
    const auto [g, eg] = extrapolate_to_endpoint(ds, gs);
    const double scale = std::max({1.0, std::abs(f), std::abs(g)});
    if (ef > opt.tolerance * scale || eg > opt.tolerance * scale)
        throw NumericalError("trace extrapolation did not converge at edge " + e.id + " " + to_string(side),
                             std::max(ef, eg));
    t.f = f;
    t.g = g;
    return t;
}

/// l(y, z) = sum over non-LP endpoints of eps (g_y conj(f_z) - f_y conj(g_z)).
inline cplx form_l(const TraceVector& y, const TraceVector& z) {
    if (y.size() != z.size()) throw InputError("form_l", "mismatched endpoint sets");
    cplx s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (!(y[k].endpoint == z[k].endpoint)) throw InputError("form_l", "mismatched endpoint sets");
        s += static_cast<double>(y[k].epsilon) * (y[k].g * std::conj(z[k].f) - y[k].f * std::conj(z[k].g));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Boundary condition sets
// ---------------------------------------------------------------------------

/// Column layout of the trace space: for the k-th non-LP endpoint, columns 2k (g) and 2k+1 (f).
struct TraceLayout {
    std::vector<EndpointRef> endpoints;
    std::vector<int> epsilon;
    std::vector<std::size_t> vertex;

    explicit TraceLayout(const MetricGraph& g) {
        endpoints = trace_endpoints(g);
        for (const auto& r : endpoints) {
            epsilon.push_back(Edge::epsilon(r.side));
            vertex.push_back(g.edge(r.edge).vertex(r.side));
        }
    }
    TraceLayout() = default;

    std::size_t size() const noexcept { return endpoints.size(); }
    std::optional<std::size_t> index_of(const EndpointRef& r) const {
        for (std::size_t k = 0; k < endpoints.size(); ++k)
            if (endpoints[k] == r) return k;
        return std::nullopt;
    }

    /// J with l(w_i, w_j) = c_i J c_j^T for functionals given as rows c.
    Eigen::MatrixXd symplectic() const {
        const std::size_t n = size();
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            J(2 * k, 2 * k + 1) = epsilon[k];
            J(2 * k + 1, 2 * k) = -epsilon[k];
        }
        return J;
    }
};

struct BoundaryConditionSet {
    std::string provenance;         // friedrichs, kirchhoff, delta:<alpha>, mixed, custom
    TraceLayout layout;
    Eigen::MatrixXd rows;           // d x 2d
    std::vector<long> row_vertex;   // vertex of each row, -1 if the row is not local

    bool is_local() const {
        for (long v : row_vertex)
            if (v < 0) return false;
        return true;
    }
};

struct GknReport {
    bool valid = false;
    int rank = 0;
    int expected = 0;
    double max_violation = 0.0;
    std::optional<std::pair<int, int>> offending;
    std::string diagnostics;
};

/// Rank (SVD, relative 1e-10) plus pairwise l-orthogonality of the row-normalized set.
inline GknReport gkn_validate(const BoundaryConditionSet& s, double tol = 1e-10) {
    GknReport r;
    const int d = static_cast<int>(s.layout.size());
    r.expected = d;
    if (s.rows.rows() != d || s.rows.cols() != 2 * d)
        throw InputError("boundary conditions", "expected " + std::to_string(d) + " rows over " +
                                                    std::to_string(2 * d) + " trace columns, got " +
                                                    std::to_string(s.rows.rows()) + "x" +
                                                    std::to_string(s.rows.cols()));
    if (d == 0) {
        r.valid = true;
        r.diagnostics = "no boundary conditions needed";
        return r;
    }
    Eigen::MatrixXd C = s.rows;
    for (int i = 0; i < d; ++i) {
        const double n = C.row(i).norm();
        if (n == 0.0) {
            r.diagnostics = "row " + std::to_string(i) + " is zero";
            r.offending = std::make_pair(i, i);
            return r;
        }
        C.row(i) /= n;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const auto& sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i) r.rank += sv(i) > tol * sv(0);
    const Eigen::MatrixXd G = C * s.layout.symplectic() * C.transpose();
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (std::abs(G(i, j)) > r.max_violation) {
                r.max_violation = std::abs(G(i, j));
                if (r.max_violation > tol) r.offending = std::make_pair(i, j);
            }
    if (r.rank < d) {
        r.diagnostics = "rank deficiency: rank " + std::to_string(r.rank) + " < " + std::to_string(d);
        // report the first row dependent on its predecessors
        for (int i = 1; i < d; ++i) {
            Eigen::JacobiSVD<Eigen::MatrixXd> part(C.topRows(i + 1));
            if (part.singularValues()(i) <= tol * part.singularValues()(0)) {
                for (int j = 0; j < i; ++j) {
                    Eigen::MatrixXd two(2, C.cols());
                    two << C.row(j), C.row(i);
                    Eigen::JacobiSVD<Eigen::MatrixXd> pair(two);
                    if (pair.singularValues()(1) <= tol * pair.singularValues()(0)) {
                        r.offending = std::make_pair(j, i);
                        break;
                    }
                }
                if (!r.offending) r.offending = std::make_pair(i, i);
                break;
            }
        }
        return r;
    }
    if (r.max_violation > tol) {
        r.diagnostics = "l(beta_" + std::to_string(r.offending->first) + ", beta_" +
                        std::to_string(r.offending->second) + ") = " + std::to_string(r.max_violation);
        return r;
    }
    r.valid = true;
    r.diagnostics = "ok";
    return r;
}

// --- builders ---------------------------------------------------------------

enum class VertexRule { Dirichlet, Neumann, Kirchhoff, Delta };

struct VertexCondition {
    VertexRule rule = VertexRule::Kirchhoff;
    double alpha = 0.0;
};

namespace detail {

inline std::vector<std::size_t> local_trace_indices(const MetricGraph& g, const TraceLayout& layout,
                                                    std::size_t v) {
    std::vector<std::size_t> out;
    for (const auto& r : g.vertex(v).incidence)
        if (auto k = layout.index_of(r)) out.push_back(*k);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline void add_vertex_rows(const MetricGraph& g, const TraceLayout& layout, std::size_t v,
                            const VertexCondition& c, std::vector<Eigen::RowVectorXd>& rows,
                            std::vector<long>& where) {
    const auto idx = local_trace_indices(g, layout, v);
    if (idx.empty()) return;
    const std::size_t n = 2 * layout.size();
    auto row = [&] { return Eigen::RowVectorXd::Zero(n).eval(); };
    const bool singular = g.vertex(v).kind == VertexKind::Singular;
    switch (c.rule) {
        case VertexRule::Dirichlet:
        case VertexRule::Neumann: {
            // Dirichlet: the Friedrichs choice (g = 0 at regular, f = 0 at LC endpoints);
            // Neumann: the complementary one.
            const bool value_row = (c.rule == VertexRule::Dirichlet) != singular;
            for (std::size_t k : idx) {
                auto r = row();
                r(2 * k + (value_row ? 0 : 1)) = 1.0;
                rows.push_back(r);
                where.push_back(static_cast<long>(v));
            }
            break;
        }
        case VertexRule::Kirchhoff:
        case VertexRule::Delta: {
            for (std::size_t i = 1; i < idx.size(); ++i) {
                auto r = row();
                r(2 * idx[0]) = 1.0;
                r(2 * idx[i]) = -1.0;
                rows.push_back(r);
                where.push_back(static_cast<long>(v));
            }
            auto r = row();
            for (std::size_t k : idx) r(2 * k + 1) = layout.epsilon[k];
            if (c.rule == VertexRule::Delta) r(2 * idx[0]) -= c.alpha;
            rows.push_back(r);
            where.push_back(static_cast<long>(v));
            break;
        }
    }
}

inline BoundaryConditionSet assemble(const MetricGraph& g, const std::vector<VertexCondition>& per_vertex,
                                     std::string provenance) {
    BoundaryConditionSet s;
    s.provenance = std::move(provenance);
    s.layout = TraceLayout(g);
    std::vector<Eigen::RowVectorXd> rows;
    for (std::size_t v = 0; v < g.vertices().size(); ++v)
        add_vertex_rows(g, s.layout, v, per_vertex[v], rows, s.row_vertex);
    s.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(2 * s.layout.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) s.rows.row(static_cast<Eigen::Index>(i)) = rows[i];
    return s;
}

}  // namespace detail

inline BoundaryConditionSet build_friedrichs(const MetricGraph& g) {
    return detail::assemble(g, std::vector<VertexCondition>(g.vertices().size(), {VertexRule::Dirichlet, 0.0}),
                            "friedrichs");
}

inline BoundaryConditionSet build_neumann_kirchhoff(const MetricGraph& g) {
    return detail::assemble(g, std::vector<VertexCondition>(g.vertices().size(), {VertexRule::Kirchhoff, 0.0}),
                            "kirchhoff");
}

inline BoundaryConditionSet build_delta(const MetricGraph& g, double alpha) {
    if (!std::isfinite(alpha)) throw InputError("delta", "alpha must be finite");
    std::ostringstream tag;
    tag << "delta:" << alpha;
    return detail::assemble(g, std::vector<VertexCondition>(g.vertices().size(), {VertexRule::Delta, alpha}),
                            tag.str());
}

/// Per-vertex choice; vertices not listed use `fallback`.
inline BoundaryConditionSet build_mixed(const MetricGraph& g, const std::map<std::string, VertexCondition>& rules,
                                        VertexCondition fallback = {}) {
    std::vector<VertexCondition> per(g.vertices().size(), fallback);
    for (const auto& [id, c] : rules) {
        const auto v = g.find_vertex(id);
        if (!v) throw InputError("vertex_conditions." + id, "unknown vertex");
        per[*v] = c;
    }
    return detail::assemble(g, per, "mixed");
}

inline VertexCondition parse_vertex_condition(const std::string& text, const std::string& loc) {
    if (text == "dirichlet" || text == "friedrichs") return {VertexRule::Dirichlet, 0.0};
    if (text == "neumann") return {VertexRule::Neumann, 0.0};
    if (text == "kirchhoff") return {VertexRule::Kirchhoff, 0.0};
    if (text.rfind("delta:", 0) == 0) {
        try {
            std::size_t used = 0;
            const double a = std::stod(text.substr(6), &used);
            if (used != text.size() - 6 || !std::isfinite(a)) throw std::invalid_argument(text);
            return {VertexRule::Delta, a};
        } catch (const std::exception&) {
            throw InputError(loc, "bad delta strength in '" + text + "'");
        }
    }
    throw InputError(loc, "unknown vertex condition '" + text + "'");
}

inline nlohmann::json to_json(const MetricGraph& g, const BoundaryConditionSet& s) {
    nlohmann::json eps = nlohmann::json::array(), cols = nlohmann::json::array();
    for (std::size_t k = 0; k < s.layout.size(); ++k) {
        const auto& r = s.layout.endpoints[k];
        const std::string name = g.edge(r.edge).id + "." + to_string(r.side);
        eps.push_back({{"edge", g.edge(r.edge).id},
                       {"side", to_string(r.side)},
                       {"vertex", g.vertex(s.layout.vertex[k]).id},
                       {"epsilon", s.layout.epsilon[k]}});
        cols.push_back("g[" + name + "]");
        cols.push_back("f[" + name + "]");
    }
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < s.rows.rows(); ++i) {
        std::vector<double> r(s.rows.cols());
        for (Eigen::Index j = 0; j < s.rows.cols(); ++j) r[j] = s.rows(i, j);
        rows.push_back(r);
    }
    nlohmann::json where = nlohmann::json::array();
    for (long v : s.row_vertex) where.push_back(v >= 0 ? nlohmann::json(g.vertex(v).id) : nlohmann::json(nullptr));
    return {{"provenance", s.provenance}, {"endpoints", eps}, {"columns", cols},
            {"rows", rows},             {"row_vertex", where}, {"local", s.is_local()}};
}

/// Custom boundary conditions from a document with either
///   {"rows": [[...], ...]}  (optional "endpoints" header checked against the canonical order), or
///   {"vertex_conditions": {"v1": "dirichlet" | "neumann" | "kirchhoff" | "delta:<a>", ...},
///    "default": "kirchhoff"}.
inline BoundaryConditionSet parse_custom_conditions(const MetricGraph& g, const nlohmann::json& doc) {
    if (!doc.is_object()) throw InputError("custom", "expected an object");
    if (doc.contains("vertex_conditions")) {
        const auto& vc = doc.at("vertex_conditions");
        if (!vc.is_object()) throw InputError("custom.vertex_conditions", "expected an object");
        std::map<std::string, VertexCondition> rules;
        for (auto it = vc.begin(); it != vc.end(); ++it) {
            if (!it.value().is_string()) throw InputError("custom.vertex_conditions." + it.key(), "expected a string");
            rules[it.key()] = parse_vertex_condition(it.value().get<std::string>(), "custom.vertex_conditions." + it.key());
        }
        VertexCondition fallback{};
        if (doc.contains("default")) {
            if (!doc.at("default").is_string()) throw InputError("custom.default", "expected a string");
            fallback = parse_vertex_condition(doc.at("default").get<std::string>(), "custom.default");
        }
        auto s = build_mixed(g, rules, fallback);
        s.provenance = "custom";
        return s;
    }
    if (!doc.contains("rows")) throw InputError("custom", "expected 'rows' or 'vertex_conditions'");
    BoundaryConditionSet s;
    s.provenance = "custom";
    s.layout = TraceLayout(g);
    const std::size_t n = 2 * s.layout.size();
    if (doc.contains("endpoints")) {
        const auto& eps = doc.at("endpoints");
        if (!eps.is_array() || eps.size() != s.layout.size())
            throw InputError("custom.endpoints", "endpoint header does not match the graph's non-LP endpoints");
        for (std::size_t k = 0; k < eps.size(); ++k) {
            const auto& r = s.layout.endpoints[k];
            if (!eps[k].is_object() || eps[k].value("edge", "") != g.edge(r.edge).id ||
                eps[k].value("side", "") != to_string(r.side))
                throw InputError("custom.endpoints[" + std::to_string(k) + "]", "endpoint order mismatch");
        }
    }
    const auto& rows = doc.at("rows");
    if (!rows.is_array()) throw InputError("custom.rows", "expected an array");
    s.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string loc = "custom.rows[" + std::to_string(i) + "]";
        if (!rows[i].is_array() || rows[i].size() != n)
            throw InputError(loc, "expected " + std::to_string(n) + " numbers");
        std::set<std::size_t> touched;
        for (std::size_t j = 0; j < n; ++j) {
            if (!rows[i][j].is_number()) throw InputError(loc, "expected numbers");
            s.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
            if (rows[i][j].get<double>() != 0.0) touched.insert(s.layout.vertex[j / 2]);
        }
        s.row_vertex.push_back(touched.size() == 1 ? static_cast<long>(*touched.begin()) : -1);
    }
    return s;
}

inline BoundaryConditionSet load_custom_conditions(const MetricGraph& g, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError(path, "cannot open boundary-condition file");
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path, std::string("malformed JSON: ") + e.what());
    }
    return parse_custom_conditions(g, doc);
}

/// Parses the CLI extension spec friedrichs | kirchhoff | delta:<alpha> | custom:<path>.
inline BoundaryConditionSet build_extension(const MetricGraph& g, const std::string& spec) {
    if (spec == "friedrichs") return build_friedrichs(g);
    if (spec == "kirchhoff") return build_neumann_kirchhoff(g);
    if (spec.rfind("delta:", 0) == 0) {
        const auto c = parse_vertex_condition(spec, "--extension");
        return build_delta(g, c.alpha);
    }
    if (spec.rfind("custom:", 0) == 0) return load_custom_conditions(g, spec.substr(7));
    throw InputError("--extension", "unknown extension '" + spec + "'");
}

}  // namespace slg
