#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slgraph/graph_model.hpp"
#include "slgraph/numerics.hpp"

namespace slg {

enum class EndpointKind { Regular, LimitCircle, LimitPoint };

inline const char* to_string(EndpointKind k) {
    switch (k) {
        case EndpointKind::Regular: return "regular";
        case EndpointKind::LimitCircle: return "LC";
        case EndpointKind::LimitPoint: return "LP";
    }
    return "?";
}

struct EndpointClass {
    EndpointKind kind = EndpointKind::Regular;
    unsigned order = 0;

    bool has_trace() const noexcept { return kind != EndpointKind::LimitPoint; }
    friend bool operator==(const EndpointClass&, const EndpointClass&) = default;
};

/// Weyl trichotomy from the declared vanishing order: 0 regular, 1 LC, >=2 LP.
inline EndpointClass classify_endpoint(const Edge& e, Side s) {
    const unsigned m = e.p.order(s);
    if (m == 0) return {EndpointKind::Regular, m};
    if (m == 1) return {EndpointKind::LimitCircle, m};
    return {EndpointKind::LimitPoint, m};
}

inline EndpointClass classify_endpoint(const MetricGraph& g, const EndpointRef& r) {
    return classify_endpoint(g.edge(r.edge), r.side);
}

/// Number of non-LP endpoints of the edge.
inline int deficiency_index(const Edge& e) {
    return static_cast<int>(classify_endpoint(e, Side::Left).has_trace()) +
           static_cast<int>(classify_endpoint(e, Side::Right).has_trace());
}

struct DeficiencyRow {
    std::string edge;
    EndpointClass left;
    EndpointClass right;
    int def = 0;
};

struct DeficiencyReport {
    std::vector<DeficiencyRow> rows;
    int total = 0;
    bool essentially_selfadjoint = false;
    std::vector<EndpointRef> non_lp_endpoints;  // canonical trace ordering
};

/// Non-LP endpoints in canonical order: edges in declaration order, left before right.
inline std::vector<EndpointRef> trace_endpoints(const MetricGraph& g) {
    std::vector<EndpointRef> out;
    for (std::size_t e = 0; e < g.edges().size(); ++e)
        for (Side s : {Side::Left, Side::Right})
            if (classify_endpoint(g.edge(e), s).has_trace()) out.push_back({e, s});
    return out;
}

inline DeficiencyReport graph_deficiency(const MetricGraph& g) {
    DeficiencyReport r;
    for (const auto& e : g.edges()) {
        DeficiencyRow row{e.id, classify_endpoint(e, Side::Left), classify_endpoint(e, Side::Right),
                          deficiency_index(e)};
        r.total += row.def;
        r.rows.push_back(row);
    }
    r.essentially_selfadjoint = r.total == 0;
    r.non_lp_endpoints = trace_endpoints(g);
    return r;
}

inline nlohmann::json to_json(const DeficiencyReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"edge", row.edge},
                        {"left_class", to_string(row.left.kind)},
                        {"left_order", row.left.order},
                        {"right_class", to_string(row.right.kind)},
                        {"right_order", row.right.order},
                        {"def_k", row.def}});
    return {{"edges", rows}, {"totals", {{"N", r.total}, {"essentially_selfadjoint", r.essentially_selfadjoint}}}};
}

// ---------------------------------------------------------------------------
// Numerical L^2 test of solutions near an endpoint
// ---------------------------------------------------------------------------

enum class L2Verdict { AllL2, NotAllL2 };

struct L2TestResult {
    L2Verdict verdict = L2Verdict::AllL2;
    /// Fitted exponents s with |u|^2 ~ distance^s, one per independent solution.
    std::array<double, 2> exponents{};
    /// Smallest amplitude exponent (s/2): about -1 for the divergent solution at order 2.
    double amplitude_exponent = 0.0;
};

struct L2TestOptions {
    int first_level = 4;   // distances L * 2^-first_level ...
    int last_level = 24;   // ... down to L * 2^-last_level
    int samples_per_shell = 16;
    double margin = 0.05;  // convergence iff s > -1 + margin
};

/// Integrates two independent solutions of P u = lambda u from the edge midpoint
/// toward the endpoint and fits the growth of |u|^2 against the distance.
inline L2TestResult l2_solution_test(const Edge& e, Side side, double lambda = 0.0, L2TestOptions opt = {}) {
    const double L = e.p.length();
    const double c = e.endpoint(side);
    const double dir = side == Side::Left ? -1.0 : 1.0;  // direction of motion in x
    const double x_mid = 0.5 * (e.p.a + e.p.b);

    using Integrator = AdaptiveIntegrator<2>;
    auto rhs = [&e, lambda](const Integrator::State& s, Integrator::State& ds, double x) {
        ds[0] = s[1] / e.p.value(x);
        ds[1] = (e.q.value(x) - lambda) * s[0];
    };

    // Shell k covers distances [L 2^-(k+1), L 2^-k]. Per shell we keep the envelope of each
    // solution and of |u1|^2 + |u2|^2; the sum has no log-periodic oscillation when the
    // indicial roots are complex, and it is integrable exactly when every solution is.
    const int shells = opt.last_level - opt.first_level + 1;
    std::vector<double> log_d(shells);
    std::vector<std::vector<double>> log_sq(2, std::vector<double>(shells * (opt.samples_per_shell + 1)));
    std::vector<double> log_env[2];
    for (int sol = 0; sol < 2; ++sol) {
        Integrator integ(rhs);
        Integrator::State y = sol == 0 ? Integrator::State{1.0, 0.0} : Integrator::State{0.0, 1.0};
        double log_scale = 0.0;
        double x = x_mid, dt = 0.0;
        auto rescale = [&log_scale](Integrator::State& s, double) {
            const double m = std::max(std::abs(s[0]), std::abs(s[1]));
            if (m > 1e100) {
                s[0] /= m;
                s[1] /= m;
                log_scale += std::log(m);
            }
            return true;
        };
        for (int k = opt.first_level, i_shell = 0; k <= opt.last_level; ++k, ++i_shell) {
            const double d_hi = L * std::ldexp(1.0, -k), d_lo = 0.5 * d_hi;
            double env = -INFINITY;
            for (int i = 0; i <= opt.samples_per_shell; ++i) {
                const double d = d_hi * std::pow(d_lo / d_hi, static_cast<double>(i) / opt.samples_per_shell);
                const double target = c - dir * d;
                integ.advance(y, x, target, dt, rescale);
                const double lu = 2.0 * (std::log(std::abs(y[0]) + 1e-300) + log_scale);
                log_sq[sol][i_shell * (opt.samples_per_shell + 1) + i] = lu;
                env = std::max(env, lu);
            }
            log_d[i_shell] = std::log(std::sqrt(d_lo * d_hi));
            log_env[sol].push_back(env);
        }
    }
    std::vector<double> log_sum(shells, -INFINITY);
    for (int k = 0; k < shells; ++k)
        for (int i = 0; i <= opt.samples_per_shell; ++i) {
            const double a = log_sq[0][k * (opt.samples_per_shell + 1) + i];
            const double b = log_sq[1][k * (opt.samples_per_shell + 1) + i];
            const double m = std::max(a, b);
            log_sum[k] = std::max(log_sum[k], m + std::log1p(std::exp(std::min(a, b) - m)));
        }

    auto slope = [&log_d](const std::vector<double>& ys) {
        const double n = static_cast<double>(ys.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            sx += log_d[i];
            sy += ys[i];
            sxx += log_d[i] * log_d[i];
            sxy += log_d[i] * ys[i];
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    L2TestResult r;
    r.exponents = {slope(log_env[0]), slope(log_env[1])};
    const double worst = slope(log_sum);
    r.amplitude_exponent = 0.5 * worst;
    r.verdict = worst > -1.0 + opt.margin ? L2Verdict::AllL2 : L2Verdict::NotAllL2;
    return r;
}

// ---------------------------------------------------------------------------
// Domain quotient dimensions on chains and cycles
// ---------------------------------------------------------------------------

struct QuotientDims {
    int max_over_max = 0;  // dim D_Max / D_max = N_c/2 + N_p
    int max_over_min = 0;  // dim D_max / D_min = N_c + 2 N_b
    int n_c = 0, n_p = 0, n_b = 0;
};

/// Counts LC endpoints by neighbourhood on a graph whose vertices have degree <= 2.
inline QuotientDims domain_quotient_dims(const MetricGraph& g) {
    QuotientDims q;
    for (const auto& v : g.vertices()) {
        if (v.incidence.size() > 2)
            throw InputError("vertex " + v.id, "unsupported topology: degree " +
                                                   std::to_string(v.incidence.size()) + " > 2");
        if (v.incidence.size() == 1) {
            if (classify_endpoint(g, v.incidence[0]).kind == EndpointKind::LimitCircle) ++q.n_b;
            continue;
        }
        if (v.incidence.size() != 2) continue;
        for (int i = 0; i < 2; ++i) {
            const auto mine = classify_endpoint(g, v.incidence[i]).kind;
            const auto other = classify_endpoint(g, v.incidence[1 - i]).kind;
            if (mine != EndpointKind::LimitCircle) continue;
            if (other == EndpointKind::LimitCircle) ++q.n_c;
            else if (other == EndpointKind::LimitPoint) ++q.n_p;
        }
    }
    q.max_over_max = q.n_c / 2 + q.n_p;
    q.max_over_min = q.n_c + 2 * q.n_b;
    return q;
}

}  // namespace slg
