#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/hamiltonian_flow.hpp"
#include "slgraph/spectral_solver.hpp"

namespace slg {

enum class EdgeClass { R, RLC, LC, LP };

inline const char* to_string(EdgeClass c) {
    switch (c) {
        case EdgeClass::R: return "R";
        case EdgeClass::RLC: return "RLC";
        case EdgeClass::LC: return "LC";
        case EdgeClass::LP: return "LP";
    }
    return "?";
}

/// R: both ends regular, RLC: one regular and one LC end, LC: both LC, LP: some LP end.
inline EdgeClass edge_class(const Edge& e) {
    const auto l = classify_endpoint(e, Side::Left).kind, r = classify_endpoint(e, Side::Right).kind;
    if (l == EndpointKind::LimitPoint || r == EndpointKind::LimitPoint) return EdgeClass::LP;
    const int lc = (l == EndpointKind::LimitCircle) + (r == EndpointKind::LimitCircle);
    return lc == 0 ? EdgeClass::R : lc == 1 ? EdgeClass::RLC : EdgeClass::LC;
}

struct WeylEdgeRow {
    std::string edge;
    EdgeClass cls = EdgeClass::R;
    double length = 0.0;
    double c_der = 0.0;    // (1/pi) int p^{-1/2}, infinite with an LP end
    double c_class = 0.0;  // class constant of the closed-form law
};

struct WeylConstants {
    std::vector<WeylEdgeRow> edges;
    double c_der = 0.0;
    double c_class = 0.0;
    bool c_der_finite = true;
};

/// int_a^b p^{-1/2}, split at the midpoint and integrated with the endpoint substitutions.
inline double liouville_length(const Edge& e) {
    const double mid = 0.5 * (e.p.a + e.p.b);
    const auto l = escape_time(e, mid, 0.25, Direction::TowardA);
    const auto r = escape_time(e, mid, 0.25, Direction::TowardB);
    if (!l.reached || !r.reached) return INFINITY;
    return l.time + r.time;
}

inline WeylConstants weyl_constants(const MetricGraph& g) {
    WeylConstants w;
    const double pi = std::numbers::pi;
    for (const auto& e : g.edges()) {
        WeylEdgeRow row;
        row.edge = e.id;
        row.cls = edge_class(e);
        row.length = e.p.length();
        row.c_der = row.cls == EdgeClass::LP ? INFINITY : liouville_length(e) / pi;
        switch (row.cls) {
            case EdgeClass::R: row.c_class = std::sqrt(row.length) / std::sqrt(pi); break;
            case EdgeClass::RLC: row.c_class = std::sqrt(2.0) * std::pow(row.length, 0.25) / std::sqrt(pi); break;
            case EdgeClass::LC: row.c_class = 1.0; break;
            case EdgeClass::LP: row.c_class = 0.0; break;
        }
        w.c_der += row.c_der;
        w.c_class += row.c_class;
        w.c_der_finite = w.c_der_finite && std::isfinite(row.c_der);
        w.edges.push_back(row);
    }
    return w;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double error = 0.0;   // standard error of the slope
    int points = 0;
    double window_lo = 0.0, window_hi = 0.0;
};

/// Least squares N(lambda_n) - 1/2 = C sqrt(lambda_n) + b over [lambda_max/10, lambda_max].
inline SlopeFit empirical_slope(const Spectrum& s, int min_eigenvalues = 20) {
    std::vector<double> lam;
    for (const auto& e : s.eigenvalues)
        for (int k = 0; k < e.multiplicity; ++k) lam.push_back(e.lambda);
    if (static_cast<int>(lam.size()) < min_eigenvalues)
        throw InputError("empirical_slope", "too few eigenvalues (" + std::to_string(lam.size()) + " < " +
                                                std::to_string(min_eigenvalues) + ")");
    SlopeFit f;
    f.window_hi = s.lambda_max;
    f.window_lo = s.lambda_max / 10.0;
    std::vector<double> X, Y;
    for (std::size_t n = 0; n < lam.size(); ++n) {
        if (lam[n] < f.window_lo || lam[n] > f.window_hi) continue;
        X.push_back(std::sqrt(lam[n]));
        Y.push_back(static_cast<double>(n + 1) - 0.5);
    }
    f.points = static_cast<int>(X.size());
    if (f.points < 3) throw InputError("empirical_slope", "fewer than 3 eigenvalues in the fit window");
    const double N = f.points;
    double sx = 0, sy = 0;
    for (int i = 0; i < f.points; ++i) {
        sx += X[i];
        sy += Y[i];
    }
    const double mx = sx / N, my = sy / N;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < f.points; ++i) {
        sxx += (X[i] - mx) * (X[i] - mx);
        sxy += (X[i] - mx) * (Y[i] - my);
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (int i = 0; i < f.points; ++i) {
        const double r = Y[i] - f.intercept - f.slope * X[i];
        rss += r * r;
    }
    f.error = f.points > 2 ? std::sqrt(rss / (N - 2) / sxx) : 0.0;
    return f;
}

struct InterlacingRow {
    double lambda;
    int n_p, n_f, gap;
    bool ok;
};

struct InterlacingResult {
    std::vector<InterlacingRow> rows;
    int deficiency = 0;
    int worst_gap = 0;
    int skipped = 0;
    bool holds = true;
};

/// Compares N_P and N_F on the midpoints of the union of both spectra below the common
/// lambda_max; points within a confirmation bracket of an eigenvalue are skipped.
inline InterlacingResult interlacing_check(const Spectrum& P, const Spectrum& F, int deficiency) {
    InterlacingResult r;
    r.deficiency = deficiency;
    const double top = std::min(P.lambda_max, F.lambda_max);
    std::vector<std::pair<double, double>> pts;  // value, half-width
    for (const auto* s : {&P, &F})
        for (const auto& e : s->eigenvalues)
            if (e.lambda <= top) pts.emplace_back(e.lambda, e.half_width);
    std::sort(pts.begin(), pts.end());
    std::vector<double> grid;
    const double bottom = std::min(P.lower_bound, F.lower_bound);
    if (!pts.empty()) grid.push_back(0.5 * (bottom + pts.front().first));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1].first > pts[i].first) grid.push_back(0.5 * (pts[i].first + pts[i + 1].first));
    for (double lam : grid) {
        bool near = false;
        for (const auto& [v, w] : pts) near = near || std::abs(lam - v) <= w;
        if (near) {
            ++r.skipped;
            continue;
        }
        InterlacingRow row{lam, counting_function(P, lam), counting_function(F, lam), 0, true};
        row.gap = std::abs(row.n_p - row.n_f);
        row.ok = row.gap <= deficiency;
        r.worst_gap = std::max(r.worst_gap, row.gap);
        r.holds = r.holds && row.ok;
        r.rows.push_back(row);
    }
    return r;
}

struct WeylVerdict {
    SlopeFit fit;
    WeylConstants constants;
    double deviation_der = INFINITY;    // (C_emp - C_der) / C_der
    double deviation_class = INFINITY;  // (C_emp - C_class) / C_class
    double class_vs_der = 0.0;          // (C_class - C_der) / C_der
    bool class_constant_disagrees = false;
};

inline WeylVerdict weyl_verdict(const MetricGraph& g, const Spectrum& s, int min_eigenvalues = 20) {
    WeylVerdict v;
    v.constants = weyl_constants(g);
    v.fit = empirical_slope(s, min_eigenvalues);
    const auto& c = v.constants;
    if (c.c_der_finite && c.c_der > 0) v.deviation_der = (v.fit.slope - c.c_der) / c.c_der;
    if (c.c_class > 0) v.deviation_class = (v.fit.slope - c.c_class) / c.c_class;
    if (c.c_der_finite && c.c_der > 0) {
        v.class_vs_der = (c.c_class - c.c_der) / c.c_der;
        v.class_constant_disagrees = std::abs(v.class_vs_der) > 1e-6;
    }
    return v;
}

namespace detail {
inline nlohmann::json finite_or_string(double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json("infinity");
}
}  // namespace detail

inline nlohmann::json to_json(const WeylConstants& c) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : c.edges)
        rows.push_back({{"edge", r.edge},
                        {"class", to_string(r.cls)},
                        {"length", r.length},
                        {"c_der", detail::finite_or_string(r.c_der)},
                        {"c_class", r.c_class}});
    return {{"edges", rows},
            {"c_der", detail::finite_or_string(c.c_der)},
            {"c_der_finite", c.c_der_finite},
            {"c_class", c.c_class}};
}

inline nlohmann::json to_json(const WeylVerdict& v) {
    return {{"c_emp", v.fit.slope},
            {"c_emp_error", v.fit.error},
            {"fit_intercept", v.fit.intercept},
            {"fit_points", v.fit.points},
            {"fit_window", {v.fit.window_lo, v.fit.window_hi}},
            {"constants", to_json(v.constants)},
            {"deviation_from_c_der", detail::finite_or_string(v.deviation_der)},
            {"deviation_from_c_class", detail::finite_or_string(v.deviation_class)},
            {"c_class_vs_c_der", v.class_vs_der},
            {"c_class_disagrees_with_c_der", v.class_constant_disagrees}};
}

inline nlohmann::json to_json(const InterlacingResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& x : r.rows)
        rows.push_back({{"lambda", x.lambda}, {"N_P", x.n_p}, {"N_F", x.n_f}, {"gap", x.gap}, {"ok", x.ok}});
    return {{"deficiency", r.deficiency},
            {"worst_gap", r.worst_gap},
            {"holds", r.holds},
            {"skipped", r.skipped},
            {"grid", rows}};
}

/// lambda, N_P, N_F, C_der sqrt(lambda), C_class sqrt(lambda) on the interlacing grid.
inline std::string weyl_csv(const InterlacingResult& r, const WeylConstants& c) {
    std::string out = "lambda,N_P,N_F,C_der_sqrt_lambda,C_class_sqrt_lambda\n";
    char buf[160];
    for (const auto& x : r.rows) {
        const double s = std::sqrt(std::max(x.lambda, 0.0));
        if (c.c_der_finite)
            std::snprintf(buf, sizeof buf, "%.12g,%d,%d,%.12g,%.12g\n", x.lambda, x.n_p, x.n_f, c.c_der * s,
                          c.c_class * s);
        else
            std::snprintf(buf, sizeof buf, "%.12g,%d,%d,inf,%.12g\n", x.lambda, x.n_p, x.n_f, c.c_class * s);
        out += buf;
    }
    return out;
}

}  // namespace slg
