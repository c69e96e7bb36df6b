#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slgraph/graph_model.hpp"
#include "slgraph/numerics.hpp"

namespace slg {

/// (dx/dt, dxi/dt) = (-2 p xi, p' xi^2) for the principal symbol -p(x) xi^2.
inline std::pair<double, double> hamiltonian_field(const Edge& e, double x, double xi) {
    if (!(x > e.p.a && x < e.p.b))
        throw InputError("edge " + e.id, "Hamiltonian field requested outside the open edge (x=" +
                                             std::to_string(x) + ")");
    return {-2.0 * e.p.value(x) * xi, e.p.derivative(x) * xi * xi};
}

/// Complete at the endpoint iff 1/sqrt(p) is not integrable there, i.e. order >= 2.
inline bool is_complete_at(const Edge& e, Side side) { return e.p.order(side) >= 2; }

enum class Direction { TowardA, TowardB };

inline Side target_side(Direction d) { return d == Direction::TowardA ? Side::Left : Side::Right; }

struct DivergenceCertificate {
    std::vector<double> distances;         // d_k = D 2^-k
    std::vector<double> partial_integrals; // int_{d_k}^{x0 side} p^{-1/2}
    double increment_lower_bound = 0.0;    // every dyadic shell adds at least this much
    double threshold = 1e6;
    long long levels_to_threshold = 0;     // shells after which the bound exceeds the threshold
};

struct EscapeResult {
    bool reached = false;
    double time = std::numeric_limits<double>::infinity();
    double error = 0.0;
    DivergenceCertificate certificate;  // filled when the endpoint is complete
};

namespace detail {

/// 1/sqrt(p) written in the distance d to the endpoint, using p = d^m psi(d).
struct InverseSqrtP {
    unsigned m;
    Polynomial psi;
    double operator()(double d) const { return 1.0 / std::sqrt(std::pow(d, m) * psi(d)); }
};

}  // namespace detail

/// Travel time T = (1/(2 sqrt E)) int 1/sqrt(p) from x0 to the endpoint in the given direction.
inline EscapeResult escape_time(const Edge& e, double x0, double E, Direction dir) {
    if (!(E > 0.0)) throw InputError("escape_time", "energy must be positive");
    if (!(x0 > e.p.a && x0 < e.p.b)) throw InputError("escape_time", "start point must be interior");
    const Side side = target_side(dir);
    const unsigned m = e.p.order(side);
    const double dist = side == Side::Left ? x0 - e.p.a : e.p.b - x0;
    const Polynomial psi = e.p.regular_factor(side);
    const double scale = 0.5 / std::sqrt(E);
    EscapeResult r;

    if (m == 0) {
        auto f = [&](double d) { return 1.0 / std::sqrt(psi(d)); };
        const auto q = adaptive_integrate(f, 0.0, dist);
        r.reached = true;
        r.time = scale * q.value;
        r.error = scale * q.error;
    } else if (m == 1) {
        // d = u^2: dx / sqrt(p) = 2u du / (u sqrt(psi)) = 2 du / sqrt(psi(u^2))
        auto f = [&](double u) { return 2.0 / std::sqrt(psi(u * u)); };
        const auto q = adaptive_integrate(f, 0.0, std::sqrt(dist));
        r.reached = true;
        r.time = scale * q.value;
        r.error = scale * q.error;
    } else {
        // Divergent: dyadic partial integrals and a shell-wise lower bound.
        const double D = std::min(dist, 1.0);
        double psi_max = 0.0;
        for (int i = 0; i <= 1000; ++i) psi_max = std::max(psi_max, psi(D * i / 1000.0));
        auto& c = r.certificate;
        // On d <= 1 and m >= 2, d^{m/2} <= d, so each shell [d/2, d] adds >= ln 2 / sqrt(psi_max).
        c.increment_lower_bound = std::log(2.0) / std::sqrt(psi_max);
        c.levels_to_threshold = static_cast<long long>(std::ceil(c.threshold / c.increment_lower_bound));
        const detail::InverseSqrtP f{m, psi};
        double acc = dist > D ? adaptive_integrate(f, D, dist).value : 0.0;
        double d = D;
        for (int k = 1; k <= 40; ++k) {
            const double next = 0.5 * d;
            // in u = ln d the shell integrand is O(1) whatever the shell size
            acc += adaptive_integrate([&f](double u) { return f(std::exp(u)) * std::exp(u); }, std::log(next),
                                      std::log(d))
                       .value;
            d = next;
            c.distances.push_back(d);
            c.partial_integrals.push_back(acc);
        }
        r.reached = false;
    }
    if (r.reached && !(r.error <= 1e-8 * std::max(1.0, r.time)))
        throw NumericalError("escape-time quadrature did not converge", r.error);
    return r;
}

inline nlohmann::json to_json(const EscapeResult& r) {
    nlohmann::json j{{"reached", r.reached}};
    if (r.reached) {
        j["T"] = r.time;
        j["error"] = r.error;
    } else {
        j["T"] = "infinity";
        j["certificate"] = {{"distances", r.certificate.distances},
                            {"partial_integrals", r.certificate.partial_integrals},
                            {"increment_lower_bound", r.certificate.increment_lower_bound},
                            {"threshold", r.certificate.threshold},
                            {"levels_to_threshold", r.certificate.levels_to_threshold}};
    }
    return j;
}

struct FlowSample {
    double t, x, xi, energy;
};

struct TrajectoryOptions {
    double t_max = 100.0;
    double stop_fraction = 1e-9;  // cutoff distance as a fraction of the edge length
    double rel_tol = 1e-12;
    double abs_tol = 1e-300;
    std::size_t max_samples = 4000;
};

struct Trajectory {
    std::vector<FlowSample> samples;
    double energy_drift = 0.0;   // max |E(t) - E(0)| / E(0)
    bool hit_cutoff = false;     // came within the cutoff distance of the endpoint
    double cutoff_time = std::numeric_limits<double>::infinity();
    Side toward = Side::Left;
    bool monotone = true;        // distance to the endpoint decreased at every step
};

/// Integrates the symbol flow from (x0, xi0) until t_max or until the trajectory comes
/// within stop_fraction * length of the endpoint it travels to. The sign of xi is
/// invariant, so the trajectory heads to a when xi0 > 0 and to b when xi0 < 0; it is
/// integrated in the distance d to that endpoint for resolution near it.
inline Trajectory integrate_trajectory(const Edge& e, double x0, double xi0, TrajectoryOptions opt = {}) {
    if (!(x0 > e.p.a && x0 < e.p.b)) throw InputError("integrate_trajectory", "start point must be interior");
    if (xi0 == 0.0) throw InputError("integrate_trajectory", "xi0 must be non-zero");
    Trajectory tr;
    tr.toward = xi0 > 0.0 ? Side::Left : Side::Right;
    const double sigma = tr.toward == Side::Left ? 1.0 : -1.0;  // dd/dx
    const unsigned m = e.p.order(tr.toward);
    const Polynomial psi = e.p.regular_factor(tr.toward), dpsi = psi.derivative();
    const double c = e.endpoint(tr.toward);
    const double delta_stop = opt.stop_fraction * e.p.length();

    auto p_of = [&](double d) { return std::pow(d, m) * psi(d); };
    auto dp_dd = [&](double d) {
        const double lead = m == 0 ? 0.0 : m * std::pow(d, m - 1.0) * psi(d);
        return lead + std::pow(d, m) * dpsi(d);
    };
    auto x_of = [&](double d) { return c + sigma * d; };

    using Integrator = AdaptiveIntegrator<2>;
    OdeOptions oo;
    oo.rel_tol = opt.rel_tol;
    oo.abs_tol = opt.abs_tol;
    Integrator integ(
        [&](const Integrator::State& s, Integrator::State& ds, double) {
            const double d = std::max(s[0], 0.0);
            ds[0] = sigma * (-2.0 * p_of(d) * s[1]);
            ds[1] = sigma * dp_dd(d) * s[1] * s[1];
        },
        oo);

    Integrator::State st{std::abs(x0 - c), xi0};
    const double E0 = p_of(st[0]) * xi0 * xi0;
    double t = 0.0, dt = 1e-3 / std::max(1.0, std::abs(2.0 * p_of(st[0]) * xi0));

    auto record = [&](const Integrator::State& s, double tt) {
        const double E = p_of(s[0]) * s[1] * s[1];
        tr.energy_drift = std::max(tr.energy_drift, std::abs(E - E0) / E0);
        if (!tr.samples.empty() && s[0] > std::abs(tr.samples.back().x - c)) tr.monotone = false;
        tr.samples.push_back({tt, x_of(s[0]), s[1], E});
    };
    record(st, 0.0);

    Integrator::State prev = st;
    double t_prev = 0.0;
    integ.advance(st, t, opt.t_max, dt, [&](Integrator::State& s, double tt) {
        if (s[0] <= delta_stop) {
            tr.hit_cutoff = true;
            return false;
        }
        record(s, tt);
        prev = s;
        t_prev = tt;
        return true;
    });

    if (tr.hit_cutoff) {
        // Finish the last step with d as the independent variable:
        // dt/dd = 1 / (dd/dt), dxi/dd = -p_d xi / (2 p).
        AdaptiveIntegrator<2> tail(
            [&](const Integrator::State& s, Integrator::State& ds, double d) {
                ds[0] = 1.0 / (sigma * (-2.0 * p_of(d) * s[1]));
                ds[1] = -dp_dd(d) * s[1] / (2.0 * p_of(d));
            },
            oo);
        Integrator::State ts{t_prev, prev[1]};
        double d = prev[0], h = 0.0;
        tail.advance(ts, d, delta_stop, h);
        tr.cutoff_time = ts[0];
        record({delta_stop, ts[1]}, ts[0]);
    }
    if (tr.samples.size() > opt.max_samples) {
        // thin uniformly, keeping both ends
        std::vector<FlowSample> thin;
        const double stride = static_cast<double>(tr.samples.size() - 1) / (opt.max_samples - 1);
        for (std::size_t i = 0; i < opt.max_samples; ++i)
            thin.push_back(tr.samples[static_cast<std::size_t>(std::llround(i * stride))]);
        tr.samples = std::move(thin);
    }
    return tr;
}

}  // namespace slg
