#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "slgraph/errors.hpp"

namespace slg {

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Full Gauss-Legendre rule on [-1, 1].
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

template <unsigned N>
GaussRule expand_boost_rule() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& x = G::abscissa();
    const auto& w = G::weights();
    GaussRule r;
    for (std::size_t i = x.size(); i-- > 0;) {
        if (x[i] == 0.0) continue;
        r.nodes.push_back(-x[i]);
        r.weights.push_back(w[i]);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.nodes.push_back(x[i]);
        r.weights.push_back(w[i]);
    }
    return r;
}

}  // namespace detail

/// Gauss-Legendre rules used for element integrals (exact to degree 2n-1).
inline const GaussRule& gauss_rule(unsigned points) {
    static const GaussRule r10 = detail::expand_boost_rule<10>();
    static const GaussRule r20 = detail::expand_boost_rule<20>();
    static const GaussRule r30 = detail::expand_boost_rule<30>();
    if (points <= 10) return r10;
    if (points <= 20) return r20;
    return r30;
}

template <class F>
double gauss_integrate(F&& f, double lo, double hi, unsigned points = 20) {
    const GaussRule& r = gauss_rule(points);
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(mid + half * r.nodes[i]);
    return s * half;
}

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

/// Adaptive Gauss-Kronrod (61 points) with an error estimate.
template <class F>
QuadratureResult adaptive_integrate(F&& f, double lo, double hi, double tol = 1e-12, unsigned max_depth = 15) {
    QuadratureResult r;
    r.value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, max_depth, tol, &r.error);
    return r;
}

// ---------------------------------------------------------------------------
// ODE integration
// ---------------------------------------------------------------------------

struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    double min_step_fraction = 1e-15;  // step underflow threshold relative to interval scale
    std::size_t max_steps = 5'000'000;
};

/// Adaptive Runge-Kutta-Fehlberg 7(8) driver with exact stops at requested
/// abscissae. Step acceptance is deterministic.
template <std::size_t N>
class AdaptiveIntegrator {
public:
    using State = std::array<double, N>;
    using Rhs = std::function<void(const State&, State&, double)>;

    AdaptiveIntegrator(Rhs rhs, OdeOptions opt = {})
        : rhs_(std::move(rhs)),
          opt_(opt),
          stepper_(boost::numeric::odeint::make_controlled(
              opt.abs_tol, opt.rel_tol, boost::numeric::odeint::runge_kutta_fehlberg78<State>())) {}

    /// Advance from t to t_end (either direction). `after_step` may rescale the
    /// state (for linear systems) and may return false to stop early.
    template <class AfterStep>
    void advance(State& x, double& t, double t_end, double& dt, AfterStep&& after_step) {
        namespace ode = boost::numeric::odeint;
        const double dir = t_end >= t ? 1.0 : -1.0;
        const double scale = std::max(std::abs(t_end - t), std::abs(t_end)) + 1e-300;
        if (dt == 0.0 || dt * dir <= 0.0) dt = dir * std::abs(t_end - t) * 1e-3;
        auto sys = [this](const State& s, State& ds, double tt) { rhs_(s, ds, tt); };
        while ((t_end - t) * dir > 0.0) {
            if (++steps_ > opt_.max_steps) throw NumericalError("ODE step budget exhausted");
            double h = dt;
            if ((t + h - t_end) * dir > 0.0) h = t_end - t;
            const double t_before = t;
            State trial = x;
            double tt = t;
            const auto res = stepper_.try_step(sys, trial, tt, h);
            if (res == ode::success) {
                x = trial;
                t = ((t_end - tt) * dir <= 1e-16 * scale) ? t_end : tt;
                dt = h;  // stepper's proposal for the next step
                if (!after_step(x, t)) return;
            } else {
                dt = h;
                if (std::abs(dt) < opt_.min_step_fraction * scale)
                    throw NumericalError("ODE step underflow at t=" + std::to_string(t_before));
            }
        }
    }

    void advance(State& x, double& t, double t_end, double& dt) {
        advance(x, t, t_end, dt, [](State&, double) { return true; });
    }

    std::size_t steps() const noexcept { return steps_; }

private:
    Rhs rhs_;
    OdeOptions opt_;
    boost::numeric::odeint::controlled_runge_kutta<boost::numeric::odeint::runge_kutta_fehlberg78<State>> stepper_;
    std::size_t steps_ = 0;
};

}  // namespace slg
