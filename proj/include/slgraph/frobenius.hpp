#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "slgraph/graph_model.hpp"
#include "slgraph/polynomial.hpp"

namespace slg {

/// Local solution value and flux F = p y' (derivative in the edge coordinate x).
struct LocalValue {
    double y = 0.0;
    double flux = 0.0;
};

namespace detail {

/// r(d) = q(x(d)) - lambda as a polynomial in the distance d from the endpoint.
inline Polynomial local_r(const Edge& e, Side side, double lambda) {
    const Polynomial qd = side == Side::Left ? e.q.poly().compose_affine(e.p.a, 1.0)
                                             : e.q.poly().compose_affine(e.p.b, -1.0);
    return qd - Polynomial::constant(lambda);
}

inline double series_radius(const std::vector<std::vector<double>>& series, double cap, double tol) {
    double r = cap;
    for (const auto& c : series) {
        const std::size_t K = c.size() - 1;
        for (std::size_t k = (K > 3 ? K - 3 : 1); k <= K; ++k)
            if (c[k] != 0.0) r = std::min(r, std::pow(tol / std::abs(c[k]), 1.0 / static_cast<double>(k)));
    }
    return r;
}

}  // namespace detail

/// Frobenius pair at an order-1 (LC) endpoint for P y = lambda y:
///   U = y1 = sum a_k d^k, a_0 = 1          traces (g, f) = (1, 0)
///   V = sigma (y1 log d + w) / psi0,        traces (g, f) = (0, 1)
/// with w = sum b_k d^k, b_0 = 0, and sigma = +1 at the left end, -1 at the right end.
class LcFrobenius {
public:
    LcFrobenius(const Edge& e, Side side, double lambda, unsigned K = 12, double tol = 1e-12)
        : side_(side), sigma_(side == Side::Left ? 1.0 : -1.0), lambda_(lambda), K_(K) {
        if (e.p.order(side) != 1)
            throw InputError("edge " + e.id, std::string("Frobenius pair requested at a non-LC endpoint (") +
                                                 to_string(side) + ")");
        psi_ = e.p.regular_factor(side);
        r_ = detail::local_r(e, side, lambda);
        psi0_ = psi_.coeff(0);
        if (!(psi0_ > 0.0)) throw NumericalError("Frobenius recurrence breakdown: psi(0) <= 0");

        a_.assign(K + 1, 0.0);
        b_.assign(K + 1, 0.0);
        a_[0] = 1.0;
        for (unsigned n = 1; n <= K; ++n) {
            const double nn = n;
            double sa = 0.0, sb = 0.0;
            for (unsigned k = 0; k < n; ++k) {
                sa += r_.coeff(n - 1 - k) * a_[k];
                sb += r_.coeff(n - 1 - k) * b_[k];
            }
            for (unsigned k = 1; k < n; ++k) {
                sa -= nn * psi_.coeff(n - k) * k * a_[k];
                sb -= nn * psi_.coeff(n - k) * k * b_[k];
            }
            a_[n] = sa / (nn * nn * psi0_);
            // forcing from the logarithmic branch: psi y1' + (psi y1)'
            double forcing = 0.0, s_n = 0.0;
            for (unsigned k = 1; k <= n; ++k) forcing += psi_.coeff(n - k) * k * a_[k];
            for (unsigned k = 0; k <= n; ++k) s_n += psi_.coeff(n - k) * a_[k];
            forcing += nn * s_n;
            b_[n] = (sb - forcing) / (nn * nn * psi0_);
            if (!std::isfinite(a_[n]) || !std::isfinite(b_[n]))
                throw NumericalError("Frobenius recurrence breakdown at n=" + std::to_string(n));
        }
        radius_ = detail::series_radius({a_, b_}, 0.1 * e.p.length(), tol);
    }

    /// Matching radius: the series is used for d <= radius().
    double radius() const noexcept { return radius_; }
    unsigned order() const noexcept { return K_; }
    double psi0() const noexcept { return psi0_; }
    double lambda() const noexcept { return lambda_; }
    const std::vector<double>& a() const noexcept { return a_; }
    const std::vector<double>& b() const noexcept { return b_; }

    LocalValue u(double d) const {
        double y = 0.0, yd = 0.0;
        horner(a_, d, y, yd);
        return {y, sigma_ * d * psi_(d) * yd};
    }

    LocalValue v(double d) const {
        double y1 = 0.0, y1d = 0.0, w = 0.0, wd = 0.0;
        horner(a_, d, y1, y1d);
        horner(b_, d, w, wd);
        const double L = std::log(d);
        const double y = sigma_ * (y1 * L + w) / psi0_;
        // F = p * y2_d / psi0 with p = d psi
        const double flux = psi_(d) * (d * y1d * L + y1 + d * wd) / psi0_;
        return {y, flux};
    }

    /// Sup-norm residual of -(p y')' + (q - lambda) y for the truncated U and V series on (0, dmax].
    double residual(double dmax, int samples = 200) const {
        const Polynomial A(a_), B(b_), D({0.0, 1.0});
        const Polynomial G1 = D * psi_ * A.derivative();
        const Polynomial res1 = G1.derivative() - r_ * A;
        const Polynomial res2_reg = psi_ * A.derivative() + (psi_ * A).derivative() +
                                    (D * psi_ * B.derivative()).derivative() - r_ * B;
        double worst = 0.0;
        for (int i = 1; i <= samples; ++i) {
            const double d = dmax * std::pow(1e-6, 1.0 - static_cast<double>(i) / samples);
            worst = std::max(worst, std::abs(res1(d)));
            worst = std::max(worst, std::abs(res1(d) * std::log(d) + res2_reg(d)) / psi0_);
        }
        return worst;
    }

private:
    static void horner(const std::vector<double>& c, double d, double& val, double& der) {
        val = 0.0;
        der = 0.0;
        for (std::size_t k = c.size(); k-- > 0;) {
            der = der * d + val;
            val = val * d + c[k];
        }
    }

    Side side_;
    double sigma_;
    double lambda_;
    unsigned K_;
    Polynomial psi_, r_;
    double psi0_ = 1.0;
    std::vector<double> a_, b_;
    double radius_ = 0.0;
};

/// Singular comparison solution at an LC endpoint: the lambda = 0 V-branch, so that
/// P v = 0 near the endpoint and p v' -> 1 in the edge coordinate. The additive
/// constant is fixed by b_0 = 0 (pure logarithm plus an analytic part vanishing at d = 0).
class ComparisonSolution {
public:
    ComparisonSolution(const Edge& e, Side side, unsigned K = 12)
        : series_(e, side, 0.0, K), side_(side), endpoint_(e.endpoint(side)), psi_(e.p.regular_factor(side)) {}

    Side side() const noexcept { return side_; }
    unsigned truncation_order() const noexcept { return series_.order(); }
    double matching_radius() const noexcept { return series_.radius(); }
    double psi0() const noexcept { return series_.psi0(); }
    double residual() const { return series_.residual(series_.radius()); }

    double distance(double x) const { return side_ == Side::Left ? x - endpoint_ : endpoint_ - x; }

    /// v and p v' at distance d from the endpoint.
    LocalValue at_distance(double d) const { return series_.v(d); }
    LocalValue at(double x) const { return series_.v(distance(x)); }

    /// v' in the edge coordinate.
    double derivative_at_distance(double d) const { return series_.v(d).flux / (d * psi_(d)); }

    const LcFrobenius& series() const noexcept { return series_; }

private:
    LcFrobenius series_;
    Side side_;
    double endpoint_;
    Polynomial psi_;
};

/// Square-integrable solution at an order-2 (LP) endpoint, y = d^s sum a_n d^n with the
/// larger indicial root s(s+1) psi0 = r0. Requires lambda below q(c) + psi0/4.
class Lp2Frobenius {
public:
    Lp2Frobenius(const Edge& e, Side side, double lambda, unsigned K = 12, double tol = 1e-12)
        : sigma_(side == Side::Left ? 1.0 : -1.0) {
        if (e.p.order(side) != 2)
            throw InputError("edge " + e.id, "order-2 series requested at an endpoint of another order");
        psi_ = e.p.regular_factor(side);
        const Polynomial r = detail::local_r(e, side, lambda);
        const double psi0 = psi_.coeff(0);
        const double disc = 1.0 + 4.0 * r.coeff(0) / psi0;
        if (!(disc > 0.0))
            throw InputError("edge " + e.id, "spectral parameter at or above the essential threshold of the " +
                                                 std::string(to_string(side)) + " endpoint");
        s_ = 0.5 * (-1.0 + std::sqrt(disc));
        a_.assign(K + 1, 0.0);
        a_[0] = 1.0;
        for (unsigned n = 1; n <= K; ++n) {
            double acc = 0.0;
            for (unsigned k = 0; k < n; ++k)
                acc += (r.coeff(n - k) - (n + s_ + 1.0) * (k + s_) * psi_.coeff(n - k)) * a_[k];
            a_[n] = acc / (psi0 * n * (n + 2.0 * s_ + 1.0));
            if (!std::isfinite(a_[n])) throw NumericalError("order-2 recurrence breakdown at n=" + std::to_string(n));
        }
        radius_ = detail::series_radius({a_}, 0.1 * e.p.length(), tol);
    }

    double exponent() const noexcept { return s_; }
    double radius() const noexcept { return radius_; }

    LocalValue at(double d) const {
        double val = 0.0, der = 0.0;  // series part and its derivative
        for (std::size_t k = a_.size(); k-- > 0;) {
            der = der * d + val;
            val = val * d + a_[k];
        }
        const double ds = std::pow(d, s_);
        const double y = ds * val;
        // y_d = d^{s-1} (s val + d der); p = d^2 psi
        const double yd = std::pow(d, s_ - 1.0) * (s_ * val + d * der);
        return {y, sigma_ * d * d * psi_(d) * yd};
    }

private:
    double sigma_;
    double s_ = 0.0;
    Polynomial psi_;
    std::vector<double> a_;
    double radius_ = 0.0;
};

/// Lower edge of the essential spectrum contributed by an LP endpoint (q(c) + psi0/4 for
/// order 2, q(c) for higher orders), or +infinity for non-LP endpoints.
inline double essential_threshold(const Edge& e, Side side) {
    const unsigned m = e.p.order(side);
    if (m < 2) return INFINITY;
    const double qc = e.q.value(e.endpoint(side));
    if (m == 2) return qc + 0.25 * e.p.regular_factor(side).coeff(0);
    return qc;
}

}  // namespace slg
