#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "slgraph/boundary_forms.hpp"
#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/frobenius.hpp"
#include "slgraph/numerics.hpp"

namespace slg {

struct FundamentalOptions {
    unsigned series_order = 12;
    double rel_tol = 1e-11;
    double abs_tol = 1e-14;
    double liouville_decay = 20.0;  // start of the decaying solution at order >= 3 endpoints
};

/// Solutions of P y = lambda y on one edge, one column per non-LP endpoint.
///  * both ends non-LP: columns are the u-type (g,f) = (1,0) and v-type (0,1) solutions of
///    the left endpoint;
///  * one LP end: the single column is the square-integrable solution at that end;
///  * both ends LP: no column; `phase` is the Pruefer-type angle difference of the two
///    square-integrable solutions at the midpoint (eigenvalue iff it is a multiple of pi).
/// Every column is scaled by positive factors only, so it is continuous in lambda.
struct EdgeFundamental {
    int columns = 0;
    bool has_trace[2] = {false, false};
    Eigen::Matrix2d left = Eigen::Matrix2d::Zero();   // rows g, f at the left end
    Eigen::Matrix2d right = Eigen::Matrix2d::Zero();  // rows g, f at the right end
    double phase = 0.0;
    int renormalizations = 0;
};

namespace detail {

using State4 = std::array<double, 4>;

/// Propagates up to two (y, F) columns in x from x0 to x1, dividing a column by its size
/// whenever it exceeds 1e60; the accumulated factors are multiplied into scale[].
inline void propagate(const Edge& e, double lambda, State4& s, double x0, double x1, const FundamentalOptions& opt,
                      double scale[2], int& renorm) {
    OdeOptions oo;
    oo.rel_tol = opt.rel_tol;
    oo.abs_tol = opt.abs_tol;
    AdaptiveIntegrator<4> integ(
        [&e, lambda](const State4& y, State4& dy, double x) {
            const double p = e.p.value(x), r = e.q.value(x) - lambda;
            dy[0] = y[1] / p;
            dy[1] = r * y[0];
            dy[2] = y[3] / p;
            dy[3] = r * y[2];
        },
        oo);
    double t = x0, dt = 0.0;
    integ.advance(s, t, x1, dt, [&](State4& y, double) {
        for (int c = 0; c < 2; ++c) {
            const double m = std::max(std::abs(y[2 * c]), std::abs(y[2 * c + 1]));
            if (m > 1e60) {
                y[2 * c] /= m;
                y[2 * c + 1] /= m;
                scale[c] /= m;
                ++renorm;
            }
        }
        return true;
    });
}

/// Start distance and value of the square-integrable solution at an LP endpoint.
inline std::pair<double, LocalValue> lp_start(const Edge& e, Side side, double lambda, const FundamentalOptions& opt) {
    const unsigned m = e.p.order(side);
    if (m == 2) {
        const Lp2Frobenius f(e, side, lambda, opt.series_order);
        const double d = std::min(f.radius(), 0.05 * e.p.length());
        return {d, f.at(d)};
    }
    // Order >= 3: WKB data at d0 where the Liouville decay integral from d0 to d1 reaches the target.
    const Polynomial psi = e.p.regular_factor(side);
    const Polynomial r = local_r(e, side, lambda);
    const double L = e.p.length(), d1 = 0.05 * L;
    auto kappa = [&](double d) { return std::sqrt(std::max(r(d), 0.0) / (std::pow(d, m) * psi(d))); };
    auto decay = [&](double d0) {
        // integrate in log d
        return gauss_integrate([&](double s) { const double d = std::exp(s); return kappa(d) * d; }, std::log(d0),
                               std::log(d1), 30);
    };
    double lo = 1e-14 * L, hi = d1;
    if (decay(lo) < opt.liouville_decay)
        throw NumericalError("no decaying start found at the " + std::string(to_string(side)) + " end of edge " + e.id);
    for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        (decay(mid) >= opt.liouville_decay ? lo : hi) = mid;
    }
    const double d0 = lo;
    const double p = std::pow(d0, m) * psi(d0);
    const double dp = m * std::pow(d0, m - 1.0) * psi(d0) + std::pow(d0, m) * psi.derivative()(d0);
    const double yd_over_y = kappa(d0) - dp / (4.0 * p);
    const double sigma = side == Side::Left ? 1.0 : -1.0;
    return {d0, LocalValue{1.0, sigma * p * yd_over_y}};
}

/// Basis (U, V) at a non-LP endpoint and the distance at which it is evaluated.
struct EndpointPair {
    double d = 0.0;
    LocalValue U, V;
};

inline EndpointPair trace_pair(const Edge& e, Side side, double lambda, const FundamentalOptions& opt) {
    if (e.p.order(side) == 0) return {0.0, {1.0, 0.0}, {0.0, 1.0}};
    const LcFrobenius f(e, side, lambda, opt.series_order);
    const double d = std::min(f.radius(), 0.05 * e.p.length());
    return {d, f.u(d), f.v(d)};
}

/// Express (y, F) at the pair's evaluation point in the (U, V) basis: returns (g, f).
inline std::pair<double, double> to_traces(const EndpointPair& P, double y, double F) {
    const double det = P.U.y * P.V.flux - P.V.y * P.U.flux;
    return {(y * P.V.flux - P.V.y * F) / det, (P.U.y * F - P.U.flux * y) / det};
}

}  // namespace detail

inline EdgeFundamental edge_fundamental_system(const Edge& e, double lambda, const FundamentalOptions& opt = {}) {
    EdgeFundamental out;
    const bool lp_l = e.p.order(Side::Left) >= 2, lp_r = e.p.order(Side::Right) >= 2;
    out.has_trace[0] = !lp_l;
    out.has_trace[1] = !lp_r;
    out.columns = (!lp_l) + (!lp_r);
    const double a = e.p.a, b = e.p.b;

    if (!lp_l) {
        const auto PL = detail::trace_pair(e, Side::Left, lambda, opt);
        if (!lp_r) {
            const auto PR = detail::trace_pair(e, Side::Right, lambda, opt);
            detail::State4 s{PL.U.y, PL.U.flux, PL.V.y, PL.V.flux};
            double scale[2] = {1.0, 1.0};
            detail::propagate(e, lambda, s, a + PL.d, b - PR.d, opt, scale, out.renormalizations);
            for (int c = 0; c < 2; ++c) {
                const auto [g, f] = detail::to_traces(PR, s[2 * c], s[2 * c + 1]);
                out.right(0, c) = g;
                out.right(1, c) = f;
                out.left(c, c) = scale[c];  // left traces (1,0) and (0,1) times the applied factor
            }
            return out;
        }
        // right end LP: propagate its decaying solution to the left pair
        const auto [d0, val] = detail::lp_start(e, Side::Right, lambda, opt);
        detail::State4 s{val.y, val.flux, 0.0, 0.0};
        double scale[2] = {1.0, 1.0};
        detail::propagate(e, lambda, s, b - d0, a + PL.d, opt, scale, out.renormalizations);
        const auto [g, f] = detail::to_traces(PL, s[0], s[1]);
        out.left(0, 0) = g;
        out.left(1, 0) = f;
        return out;
    }
    if (!lp_r) {
        const auto PR = detail::trace_pair(e, Side::Right, lambda, opt);
        const auto [d0, val] = detail::lp_start(e, Side::Left, lambda, opt);
        detail::State4 s{val.y, val.flux, 0.0, 0.0};
        double scale[2] = {1.0, 1.0};
        detail::propagate(e, lambda, s, a + d0, b - PR.d, opt, scale, out.renormalizations);
        const auto [g, f] = detail::to_traces(PR, s[0], s[1]);
        out.right(0, 0) = g;
        out.right(1, 0) = f;
        return out;
    }
    // both LP: Pruefer angles of the two decaying solutions at the midpoint
    const double mid = 0.5 * (a + b);
    const auto [dl, vl] = detail::lp_start(e, Side::Left, lambda, opt);
    const auto [dr, vr] = detail::lp_start(e, Side::Right, lambda, opt);
    detail::State4 sl{vl.y, vl.flux, 0.0, 0.0}, sr{vr.y, vr.flux, 0.0, 0.0};
    double scale[2] = {1.0, 1.0};
    detail::propagate(e, lambda, sl, a + dl, mid, opt, scale, out.renormalizations);
    detail::propagate(e, lambda, sr, b - dr, mid, opt, scale, out.renormalizations);
    const double w = e.p.length() / std::max(e.p.value(mid), 1e-300);  // balances y against F
    out.phase = std::atan2(w * sl[1], sl[0]) - std::atan2(w * sr[1], sr[0]);
    return out;
}

// ---------------------------------------------------------------------------
// Secular matrix, determinant and crossing counts
// ---------------------------------------------------------------------------

/// Trace frame T(lambda): 2d x d matrix of traces (g, f per endpoint in layout order)
/// of the solution columns of every edge, plus the both-LP edge phases.
struct SecularFrame {
    Eigen::MatrixXd T;
    std::vector<std::pair<std::size_t, int>> column_edge;  // (edge, local column)
    std::vector<double> lp_phases;                         // one per both-LP edge
    std::vector<std::size_t> lp_edges;
    std::vector<std::complex<double>> edge_dets;           // det(X_e + i Y_e) per edge with columns
    std::vector<std::size_t> det_edges;
};

inline SecularFrame secular_frame(const MetricGraph& g, const TraceLayout& layout, double lambda,
                                  const FundamentalOptions& opt = {}) {
    SecularFrame fr;
    const std::size_t d = layout.size();
    fr.T = Eigen::MatrixXd::Zero(2 * d, d);
    std::size_t col = 0;
    for (std::size_t ei = 0; ei < g.edges().size(); ++ei) {
        const auto F = edge_fundamental_system(g.edge(ei), lambda, opt);
        if (F.columns == 0) {
            fr.lp_phases.push_back(F.phase);
            fr.lp_edges.push_back(ei);
            continue;
        }
        std::vector<std::size_t> rows;
        for (Side s : {Side::Left, Side::Right}) {
            if (!F.has_trace[s == Side::Left ? 0 : 1]) continue;
            rows.push_back(*layout.index_of({ei, s}));
        }
        Eigen::MatrixXcd Z(F.columns, F.columns);
        for (int c = 0; c < F.columns; ++c) {
            int zr = 0;
            for (Side s : {Side::Left, Side::Right}) {
                if (!F.has_trace[s == Side::Left ? 0 : 1]) continue;
                const auto& M = s == Side::Left ? F.left : F.right;
                const std::size_t k = *layout.index_of({ei, s});
                const double gv = M(0, c), fv = M(1, c);
                fr.T(2 * k, col + c) = gv;
                fr.T(2 * k + 1, col + c) = fv;
                Z(zr++, c) = std::complex<double>(gv, layout.epsilon[k] * fv);
            }
            fr.column_edge.emplace_back(ei, c);
        }
        for (int c = 0; c < F.columns; ++c) {
            const double n = fr.T.col(col + c).norm();
            if (n > 0) {
                fr.T.col(col + c) /= n;
                Z.col(c) /= n;
            }
        }
        fr.edge_dets.push_back(Z.determinant());
        fr.det_edges.push_back(ei);
        col += F.columns;
    }
    return fr;
}

/// det(C_n T(lambda)) with C_n the row-normalized condition matrix and unit columns of T.
inline double secular_det(const MetricGraph& g, const BoundaryConditionSet& bc, double lambda,
                          const FundamentalOptions& opt = {}) {
    const auto fr = secular_frame(g, bc.layout, lambda, opt);
    if (bc.rows.rows() == 0) return 1.0;
    Eigen::MatrixXd C = bc.rows;
    for (Eigen::Index i = 0; i < C.rows(); ++i) C.row(i).normalize();
    return (C * fr.T).determinant();
}

/// Multiplicity-aware eigenvalue counting between two spectral parameters using the
/// unitary (Souriau) representation of Lagrangian subspaces of the trace space.
class SecularCounter {
public:
    SecularCounter(const MetricGraph& g, const BoundaryConditionSet& bc, FundamentalOptions opt = {})
        : g_(g), layout_(bc.layout), opt_(opt) {
        const std::size_t d = layout_.size();
        if (d > 0) {
            // Lagrangian of the conditions: null space of C in (g, f) coordinates.
            Eigen::FullPivLU<Eigen::MatrixXd> lu(bc.rows);
            Eigen::MatrixXd N = lu.kernel();
            if (N.cols() != static_cast<Eigen::Index>(d))
                throw InvariantError("boundary conditions do not cut out a d-dimensional subspace");
            W_bc_ = unitary_of(N);
        }
    }

    struct Sample {
        double lambda;
        std::vector<std::complex<double>> dets;
        std::vector<double> phases;
        Eigen::VectorXd angles;  // eigenangles of W_bc^* W(lambda) in [0, 2 pi)
    };

    Sample sample(double lambda) const {
        Sample s;
        s.lambda = lambda;
        const auto fr = secular_frame(g_, layout_, lambda, opt_);
        s.dets = fr.edge_dets;
        s.phases = fr.lp_phases;
        if (layout_.size() > 0) {
            const Eigen::MatrixXcd U = W_bc_.adjoint() * unitary_of(fr.T);
            Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(U);
            s.angles.resize(U.rows());
            for (Eigen::Index i = 0; i < U.rows(); ++i) {
                double a = std::arg(es.eigenvalues()(i));
                if (a < 0) a += 2 * std::numbers::pi;
                s.angles(i) = a;
            }
        }
        return s;
    }

    /// Signed distance of the eigenangle nearest to a crossing (0 mod 2 pi), in (-pi, pi].
    static double nearest_angle(const Sample& s) {
        double best = INFINITY;
        for (Eigen::Index i = 0; i < s.angles.size(); ++i) {
            double a = s.angles(i);
            if (a > std::numbers::pi) a -= 2 * std::numbers::pi;
            if (std::abs(a) < std::abs(best)) best = a;
        }
        return best;
    }

    struct Count {
        double raw = 0.0;   // before rounding; should be near an integer
        int crossings = 0;
        int evaluations = 0;
    };

    /// Number of eigenvalues (with multiplicity) in (lo, hi].
    Count count(double lo, double hi, int max_evaluations = 200000) const {
        Count c;
        Sample a = sample(lo);
        const Sample first = a;
        double total_theta = 0.0;                       // unwrapped -2 sum arg det Z_e
        std::vector<double> lp_total(a.phases.size(), 0.0);
        double h = (hi - lo) / 1024.0;
        double lam = lo;
        const double h_min = 1e-13 * std::max(1.0, std::abs(hi));
        ++c.evaluations;
        while (lam < hi) {
            const double step = std::min(h, hi - lam);
            const Sample b = sample(lam + step);
            ++c.evaluations;
            if (c.evaluations > max_evaluations) throw NumericalError("secular scan exceeded its evaluation budget");
            double worst = 0.0;
            std::vector<double> dargs(a.dets.size());
            for (std::size_t k = 0; k < a.dets.size(); ++k) {
                dargs[k] = std::arg(b.dets[k] / a.dets[k]);
                worst = std::max(worst, std::abs(dargs[k]));
            }
            std::vector<double> dph(a.phases.size());
            for (std::size_t k = 0; k < a.phases.size(); ++k) {
                dph[k] = std::remainder(b.phases[k] - a.phases[k], 2 * std::numbers::pi);
                worst = std::max(worst, std::abs(dph[k]));
            }
            if (worst > std::numbers::pi / 4 && step > h_min) {
                h = 0.5 * step;
                continue;
            }
            for (double v : dargs) total_theta += -2.0 * v;
            for (std::size_t k = 0; k < dph.size(); ++k) lp_total[k] += dph[k];
            lam += step;
            a = b;
            if (worst < std::numbers::pi / 16) h = 2.0 * step;
        }
        double raw = 0.0;
        if (first.angles.size() > 0) {
            const double sum_alpha = first.angles.sum(), sum_beta = a.angles.sum();
            raw += std::abs(total_theta - (sum_beta - sum_alpha)) / (2 * std::numbers::pi);
        }
        for (std::size_t k = 0; k < lp_total.size(); ++k) {
            // crossings of multiples of pi by a monotone angle
            const double p0 = first.phases[k], p1 = p0 + lp_total[k];
            raw += std::abs(std::floor(p1 / std::numbers::pi) - std::floor(p0 / std::numbers::pi));
        }
        c.raw = raw;
        c.crossings = static_cast<int>(std::lround(raw));
        return c;
    }

    /// Root of the secular problem inside [lo, hi] (assumes a crossing there).
    double locate(double lo, double hi, double tol_rel = 1e-13) const {
        auto f = [this](double lam) { return crossing_function(lam); };
        double flo = f(lo), fhi = f(hi);
        if (flo == 0.0) return lo;
        if (fhi == 0.0) return hi;
        if ((flo > 0) == (fhi > 0)) return 0.5 * (lo + hi);
        boost::uintmax_t iters = 100;
        auto tol = [tol_rel](double x, double y) { return std::abs(x - y) <= tol_rel * std::max(1.0, std::abs(x)); };
        const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
        return 0.5 * (r.first + r.second);
    }

    const TraceLayout& layout() const noexcept { return layout_; }

private:
    /// Signed function vanishing at eigenvalues: nearest eigenangle, or sin of an LP-edge phase.
    double crossing_function(double lam) const {
        const Sample s = sample(lam);
        double best = INFINITY;
        if (s.angles.size() > 0) best = nearest_angle(s);
        for (double ph : s.phases) {
            const double v = std::remainder(ph, std::numbers::pi);
            if (std::abs(v) < std::abs(best)) best = v;
        }
        return best;
    }

    /// (X - iY)(X + iY)^{-1} for a frame with rows (g, f) per endpoint; Y carries eps f.
    Eigen::MatrixXcd unitary_of(const Eigen::MatrixXd& frame) const {
        const Eigen::Index d = static_cast<Eigen::Index>(layout_.size());
        Eigen::MatrixXcd Z(d, frame.cols());
        for (Eigen::Index k = 0; k < d; ++k)
            for (Eigen::Index c = 0; c < frame.cols(); ++c)
                Z(k, c) = std::complex<double>(frame(2 * k, c), layout_.epsilon[k] * frame(2 * k + 1, c));
        return Z.conjugate() * Z.inverse();
    }

    const MetricGraph& g_;
    TraceLayout layout_;
    FundamentalOptions opt_;
    Eigen::MatrixXcd W_bc_;
};

}  // namespace slg
