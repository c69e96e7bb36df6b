#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "slgraph/boundary_forms.hpp"
#include "slgraph/endpoint_analysis.hpp"
#include "slgraph/frobenius.hpp"
#include "slgraph/parallel.hpp"
#include "slgraph/secular.hpp"

namespace slg {

struct SolverOptions {
    int mesh_layers = 40;      // geometric layers toward each singular endpoint
    double grading = 0.75;     // ratio between consecutive layers
    int refine = 1;            // uniform refinement levels after the base mesh
    double kappa = 0.5;        // base element size in units of the local wavelength / 2 pi
    int min_elements = 16;
    unsigned series_order = 12;
    int workers = 1;
    int secular_chunks = 32;   // fixed split of the total secular count (independent of workers)
};

struct EigenEntry {
    double lambda = 0.0;           // Galerkin value on the finest mesh
    double lambda_secular = 0.0;   // root of the secular problem inside the bracket
    int multiplicity = 1;
    double drift = 0.0;            // change under the last refinement
    double half_width = 0.0;       // confirmation bracket half-width
    double residual = 0.0;         // |lambda - lambda_secular| / max(1, |lambda|)
    int secular_count = 0;         // crossings counted in the bracket group
    bool confirmed = false;
    bool converged = false;        // drift <= max(1e-8 |lambda|, 1e-6)
};

struct MeshLevel {
    int elements = 0;
    int dofs = 0;
};

struct Spectrum {
    std::vector<EigenEntry> eigenvalues;  // ascending, lambda <= lambda_max
    double lambda_max = 0.0;
    double lambda_searched = 0.0;        // upper end used for confirmation
    double lower_bound = 0.0;            // no eigenvalue below (Galerkin and secular)
    std::string extension;
    std::vector<MeshLevel> levels;
    SolverOptions options;
    int galerkin_total = 0;              // with multiplicity, up to lambda_count
    int secular_total = 0;
    double lambda_count = 0.0;           // upper end of the total comparison
    bool consistent = false;             // all brackets confirmed and totals equal
    std::string diagnostics;
};

/// N(lambda): eigenvalues <= lambda with multiplicity.
inline int counting_function(const Spectrum& s, double lambda) {
    if (lambda > s.lambda_max)
        throw InputError("counting_function", "lambda=" + std::to_string(lambda) + " beyond the searched range " +
                                                   std::to_string(s.lambda_max));
    int n = 0;
    for (const auto& e : s.eigenvalues)
        if (e.lambda <= lambda) n += e.multiplicity;
    return n;
}

/// Lowest essential-spectrum threshold over the LP endpoints (+infinity if none).
inline double essential_threshold(const MetricGraph& g) {
    double t = INFINITY;
    for (const auto& e : g.edges())
        for (Side s : {Side::Left, Side::Right}) t = std::min(t, essential_threshold(e, s));
    return t;
}

// ---------------------------------------------------------------------------
// Meshes
// ---------------------------------------------------------------------------

namespace detail {

/// Cumulative int p^{-1/2} on an auxiliary grid; LC ends handled with d = u^2.
struct LiouvilleTable {
    std::vector<double> x, tau;
};

inline LiouvilleTable liouville_table(const Edge& e, double x0, double x1, int n = 2000) {
    LiouvilleTable t;
    const bool lc0 = x0 == e.p.a && e.p.order(Side::Left) == 1;
    const bool lc1 = x1 == e.p.b && e.p.order(Side::Right) == 1;
    const double L = x1 - x0;
    t.x.resize(n + 1);
    t.tau.assign(n + 1, 0.0);
    for (int i = 0; i <= n; ++i) {
        const double u = static_cast<double>(i) / n;
        t.x[i] = x0 + L * (3 * u * u - 2 * u * u * u);
    }
    t.x[n] = x1;
    auto inv = [&e](double x) { return 1.0 / std::sqrt(e.p.value(x)); };
    for (int i = 0; i < n; ++i) {
        const double lo = t.x[i], hi = t.x[i + 1];
        double piece;
        if (i == 0 && lc0) {
            const Polynomial psi = e.p.regular_factor(Side::Left);
            piece = gauss_integrate([&](double u) { return 2.0 / std::sqrt(psi(u * u)); }, 0.0, std::sqrt(hi - lo), 10);
        } else if (i == n - 1 && lc1) {
            const Polynomial psi = e.p.regular_factor(Side::Right);
            piece = gauss_integrate([&](double u) { return 2.0 / std::sqrt(psi(u * u)); }, 0.0, std::sqrt(hi - lo), 10);
        } else {
            piece = gauss_integrate(inv, lo, hi, 10);
        }
        t.tau[i + 1] = t.tau[i] + piece;
    }
    return t;
}

inline std::vector<double> base_breaks(const Edge& e, double Lambda, const SolverOptions& opt) {
    const bool lp_l = e.p.order(Side::Left) >= 2, lp_r = e.p.order(Side::Right) >= 2;
    const double a = e.p.a, b = e.p.b, L = e.p.length();
    const double k = std::sqrt(std::max(Lambda, 1.0));
    std::vector<double> br;
    if (!lp_l && !lp_r) {
        const auto t = liouville_table(e, a, b);
        const double total = t.tau.back();
        const int n = std::max(opt.min_elements, static_cast<int>(std::ceil(total * k / opt.kappa)));
        br.push_back(a);
        std::size_t j = 0;
        for (int i = 1; i < n; ++i) {
            const double target = total * i / n;
            while (t.tau[j + 1] < target) ++j;
            const double s = (target - t.tau[j]) / (t.tau[j + 1] - t.tau[j]);
            br.push_back(t.x[j] + s * (t.x[j + 1] - t.x[j]));
        }
        br.push_back(b);
        return br;
    }
    // uniform in x, sized by the largest local wavenumber away from the LP ends
    const double x0 = lp_l ? a + 0.02 * L : a, x1 = lp_r ? b - 0.02 * L : b;
    double pmin = INFINITY;
    for (int i = 1; i < 400; ++i) pmin = std::min(pmin, e.p.value(x0 + (x1 - x0) * i / 400.0));
    const int n = std::max(opt.min_elements, static_cast<int>(std::ceil(L * k / (std::sqrt(pmin) * opt.kappa))));
    for (int i = 0; i <= n; ++i) br.push_back(a + L * i / n);
    br.back() = b;
    return br;
}

/// Cut-off profile chi = 1 on [0, w/2], 0 beyond w, quintic smoothstep between.
struct Cutoff {
    double w = 1.0;
    double value(double d) const {
        if (d <= 0.5 * w) return 1.0;
        if (d >= w) return 0.0;
        const double t = (d - 0.5 * w) / (0.5 * w);
        return 1.0 - t * t * t * (10 - 15 * t + 6 * t * t);
    }
    double d1(double d) const {
        if (d <= 0.5 * w || d >= w) return 0.0;
        const double t = (d - 0.5 * w) / (0.5 * w);
        return -30 * t * t * (1 - t) * (1 - t) / (0.5 * w);
    }
    double d2(double d) const {
        if (d <= 0.5 * w || d >= w) return 0.0;
        const double t = (d - 0.5 * w) / (0.5 * w);
        return -60 * t * (1 - t) * (1 - 2 * t) / (0.25 * w * w);
    }
};

/// Enrichment by chi * v at an LC endpoint, v the singular comparison solution.
struct Enrichment {
    Side side;
    std::size_t trace_index;
    Cutoff chi;
    ComparisonSolution v;
};

struct EdgeMesh {
    std::vector<double> breaks;
    std::vector<Enrichment> enrich;
};

inline EdgeMesh build_edge_mesh(const Edge& e, std::size_t edge_index, const TraceLayout& layout, double Lambda,
                                const SolverOptions& opt) {
    EdgeMesh m;
    std::vector<double> br = base_breaks(e, Lambda, opt);
    const double L = e.p.length();
    const double end_width[2] = {br[1] - br[0], br[br.size() - 1] - br[br.size() - 2]};
    for (Side s : {Side::Left, Side::Right}) {
        const unsigned ord = e.p.order(s);
        const double c = e.endpoint(s), sg = s == Side::Left ? 1.0 : -1.0;
        if (ord >= 1) {
            double d = end_width[s == Side::Left ? 0 : 1];
            for (int k = 0; k < opt.mesh_layers; ++k) {
                d *= opt.grading;
                br.push_back(c + sg * d);
            }
        }
        if (ord == 1) {
            Enrichment en{s, *layout.index_of({edge_index, s}), {}, ComparisonSolution(e, s, opt.series_order)};
            en.chi.w = std::min(en.v.matching_radius(), 0.25 * L);
            // the cut-off transition carries the steepest part of the corrected function
            for (int k = 0; k <= 8; ++k) br.push_back(c + sg * en.chi.w * (0.5 + k / 16.0));
            m.enrich.push_back(std::move(en));
        }
    }
    std::sort(br.begin(), br.end());
    for (double x : br)
        if (m.breaks.empty() || x - m.breaks.back() > 1e-13 * L) m.breaks.push_back(x);
    m.breaks.front() = e.p.a;
    m.breaks.back() = e.p.b;
    return m;
}

inline std::vector<double> refine_breaks(const std::vector<double>& br, int level) {
    if (level <= 0) return br;
    const int parts = 1 << level;
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
        for (int k = 0; k < parts; ++k) out.push_back(br[i] + (br[i + 1] - br[i]) * k / parts);
    out.push_back(br.back());
    return out;
}

// Cubic Lagrange element on Gauss-Lobatto nodes.
struct CubicElement {
    static constexpr int nodes = 4;
    std::array<double, 4> xi{-1.0, -1.0 / std::sqrt(5.0), 1.0 / std::sqrt(5.0), 1.0};

    void eval(double t, std::array<double, 4>& phi, std::array<double, 4>& dphi) const {
        for (int i = 0; i < 4; ++i) {
            double num = 1.0, den = 1.0, der = 0.0;
            for (int j = 0; j < 4; ++j) {
                if (j == i) continue;
                den *= xi[i] - xi[j];
            }
            for (int j = 0; j < 4; ++j) {
                if (j == i) continue;
                num *= t - xi[j];
                double prod = 1.0;
                for (int k = 0; k < 4; ++k)
                    if (k != i && k != j) prod *= t - xi[k];
                der += prod;
            }
            phi[i] = num / den;
            dphi[i] = der / den;
        }
    }
};

/// Lagrangian of the conditions in symplectic coordinates: regular (q, p) = (g, eps f),
/// LC (q, p) = (f, -eps g). The admissible q form span(Zq); on it q.p = eta^T S eta.
struct BoundaryEmbedding {
    Eigen::MatrixXd Zq;  // d x r, orthonormal columns
    Eigen::MatrixXd S;   // r x r, symmetric
    int r = 0;
};

inline BoundaryEmbedding boundary_embedding(const MetricGraph& g, const BoundaryConditionSet& bc) {
    BoundaryEmbedding be;
    const auto& lay = bc.layout;
    const Eigen::Index d = static_cast<Eigen::Index>(lay.size());
    if (d == 0) {
        be.Zq.resize(0, 0);
        be.S.resize(0, 0);
        return be;
    }
    Eigen::MatrixXd C(bc.rows.rows(), 2 * d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double eps = lay.epsilon[k];
        const bool lc = g.order(lay.endpoints[k]) == 1;
        if (!lc) {
            C.col(2 * k) = bc.rows.col(2 * k);
            C.col(2 * k + 1) = eps * bc.rows.col(2 * k + 1);
        } else {
            C.col(2 * k) = bc.rows.col(2 * k + 1);
            C.col(2 * k + 1) = -eps * bc.rows.col(2 * k);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
    const Eigen::MatrixXd N = svd.matrixV().rightCols(d);  // kernel (rank d assumed validated)
    Eigen::MatrixXd Nq(d, d), Np(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        Nq.row(k) = N.row(2 * k);
        Np.row(k) = N.row(2 * k + 1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> sq(Nq, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = sq.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv(i) > 1e-10 * std::max(1.0, sv(0));
    be.r = r;
    be.Zq = sq.matrixU().leftCols(r);
    // pseudo-inverse of Nq restricted to its range
    Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < r; ++i) pinv += sq.matrixV().col(i) * sq.matrixU().col(i).transpose() / sv(i);
    const Eigen::MatrixXd Sraw = be.Zq.transpose() * Np * pinv * be.Zq;
    be.S = 0.5 * (Sraw + Sraw.transpose());
    return be;
}

struct Triplet4 {
    int r, c;
    double k, m;
};

/// Assembled pencil (K, M) sharing one sparsity pattern.
struct Pencil {
    Eigen::SparseMatrix<double> K, M;
    int elements = 0;
};

inline Pencil assemble_pencil(const MetricGraph& g, const BoundaryConditionSet& bc, const BoundaryEmbedding& be,
                              const std::vector<EdgeMesh>& meshes, int level, int workers) {
    const auto& lay = bc.layout;
    const std::size_t E = g.edges().size();
    // free dofs per edge
    std::vector<std::vector<double>> breaks(E);
    std::vector<int> first_dof(E + 1, 0);
    std::vector<std::array<bool, 2>> constrained(E);
    for (std::size_t e = 0; e < E; ++e) {
        breaks[e] = refine_breaks(meshes[e].breaks, level);
        const int nodes = 3 * static_cast<int>(breaks[e].size() - 1) + 1;
        int free = nodes;
        for (int s = 0; s < 2; ++s) {
            const Side side = s == 0 ? Side::Left : Side::Right;
            constrained[e][s] = g.edge(e).p.order(side) == 0;
            free -= constrained[e][s];
        }
        first_dof[e + 1] = first_dof[e] + free;
    }
    const int n_free = first_dof[E], n = n_free + be.r;

    std::vector<std::vector<Triplet4>> parts(E);
    parallel_for(E, workers, [&](std::size_t e) {
        const Edge& edge = g.edge(e);
        const auto& br = breaks[e];
        const int nel = static_cast<int>(br.size() - 1), nodes = 3 * nel + 1;
        // node -> list of (global index, coefficient)
        auto node_map = [&](int node) {
            std::vector<std::pair<int, double>> out;
            const bool left = node == 0, right = node == nodes - 1;
            if ((left && constrained[e][0]) || (right && constrained[e][1])) {
                const std::size_t k = *lay.index_of({e, left ? Side::Left : Side::Right});
                for (int j = 0; j < be.r; ++j)
                    if (be.Zq(k, j) != 0.0) out.emplace_back(n_free + j, be.Zq(k, j));
                return out;
            }
            const int offset = constrained[e][0] ? 1 : 0;
            out.emplace_back(first_dof[e] + node - offset, 1.0);
            return out;
        };
        auto& T = parts[e];
        auto add = [&T](const std::vector<std::pair<int, double>>& a, const std::vector<std::pair<int, double>>& b,
                        double k, double m) {
            for (const auto& [i, ci] : a)
                for (const auto& [j, cj] : b) T.push_back({i, j, ci * cj * k, ci * cj * m});
        };
        const CubicElement el;
        const GaussRule& gr = gauss_rule(10);
        std::vector<std::pair<int, double>> enrich_map[2];
        for (std::size_t q = 0; q < meshes[e].enrich.size(); ++q) {
            const auto k = meshes[e].enrich[q].trace_index;
            for (int j = 0; j < be.r; ++j)
                if (be.Zq(k, j) != 0.0) enrich_map[q].emplace_back(n_free + j, be.Zq(k, j));
        }
        for (int el_i = 0; el_i < nel; ++el_i) {
            const double x0 = br[el_i], x1 = br[el_i + 1], h = x1 - x0;
            Eigen::Matrix4d Ke = Eigen::Matrix4d::Zero(), Me = Eigen::Matrix4d::Zero();
            Eigen::Vector4d bK[2], bM[2];
            double cK[2] = {0, 0}, cM[2] = {0, 0};
            bool touched[2] = {false, false};
            for (int q = 0; q < 2; ++q) {
                bK[q].setZero();
                bM[q].setZero();
            }
            for (std::size_t gp = 0; gp < gr.nodes.size(); ++gp) {
                const double t = gr.nodes[gp], w = gr.weights[gp] * 0.5 * h;
                const double x = x0 + 0.5 * (t + 1.0) * h;
                std::array<double, 4> phi, dphi;
                el.eval(t, phi, dphi);
                for (auto& v : dphi) v *= 2.0 / h;
                const double p = edge.p.value(x), qv = edge.q.value(x);
                for (int i = 0; i < 4; ++i)
                    for (int j = 0; j < 4; ++j) {
                        Ke(i, j) += w * (p * dphi[i] * dphi[j] + qv * phi[i] * phi[j]);
                        Me(i, j) += w * phi[i] * phi[j];
                    }
                for (std::size_t q = 0; q < meshes[e].enrich.size(); ++q) {
                    const auto& en = meshes[e].enrich[q];
                    const double c = edge.endpoint(en.side), sg = en.side == Side::Left ? 1.0 : -1.0;
                    const double d = sg * (x - c);
                    if (d >= en.chi.w) continue;
                    touched[q] = true;
                    const LocalValue v = en.v.at_distance(d);
                    const double chi = en.chi.value(d), chi1 = en.chi.d1(d), chi2 = en.chi.d2(d);
                    const double s = chi * v.y;
                    const double pd = sg * edge.p.derivative(x);
                    const double Ps = -(pd * chi1 + p * chi2) * v.y - 2.0 * sg * chi1 * v.flux;
                    for (int i = 0; i < 4; ++i) {
                        bK[q](i) += w * Ps * phi[i];
                        bM[q](i) += w * s * phi[i];
                    }
                    cK[q] += w * Ps * s;
                    cM[q] += w * s * s;
                }
            }
            std::array<std::vector<std::pair<int, double>>, 4> maps;
            for (int i = 0; i < 4; ++i) maps[i] = node_map(3 * el_i + i);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) add(maps[i], maps[j], Ke(i, j), Me(i, j));
            for (int q = 0; q < 2; ++q) {
                if (!touched[q] || enrich_map[q].empty()) continue;
                for (int i = 0; i < 4; ++i) {
                    add(maps[i], enrich_map[q], bK[q](i), bM[q](i));
                    add(enrich_map[q], maps[i], bK[q](i), bM[q](i));
                }
                add(enrich_map[q], enrich_map[q], cK[q], cM[q]);
            }
        }
    });
    std::vector<Eigen::Triplet<double>> tk, tm;
    for (const auto& P : parts)
        for (const auto& t : P) {
            tk.emplace_back(t.r, t.c, t.k);
            tm.emplace_back(t.r, t.c, t.m);
        }
    for (int i = 0; i < be.r; ++i)
        for (int j = 0; j < be.r; ++j) {
            tk.emplace_back(n_free + i, n_free + j, -be.S(i, j));
            tm.emplace_back(n_free + i, n_free + j, 0.0);
        }
    Pencil P;
    P.K.resize(n, n);
    P.M.resize(n, n);
    P.K.setFromTriplets(tk.begin(), tk.end());
    P.M.setFromTriplets(tm.begin(), tm.end());
    P.K.makeCompressed();
    P.M.makeCompressed();
    for (const auto& b : breaks) P.elements += static_cast<int>(b.size() - 1);
    return P;
}

/// Eigenvalues of the pencil via Sylvester inertia and shifted subspace iteration.
class PencilSolver {
public:
    explicit PencilSolver(const Pencil& P) : K_(P.K), M_(P.M), A_(P.K) {
        if (K_.nonZeros() != M_.nonZeros()) throw InvariantError("pencil matrices with different patterns");
        ldlt_.analyzePattern(A_);
    }

    int size() const { return static_cast<int>(K_.rows()); }

    /// Number of eigenvalues below sigma.
    int count_below(double sigma) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            factor(sigma);
            if (ldlt_.info() == Eigen::Success) {
                const auto& D = ldlt_.vectorD();
                int neg = 0;
                bool zero = false;
                for (Eigen::Index i = 0; i < D.size(); ++i) {
                    neg += D(i) < 0.0;
                    zero = zero || D(i) == 0.0;
                }
                if (!zero) return neg;
            }
            sigma += 1e-11 * std::max(1.0, std::abs(sigma)) * (attempt + 1);
        }
        throw NumericalError("singular shifted pencil at sigma=" + std::to_string(sigma));
    }

    struct Cluster {
        double lo, hi;
        int multiplicity;
        std::vector<double> values;
    };

    /// All eigenvalues in (lo, hi] grouped into clusters narrower than rel_tol.
    std::vector<Cluster> eigenvalues(double lo, double hi, double rel_tol) {
        std::vector<Cluster> out;
        const int nlo = count_below(lo), nhi = count_below(hi);
        isolate(lo, hi, nlo, nhi, rel_tol, out);
        return out;
    }

private:
    void factor(double sigma) {
        const double* k = K_.valuePtr();
        const double* m = M_.valuePtr();
        double* a = A_.valuePtr();
        for (Eigen::Index i = 0; i < K_.nonZeros(); ++i) a[i] = k[i] - sigma * m[i];
        ldlt_.factorize(A_);
    }

    void isolate(double lo, double hi, int nlo, int nhi, double rel_tol, std::vector<Cluster>& out) {
        const int m = nhi - nlo;
        if (m <= 0) return;
        const double scale = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
        if (hi - lo <= 1e-4 * scale) {
            if (auto vals = subspace(lo, hi, m, rel_tol)) {
                out.push_back({lo, hi, m, *vals});
                return;
            }
        }
        if (hi - lo <= rel_tol * scale) {
            out.push_back({lo, hi, m, std::vector<double>(m, 0.5 * (lo + hi))});
            return;
        }
        const double mid = 0.5 * (lo + hi);
        const int nmid = count_below(mid);
        isolate(lo, mid, nlo, nmid, rel_tol, out);
        isolate(mid, hi, nmid, nhi, rel_tol, out);
    }

    /// Shifted subspace iteration on the m eigenvalues known to lie in [lo, hi].
    std::optional<std::vector<double>> subspace(double lo, double hi, int m, double rel_tol) {
        const double sigma = 0.5 * (lo + hi);
        factor(sigma);
        if (ldlt_.info() != Eigen::Success) return std::nullopt;
        const int n = size();
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> nd;
        Eigen::MatrixXd X(n, m);
        for (int j = 0; j < m; ++j)
            for (int i = 0; i < n; ++i) X(i, j) = nd(rng);
        Eigen::VectorXd prev = Eigen::VectorXd::Constant(m, INFINITY);
        for (int it = 0; it < 25; ++it) {
            Eigen::MatrixXd Y(n, m);
            for (int j = 0; j < m; ++j) Y.col(j) = ldlt_.solve(M_ * X.col(j));
            // M-orthonormalize
            const Eigen::MatrixXd G = Y.transpose() * (M_ * Y);
            Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (G + G.transpose()));
            if (llt.info() != Eigen::Success) return std::nullopt;
            X = llt.matrixU().solve<Eigen::OnTheRight>(Y);
            const Eigen::MatrixXd H = X.transpose() * (K_ * X);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (H + H.transpose()));
            const Eigen::VectorXd vals = es.eigenvalues();
            X = X * es.eigenvectors();
            const double scale = std::max(1.0, std::abs(sigma));
            if ((vals - prev).cwiseAbs().maxCoeff() <= 0.1 * rel_tol * scale) {
                // inertia near an eigenvalue is only reliable to about 1e-8 relative
                for (int j = 0; j < m; ++j)
                    if (vals(j) < lo - 1e-7 * scale || vals(j) > hi + 1e-7 * scale) return std::nullopt;
                return std::vector<double>(vals.data(), vals.data() + m);
            }
            prev = vals;
        }
        return std::nullopt;
    }

    Eigen::SparseMatrix<double> K_, M_, A_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

}  // namespace detail

/// Galerkin eigenvalues (with multiplicity, ascending) of the pencil at one refinement level.
struct GalerkinLevel {
    std::vector<double> values;
    MeshLevel size;
};

inline std::vector<detail::EdgeMesh> build_meshes(const MetricGraph& g, const TraceLayout& layout, double Lambda,
                                                  const SolverOptions& opt) {
    std::vector<detail::EdgeMesh> m;
    for (std::size_t e = 0; e < g.edges().size(); ++e)
        m.push_back(detail::build_edge_mesh(g.edge(e), e, layout, Lambda, opt));
    return m;
}

inline GalerkinLevel galerkin_level(const MetricGraph& g, const BoundaryConditionSet& bc,
                                    const detail::BoundaryEmbedding& be, const std::vector<detail::EdgeMesh>& meshes,
                                    int level, double lo, double hi, double rel_tol, int workers) {
    const auto P = detail::assemble_pencil(g, bc, be, meshes, level, workers);
    detail::PencilSolver solver(P);
    GalerkinLevel out;
    out.size = {P.elements, solver.size()};
    for (const auto& c : solver.eigenvalues(lo, hi, rel_tol))
        for (double v : c.values) out.values.push_back(v);
    std::sort(out.values.begin(), out.values.end());
    return out;
}

/// Full pipeline: Galerkin on refined meshes, refinement drift, and secular confirmation.
inline Spectrum eigenvalues(const MetricGraph& g, const BoundaryConditionSet& bc, double lambda_max,
                            SolverOptions opt = {}) {
    const auto gkn = gkn_validate(bc);
    if (!gkn.valid) throw InputError("extension " + bc.provenance, "invalid boundary conditions: " + gkn.diagnostics);
    const double qmin = potential_lower_bound(g);
    if (!(lambda_max > qmin))
        throw InputError("--lambda-max", "must exceed min q = " + std::to_string(qmin));
    const double ess = essential_threshold(g);
    if (!(lambda_max < ess))
        throw InputError("--lambda-max", "must lie below the essential-spectrum threshold " + std::to_string(ess));
    if (opt.refine < 1) throw InputError("--refine", "at least one refinement level is needed for drift estimates");
    if (opt.mesh_layers < 0) throw InputError("--mesh-layers", "must be non-negative");

    Spectrum sp;
    sp.lambda_max = lambda_max;
    sp.extension = bc.provenance;
    sp.options = opt;
    const double margin = std::max(1.0, 0.02 * std::abs(lambda_max));
    double lambda_ext = lambda_max + margin;
    if (std::isfinite(ess)) lambda_ext = std::min(lambda_ext, 0.5 * (lambda_max + ess));
    sp.lambda_searched = lambda_ext;
    const double lambda_coarse = std::isfinite(ess) ? std::min(lambda_ext + margin, 0.5 * (lambda_ext + ess))
                                                    : lambda_ext + margin;

    const auto be = detail::boundary_embedding(g, bc);
    const auto meshes = build_meshes(g, bc.layout, lambda_coarse - qmin, opt);

    // lower bound: no Galerkin eigenvalue below
    double lo = qmin - 1.0;
    {
        const auto P = detail::assemble_pencil(g, bc, be, meshes, opt.refine, opt.workers);
        detail::PencilSolver s(P);
        for (int it = 0; s.count_below(lo) > 0; ++it) {
            if (it > 60) throw NumericalError("no lower bound for the spectrum found");
            lo -= std::max(1.0, std::abs(lo));
        }
    }
    lo -= 1.0;
    sp.lower_bound = lo;

    std::vector<GalerkinLevel> levels;
    for (int l = 0; l <= opt.refine; ++l) {
        const bool finest = l == opt.refine;
        levels.push_back(galerkin_level(g, bc, be, meshes, l, lo, finest ? lambda_ext : lambda_coarse,
                                        finest ? 1e-12 : 1e-11, opt.workers));
        sp.levels.push_back(levels.back().size);
    }
    const auto& fine = levels.back().values;
    const auto& prev = levels[levels.size() - 2].values;

    // clusters of numerically coincident values
    struct Cl {
        double lambda;
        int mult;
        double drift;
        std::size_t first;
    };
    std::vector<Cl> cls;
    for (std::size_t i = 0; i < fine.size(); ++i) {
        const double drift = i < prev.size() ? std::abs(prev[i] - fine[i]) : INFINITY;
        if (!cls.empty() && std::abs(fine[i] - cls.back().lambda) <= 1e-8 * std::max(1.0, std::abs(fine[i]))) {
            auto& c = cls.back();
            c.lambda = (c.lambda * c.mult + fine[i]) / (c.mult + 1);
            c.mult += 1;
            c.drift = std::max(c.drift, drift);
        } else {
            cls.push_back({fine[i], 1, drift, i});
        }
    }

    // confirmation groups of overlapping brackets
    std::vector<EigenEntry> entries;
    for (const auto& c : cls) {
        EigenEntry en;
        en.lambda = c.lambda;
        en.multiplicity = c.mult;
        en.drift = c.drift;
        const double base = std::max(1e-8 * std::abs(c.lambda), 1e-6);
        en.half_width = std::max(base, 4.0 * c.drift);
        en.converged = c.drift <= base;
        entries.push_back(en);
    }
    struct Group {
        std::size_t begin, end;
        double lo, hi;
    };
    std::vector<Group> groups;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double a = entries[i].lambda - entries[i].half_width, b = entries[i].lambda + entries[i].half_width;
        if (!groups.empty() && a <= groups.back().hi) {
            groups.back().end = i + 1;
            groups.back().hi = std::max(groups.back().hi, b);
        } else {
            groups.push_back({i, i + 1, a, b});
        }
    }
    FundamentalOptions fo;
    fo.series_order = opt.series_order;
    const SecularCounter sc(g, bc, fo);
    std::vector<int> group_counts(groups.size(), 0);
    std::vector<std::string> errors(groups.size());
    parallel_for(groups.size(), opt.workers, [&](std::size_t gi) {
        const auto& G = groups[gi];
        try {
            group_counts[gi] = sc.count(G.lo, G.hi).crossings;
            for (std::size_t i = G.begin; i < G.end; ++i) {
                auto& en = entries[i];
                double a = std::max(G.lo, en.lambda - en.half_width), b = std::min(G.hi, en.lambda + en.half_width);
                if (i > G.begin) a = std::max(a, 0.5 * (entries[i - 1].lambda + en.lambda));
                if (i + 1 < G.end) b = std::min(b, 0.5 * (entries[i + 1].lambda + en.lambda));
                en.lambda_secular = sc.locate(a, b);
                en.residual = std::abs(en.lambda - en.lambda_secular) / std::max(1.0, std::abs(en.lambda));
            }
        } catch (const NumericalError& e) {
            errors[gi] = e.what();
            group_counts[gi] = -1;
        }
    });
    bool all_ok = true;
    std::string diag;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        int expected = 0;
        for (std::size_t i = groups[gi].begin; i < groups[gi].end; ++i) expected += entries[i].multiplicity;
        const bool ok = group_counts[gi] == expected;
        for (std::size_t i = groups[gi].begin; i < groups[gi].end; ++i) {
            entries[i].confirmed = ok;
            entries[i].secular_count = group_counts[gi];
        }
        if (!ok) {
            all_ok = false;
            diag += "bracket [" + std::to_string(groups[gi].lo) + ", " + std::to_string(groups[gi].hi) +
                    "]: galerkin " + std::to_string(expected) + " vs secular " + std::to_string(group_counts[gi]) +
                    (errors[gi].empty() ? "" : " (" + errors[gi] + ")") + "; ";
        }
    }

    // total comparison up to a point between brackets at or beyond lambda_max
    double top = lambda_ext;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        if (groups[gi].hi < lambda_max) continue;
        if (groups[gi].lo > lambda_max) {
            const double prev_hi = gi > 0 ? groups[gi - 1].hi : lo;
            top = 0.5 * (std::max(prev_hi, lambda_max) + groups[gi].lo);
        } else if (gi + 1 < groups.size()) {
            top = 0.5 * (groups[gi].hi + groups[gi + 1].lo);
        } else {
            top = 0.5 * (groups[gi].hi + lambda_ext);
        }
        break;
    }
    sp.lambda_count = top;
    for (const auto& en : entries)
        if (en.lambda <= top) sp.galerkin_total += en.multiplicity;
    const int chunks = std::max(1, opt.secular_chunks);
    std::vector<int> chunk_counts(chunks, 0);
    try {
        parallel_for(static_cast<std::size_t>(chunks), opt.workers, [&](std::size_t c) {
            const double a = lo + (top - lo) * c / chunks, b = lo + (top - lo) * (c + 1) / chunks;
            chunk_counts[c] = sc.count(a, b).crossings;
        });
        for (int c : chunk_counts) sp.secular_total += c;
    } catch (const NumericalError& e) {
        sp.secular_total = -1;
        diag += std::string("total count failed: ") + e.what() + "; ";
    }
    if (sp.secular_total != sp.galerkin_total) {
        all_ok = false;
        diag += "total up to " + std::to_string(top) + ": galerkin " + std::to_string(sp.galerkin_total) +
                " vs secular " + std::to_string(sp.secular_total) + "; ";
    }
    for (const auto& en : entries)
        if (en.lambda <= lambda_max) sp.eigenvalues.push_back(en);
    sp.consistent = all_ok;
    sp.diagnostics = all_ok ? "ok" : diag;
    return sp;
}

inline nlohmann::json to_json(const Spectrum& s) {
    nlohmann::json ev = nlohmann::json::array();
    for (const auto& e : s.eigenvalues)
        ev.push_back({{"lambda", e.lambda},
                      {"multiplicity", e.multiplicity},
                      {"residual", e.residual},
                      {"lambda_secular", e.lambda_secular},
                      {"drift", e.drift},
                      {"bracket_half_width", e.half_width},
                      {"confirmed", e.confirmed},
                      {"converged", e.converged}});
    nlohmann::json lv = nlohmann::json::array();
    for (const auto& l : s.levels) lv.push_back({{"elements", l.elements}, {"dofs", l.dofs}});
    return {{"eigenvalues", ev},
            {"metadata",
             {{"method", "galerkin-cubic-graded+secular"},
              {"extension", s.extension},
              {"lambda_max", s.lambda_max},
              {"lambda_searched", s.lambda_searched},
              {"lower_bound", s.lower_bound},
              {"levels", lv},
              {"series_order", s.options.series_order},
              {"mesh_layers", s.options.mesh_layers},
              {"grading", s.options.grading},
              {"refine", s.options.refine},
              {"kappa", s.options.kappa},
              {"galerkin_total", s.galerkin_total},
              {"secular_total", s.secular_total},
              {"count_limit", s.lambda_count},
              {"consistent", s.consistent},
              {"diagnostics", s.diagnostics}}}};
}

/// Staircase (lambda, N(lambda)) at each eigenvalue.
inline std::string staircase_csv(const Spectrum& s) {
    std::string out = "lambda,N\n";
    int n = 0;
    char buf[64];
    for (const auto& e : s.eigenvalues) {
        n += e.multiplicity;
        std::snprintf(buf, sizeof buf, "%.12g,%d\n", e.lambda, n);
        out += buf;
    }
    return out;
}

}  // namespace slg
