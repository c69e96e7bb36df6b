#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace slg {

/// Real polynomial in the power basis, c[0] + c[1] x + c[2] x^2 + ...
class Polynomial {
public:
    Polynomial() : c_{0.0} {}
    Polynomial(std::initializer_list<double> coeffs) : c_(coeffs) { normalize(); }
    explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { normalize(); }

    static Polynomial constant(double v) { return Polynomial({v}); }
    static Polynomial monomial(std::size_t k, double scale = 1.0) {
        std::vector<double> c(k + 1, 0.0);
        c[k] = scale;
        return Polynomial(std::move(c));
    }

    const std::vector<double>& coeffs() const noexcept { return c_; }
    std::size_t degree() const noexcept { return c_.size() - 1; }
    double coeff(std::size_t k) const noexcept { return k < c_.size() ? c_[k] : 0.0; }
    bool is_zero() const noexcept { return c_.size() == 1 && c_[0] == 0.0; }

    double operator()(double x) const noexcept {
        double r = 0.0;
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
        return r;
    }

    Polynomial derivative() const {
        if (c_.size() == 1) return Polynomial();
        std::vector<double> d(c_.size() - 1);
        for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
        return Polynomial(std::move(d));
    }

    /// Coefficients of t -> P(x0 + s t), i.e. the Taylor expansion at x0 in a scaled variable.
    Polynomial compose_affine(double x0, double s) const {
        // Horner on polynomials: result = (...((c_n) * (x0 + s t) + c_{n-1}) ...)
        std::vector<double> r{c_.back()};
        for (std::size_t i = c_.size() - 1; i-- > 0;) {
            std::vector<double> next(r.size() + 1, 0.0);
            for (std::size_t k = 0; k < r.size(); ++k) {
                next[k] += r[k] * x0;
                next[k + 1] += r[k] * s;
            }
            next[0] += c_[i];
            r = std::move(next);
        }
        return Polynomial(std::move(r));
    }

    friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
        std::vector<double> r(std::max(a.c_.size(), b.c_.size()), 0.0);
        for (std::size_t k = 0; k < a.c_.size(); ++k) r[k] += a.c_[k];
        for (std::size_t k = 0; k < b.c_.size(); ++k) r[k] += b.c_[k];
        return Polynomial(std::move(r));
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + b * -1.0; }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        std::vector<double> r(a.c_.size() + b.c_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) r[i + j] += a.c_[i] * b.c_[j];
        return Polynomial(std::move(r));
    }

    friend Polynomial operator*(const Polynomial& a, double s) {
        std::vector<double> r = a.c_;
        for (double& v : r) v *= s;
        return Polynomial(std::move(r));
    }

    Polynomial pow(unsigned n) const {
        Polynomial r = constant(1.0);
        for (unsigned i = 0; i < n; ++i) r = r * *this;
        return r;
    }

    friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.c_ == b.c_; }

private:
    void normalize() {
        if (c_.empty()) c_.push_back(0.0);
        while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    }

    std::vector<double> c_;
};

}  // namespace slg
