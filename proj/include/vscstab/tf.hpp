#pragma once

// Complex-coefficient polynomials and rational functions in the Laplace
// variable s (rad/s). Coefficients are stored in ascending powers of s.
//
// The coefficient-conjugation operator conj_coeff() conjugates every
// coefficient and leaves s alone, so for X(s) = sum a_k s^k
//     conj_coeff(X)(s) = sum conj(a_k) s^k = conj(X(conj(s))).
// On the imaginary axis this gives the mirror identity
//     conj_coeff(X)(jw) = conj(X(-jw)).

#include "vscstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace vscstab {

using cplx = std::complex<double>;

inline constexpr cplx kJ{0.0, 1.0};

class CPoly {
public:
    CPoly() = default;
    CPoly(std::initializer_list<cplx> coeffs) : c_(coeffs) { trim(); }
    explicit CPoly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }

    static CPoly constant(cplx c) { return CPoly{c}; }
    /// The monomial s^k.
    static CPoly s_pow(std::size_t k) {
        std::vector<cplx> c(k + 1, cplx{});
        c[k] = 1.0;
        return CPoly(std::move(c));
    }

    [[nodiscard]] bool is_zero() const noexcept { return c_.empty(); }
    /// -1 for the zero polynomial.
    [[nodiscard]] int degree() const noexcept { return static_cast<int>(c_.size()) - 1; }
    [[nodiscard]] const std::vector<cplx>& coeffs() const noexcept { return c_; }
    [[nodiscard]] cplx coeff(std::size_t k) const noexcept { return k < c_.size() ? c_[k] : cplx{}; }
    [[nodiscard]] cplx leading() const noexcept { return c_.empty() ? cplx{} : c_.back(); }

    /// Number of exactly-zero low-order coefficients, i.e. the multiplicity
    /// of the root at s = 0.
    [[nodiscard]] std::size_t origin_order() const noexcept {
        std::size_t k = 0;
        while (k < c_.size() && c_[k] == cplx{}) ++k;
        return k;
    }

    /// Divides by s^k; the caller guarantees k <= origin_order().
    [[nodiscard]] CPoly shifted_down(std::size_t k) const {
        if (k == 0) return *this;
        return CPoly(std::vector<cplx>(c_.begin() + static_cast<std::ptrdiff_t>(std::min(k, c_.size())), c_.end()));
    }

    /// Horner evaluation.
    [[nodiscard]] cplx operator()(cplx s) const noexcept {
        cplx acc{};
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * s + *it;
        return acc;
    }

    /// p(s) / s^degree evaluated as a polynomial in 1/s; finite for large |s|.
    [[nodiscard]] cplx eval_reversed(cplx s) const noexcept {
        const cplx u = 1.0 / s;
        cplx acc{};
        for (const auto& a : c_) acc = acc * u + a;
        return acc;
    }

    [[nodiscard]] CPoly conj_coeff() const {
        std::vector<cplx> c(c_.size());
        std::transform(c_.begin(), c_.end(), c.begin(), [](cplx a) { return std::conj(a); });
        return CPoly(std::move(c));
    }

    [[nodiscard]] double max_abs_coeff() const noexcept {
        double m = 0.0;
        for (const auto& a : c_) m = std::max(m, std::abs(a));
        return m;
    }

    /// Fujiwara bound: every root z satisfies |z| <= bound.
    [[nodiscard]] double root_upper_bound() const noexcept {
        const int n = degree();
        if (n < 1) return 0.0;
        const double lead = std::abs(leading());
        double m = 0.0;
        for (int k = 1; k <= n; ++k) {
            double a = std::abs(c_[static_cast<std::size_t>(n - k)]) / lead;
            if (k == n) a *= 0.5;
            if (a > 0.0) m = std::max(m, std::pow(a, 1.0 / k));
        }
        return 2.0 * m;
    }

    /// Every nonzero root z satisfies |z| >= bound (upper bound of the
    /// reversed polynomial after removing roots at the origin).
    [[nodiscard]] double nonzero_root_lower_bound() const {
        const CPoly p = shifted_down(origin_order());
        if (p.degree() < 1) return std::numeric_limits<double>::infinity();
        std::vector<cplx> rev(p.c_.rbegin(), p.c_.rend());
        return 1.0 / CPoly(std::move(rev)).root_upper_bound();
    }

    /// True when *this == factor * other coefficient-wise within `rel_tol`
    /// relative to the largest coefficient; `factor` receives the ratio.
    [[nodiscard]] bool proportional_to(const CPoly& other, cplx& factor, double rel_tol = 1e-12) const {
        if (is_zero() || other.is_zero() || degree() != other.degree()) return false;
        factor = leading() / other.leading();
        const double scale = std::max(max_abs_coeff(), std::abs(factor) * other.max_abs_coeff());
        for (std::size_t k = 0; k < c_.size(); ++k) {
            if (std::abs(c_[k] - factor * other.c_[k]) > rel_tol * scale) return false;
        }
        return true;
    }

    friend CPoly operator+(const CPoly& a, const CPoly& b) {
        std::vector<cplx> c(std::max(a.c_.size(), b.c_.size()), cplx{});
        for (std::size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
        for (std::size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
        return CPoly(std::move(c));
    }
    friend CPoly operator-(const CPoly& a) {
        std::vector<cplx> c(a.c_);
        for (auto& x : c) x = -x;
        return CPoly(std::move(c));
    }
    friend CPoly operator-(const CPoly& a, const CPoly& b) { return a + (-b); }
    friend CPoly operator*(const CPoly& a, const CPoly& b) {
        if (a.is_zero() || b.is_zero()) return {};
        std::vector<cplx> c(a.c_.size() + b.c_.size() - 1, cplx{});
        for (std::size_t i = 0; i < a.c_.size(); ++i)
            for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
        return CPoly(std::move(c));
    }
    friend CPoly operator*(cplx k, const CPoly& a) {
        std::vector<cplx> c(a.c_);
        for (auto& x : c) x *= k;
        return CPoly(std::move(c));
    }
    friend CPoly operator*(const CPoly& a, cplx k) { return k * a; }

    friend bool operator==(const CPoly& a, const CPoly& b) = default;

private:
    void trim() {
        while (!c_.empty() && c_.back() == cplx{}) c_.pop_back();
    }

    std::vector<cplx> c_;
};

/// Rational function num(s)/den(s) with complex coefficients.
///
/// Normal form: den is monic, common factors s^k are removed, and the zero
/// function is 0/1. The only other cancellation performed is between whole
/// polynomials that coincide up to a constant within 1e-12; roots are never
/// matched numerically, so right-half-plane pole/zero pairs survive.
class CRational {
public:
    CRational() : num_(), den_{1.0} {}
    CRational(cplx c) : num_{c}, den_{1.0} { normalize(); }  // NOLINT: implicit constant
    explicit CRational(CPoly num) : num_(std::move(num)), den_{1.0} { normalize(); }
    CRational(CPoly num, CPoly den) : num_(std::move(num)), den_(std::move(den)) {
        if (den_.is_zero()) throw ArithmeticError("rational function with zero denominator");
        normalize();
    }

    /// The Laplace variable itself.
    static CRational s() { return CRational(CPoly::s_pow(1)); }

    [[nodiscard]] const CPoly& num() const noexcept { return num_; }
    [[nodiscard]] const CPoly& den() const noexcept { return den_; }
    [[nodiscard]] bool is_zero() const noexcept { return num_.is_zero(); }
    /// deg(num) - deg(den); meaningless for the zero function.
    [[nodiscard]] int relative_degree() const noexcept { return num_.degree() - den_.degree(); }

    [[nodiscard]] CRational conj_coeff() const { return {num_.conj_coeff(), den_.conj_coeff()}; }

    [[nodiscard]] CRational inverse() const {
        if (is_zero()) throw ArithmeticError("inverse of the zero rational function");
        return {den_, num_};
    }

    /// num(s)/den(s). Large |s| is evaluated through the reversed
    /// polynomials so that high degrees do not overflow.
    [[nodiscard]] cplx operator()(cplx s) const {
        if (num_.is_zero()) return {};
        cplx value;
        if (std::abs(s) <= 1.0) {
            const cplx d = den_(s);
            if (d == cplx{}) throw pole_at(s);
            value = num_(s) / d;
        } else {
            const cplx d = den_.eval_reversed(s);
            if (d == cplx{}) throw pole_at(s);
            value = num_.eval_reversed(s) / d;
            const int rel = relative_degree();
            const cplx base = rel >= 0 ? s : 1.0 / s;
            for (int k = 0; k < std::abs(rel); ++k) value *= base;
        }
        if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) throw pole_at(s);
        return value;
    }

    friend CRational operator+(const CRational& a, const CRational& b) {
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        cplx k;
        if (a.den_.proportional_to(b.den_, k)) return {a.num_ + k * b.num_, a.den_};
        return {a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_};
    }
    friend CRational operator-(const CRational& a) { return {-a.num_, a.den_}; }
    friend CRational operator-(const CRational& a, const CRational& b) { return a + (-b); }
    friend CRational operator*(const CRational& a, const CRational& b) {
        if (a.is_zero() || b.is_zero()) return {};
        CPoly an = a.num_, ad = a.den_, bn = b.num_, bd = b.den_;
        cplx k;
        if (an.proportional_to(bd, k)) { an = CPoly{k}; bd = CPoly{1.0}; }
        if (bn.proportional_to(ad, k)) { bn = CPoly{k}; ad = CPoly{1.0}; }
        return {an * bn, ad * bd};
    }
    friend CRational operator/(const CRational& a, const CRational& b) {
        if (b.is_zero()) throw ArithmeticError("division by the zero rational function");
        return a * b.inverse();
    }

private:
    static PoleError pole_at(cplx s) {
        std::ostringstream os;
        os << "rational function evaluated at a pole, s = " << s.real() << (s.imag() < 0 ? "-" : "+")
           << std::abs(s.imag()) << "j";
        return PoleError(s, os.str());
    }

    void normalize() {
        if (num_.is_zero()) {
            den_ = CPoly{1.0};
            return;
        }
        const std::size_t k = std::min(num_.origin_order(), den_.origin_order());
        if (k > 0) {
            num_ = num_.shifted_down(k);
            den_ = den_.shifted_down(k);
        }
        cplx f;
        if (num_.proportional_to(den_, f)) {
            num_ = CPoly{f};
            den_ = CPoly{1.0};
            return;
        }
        const cplx lead = den_.leading();
        if (lead != cplx{1.0, 0.0}) {
            num_ = (1.0 / lead) * num_;
            std::vector<cplx> d = ((1.0 / lead) * den_).coeffs();
            d.back() = 1.0;
            den_ = CPoly(std::move(d));
        }
    }

    CPoly num_;
    CPoly den_;
};

enum class ArithOp { add, sub, mul, div };

[[nodiscard]] inline CRational arith(const CRational& a, const CRational& b, ArithOp op) {
    switch (op) {
        case ArithOp::add: return a + b;
        case ArithOp::sub: return a - b;
        case ArithOp::mul: return a * b;
        case ArithOp::div: return a / b;
    }
    throw ArithmeticError("unknown arithmetic operation");
}

[[nodiscard]] inline CRational conj_coeff(const CRational& x) { return x.conj_coeff(); }
[[nodiscard]] inline CPoly conj_coeff(const CPoly& p) { return p.conj_coeff(); }

[[nodiscard]] inline cplx eval(const CRational& x, cplx s) { return x(s); }

}  // namespace vscstab
