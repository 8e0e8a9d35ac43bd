#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace vscstab::numeric {

/// Bisection on a bracket [lo, hi] with f(lo), f(hi) of opposite sign (or
/// one of them zero). Stops when the bracket is narrower than
/// abs_tol + rel_tol * |midpoint| or when |f| <= f_tol. Returns nullopt when
/// the endpoints do not bracket a sign change.
template <class F>
std::optional<double> bisect(F&& f, double lo, double hi, double rel_tol, double abs_tol = 0.0,
                             double f_tol = 0.0, int max_iter = 200) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) return std::nullopt;
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hi - lo <= abs_tol + rel_tol * std::abs(mid)) return mid;
        const double fm = f(mid);
        if (fm == 0.0 || std::abs(fm) <= f_tol) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// n points logarithmically spaced from a to b inclusive (a, b > 0).
inline std::vector<double> logspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    const double la = std::log(a);
    const double lb = std::log(b);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = std::exp(la + (lb - la) * static_cast<double>(k) / static_cast<double>(n - 1));
    }
    out.front() = a;
    out.back() = b;
    return out;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = n == 1 ? a : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return out;
}

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

}  // namespace vscstab::numeric
