#pragma once

// Frequency loci, winding numbers and Nyquist-contour images.
//
// Two kinds of curves are produced here:
//  * Locus: samples of a function at s = j 2 pi f over a positive frequency
//    band (what gets plotted and exported);
//  * ContourImage: the image of the full Nyquist D-contour, used for
//    encirclement counting. The contour runs up the imaginary axis from
//    -jR to jR, detours around s = 0 through the right half plane on a
//    small semicircle of radius eps, and closes through the right half
//    plane on the semicircle of radius R. It is traversed clockwise, so
//    every enclosed zero contributes -1 and every enclosed pole +1 to the
//    counterclockwise winding number.

#include "vscstab/error.hpp"
#include "vscstab/numeric.hpp"
#include "vscstab/tf.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace vscstab {

struct Locus {
    std::vector<double> freqs;   ///< Hz, strictly increasing
    std::vector<cplx> values;
    std::string label;
    cplx about{};                ///< reference point used for refinement
    std::vector<double> skipped; ///< frequencies dropped because they hit a pole
};

namespace detail {

inline constexpr double kRefineStep = numeric::kPi / 4.0;
inline constexpr double kMaxStep = numeric::kPi / 2.0;

[[nodiscard]] inline double angle_step(cplx a, cplx b, cplx about) {
    return std::arg((b - about) / (a - about));
}

[[nodiscard]] inline bool finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

}  // namespace detail

/// Samples f(j 2 pi hz) on a log grid from f_min to f_max with n base points,
/// then bisects (geometrically) every interval where the angle about `about`
/// moves by >= pi/4 or Im changes sign, up to `max_depth` levels.
template <class F>
[[nodiscard]] Locus sample_locus_fn(F&& f, double f_min, double f_max, std::size_t n, cplx about = {},
                                    std::string label = {}, int max_depth = 20) {
    if (!(f_min > 0.0) || !(f_max > f_min)) throw ParameterError("sample_locus requires 0 < f_min < f_max");
    if (n < 16) throw ParameterError("sample_locus requires at least 16 points");

    Locus out;
    out.label = std::move(label);
    out.about = about;

    auto value_at = [&](double hz, cplx& v) {
        try {
            v = f(kJ * (numeric::kTwoPi * hz));
        } catch (const PoleError&) {
            out.skipped.push_back(hz);
            return false;
        }
        if (!detail::finite(v)) {
            out.skipped.push_back(hz);
            return false;
        }
        return true;
    };

    auto needs_split = [&](double fa, cplx va, double fb, cplx vb) {
        if (va == about || vb == about) return false;
        if (std::abs(detail::angle_step(va, vb, about)) >= detail::kRefineStep) return true;
        const bool sign_change = (va.imag() < 0.0) != (vb.imag() < 0.0);
        return sign_change && (fb - fa) > 1e-4 * fb;
    };

    auto refine = [&](auto&& self, double fa, cplx va, double fb, cplx vb, int depth) -> void {
        if (depth < max_depth && needs_split(fa, va, fb, vb)) {
            const double fm = std::sqrt(fa * fb);
            cplx vm;
            if (fm > fa && fm < fb && value_at(fm, vm)) {
                self(self, fa, va, fm, vm, depth + 1);
                self(self, fm, vm, fb, vb, depth + 1);
                return;
            }
        }
        out.freqs.push_back(fb);
        out.values.push_back(vb);
    };

    bool have_prev = false;
    double f_prev = 0.0;
    cplx v_prev;
    for (double hz : numeric::logspace(f_min, f_max, n)) {
        cplx v;
        if (!value_at(hz, v)) {
            have_prev = false;
            continue;
        }
        if (have_prev) {
            refine(refine, f_prev, v_prev, hz, v, 0);
        } else {
            out.freqs.push_back(hz);
            out.values.push_back(v);
        }
        have_prev = true;
        f_prev = hz;
        v_prev = v;
    }
    return out;
}

[[nodiscard]] inline Locus sample_locus(const CRational& x, double f_min, double f_max, std::size_t n,
                                        cplx about = {}, std::string label = {}) {
    return sample_locus_fn([&x](cplx s) { return x(s); }, f_min, f_max, n, about, std::move(label));
}

/// Net counterclockwise turns of the sampled curve about `about`: the sum of
/// the angle increments divided by 2 pi, rounded. Every increment must be
/// below pi/2 in magnitude.
[[nodiscard]] inline int winding_number(const std::vector<cplx>& values, cplx about, bool closed = false) {
    if (values.size() < 2) return 0;
    double total = 0.0;
    const std::size_t steps = closed ? values.size() : values.size() - 1;
    for (std::size_t k = 0; k < steps; ++k) {
        const cplx a = values[k];
        const cplx b = values[(k + 1) % values.size()];
        if (a == about || b == about) throw UnreliableWinding("curve passes through the reference point");
        const double d = detail::angle_step(a, b, about);
        if (std::abs(d) >= detail::kMaxStep) {
            std::ostringstream os;
            os << "angle step of " << d << " rad survived refinement at sample " << k;
            throw UnreliableWinding(os.str());
        }
        total += d;
    }
    return static_cast<int>(std::lround(total / numeric::kTwoPi));
}

[[nodiscard]] inline int winding_number(const Locus& locus, cplx about) {
    return winding_number(locus.values, about, false);
}

/// Radii of the D-contour. `eps` must be below every nonzero root magnitude
/// and `radius` above every root magnitude of the functions involved.
struct ContourSpec {
    double eps = 1e-3;
    double radius = 1e6;
};

/// Contour radii derived from root bounds of the given polynomials.
[[nodiscard]] inline ContourSpec contour_for(std::initializer_list<const CPoly*> polys) {
    double lower = std::numeric_limits<double>::infinity();
    double upper = 1.0;
    for (const CPoly* p : polys) {
        if (p->degree() < 1) continue;
        lower = std::min(lower, p->nonzero_root_lower_bound());
        upper = std::max(upper, p->root_upper_bound());
    }
    ContourSpec c;
    c.eps = std::isfinite(lower) ? std::min(0.1 * lower, 1e-2) : 1e-2;
    c.radius = 10.0 * upper;
    return c;
}

/// Points of the D-contour with the function values at them.
struct ContourImage {
    std::vector<cplx> s;
    std::vector<cplx> values;
};

namespace detail {

/// One smooth piece of the contour, parametrised over [t0, t1].
struct Segment {
    double t0, t1;
    std::size_t base_points;
    cplx (*path)(double t, const ContourSpec& c);
};

inline cplx path_neg_axis(double u, const ContourSpec&) { return -kJ * std::exp(u); }
inline cplx path_indent(double phi, const ContourSpec& c) { return c.eps * std::exp(kJ * phi); }
inline cplx path_pos_axis(double u, const ContourSpec&) { return kJ * std::exp(u); }
inline cplx path_arc(double phi, const ContourSpec& c) { return c.radius * std::exp(kJ * phi); }

}  // namespace detail

/// Image of the D-contour under f (any callable cplx -> cplx), refined so that
/// consecutive values turn by less than pi/4 about `about` wherever possible.
template <class F>
[[nodiscard]] ContourImage nyquist_image(F&& f, const ContourSpec& spec, cplx about = {},
                                         std::size_t points_per_decade = 200, int max_depth = 30) {
    if (!(spec.eps > 0.0) || !(spec.radius > spec.eps)) throw ParameterError("invalid Nyquist contour radii");
    const double le = std::log(spec.eps);
    const double lr = std::log(spec.radius);
    const auto axis_points =
        static_cast<std::size_t>(std::ceil((lr - le) / std::log(10.0) * static_cast<double>(points_per_decade))) + 2;
    const double h = numeric::kPi / 2.0;
    const detail::Segment segments[] = {
        {lr, le, axis_points, detail::path_neg_axis},
        {-h, h, 64, detail::path_indent},
        {le, lr, axis_points, detail::path_pos_axis},
        {h, -h, 128, detail::path_arc},
    };

    ContourImage img;
    auto eval = [&](cplx s) {
        cplx v;
        try {
            v = f(s);
        } catch (const PoleError&) {
            throw UnreliableWinding("Nyquist contour hits a pole");
        }
        if (!detail::finite(v)) throw UnreliableWinding("non-finite value on the Nyquist contour");
        return v;
    };

    for (const auto& seg : segments) {
        auto refine = [&](auto&& self, double ta, cplx va, double tb, cplx vb, int depth) -> void {
            if (depth < max_depth && va != about && vb != about &&
                std::abs(detail::angle_step(va, vb, about)) >= detail::kRefineStep) {
                const double tm = 0.5 * (ta + tb);
                const cplx sm = seg.path(tm, spec);
                const cplx vm = eval(sm);
                self(self, ta, va, tm, vm, depth + 1);
                self(self, tm, vm, tb, vb, depth + 1);
                return;
            }
            img.s.push_back(seg.path(tb, spec));
            img.values.push_back(vb);
        };
        const std::vector<double> ts = numeric::linspace(seg.t0, seg.t1, seg.base_points);
        double t_prev = ts.front();
        cplx v_prev = eval(seg.path(t_prev, spec));
        img.s.push_back(seg.path(t_prev, spec));
        img.values.push_back(v_prev);
        for (std::size_t k = 1; k < ts.size(); ++k) {
            const cplx v = eval(seg.path(ts[k], spec));
            refine(refine, t_prev, v_prev, ts[k], v, 0);
            t_prev = ts[k];
            v_prev = v;
        }
    }
    return img;
}

/// Counterclockwise winding of f about `about` along the D-contour.
template <class F>
[[nodiscard]] int contour_winding(F&& f, const ContourSpec& spec, cplx about = {}) {
    const ContourImage img = nyquist_image(std::forward<F>(f), spec, about);
    return winding_number(img.values, about, true);
}

/// Number of roots of p with Re > 0, roots at the origin excluded. Any root
/// on the imaginary axis makes the count unreliable.
[[nodiscard]] inline int rhp_root_count(const CPoly& p, const ContourSpec& spec) {
    if (p.degree() < 1) return 0;
    const CPoly q = p.shifted_down(p.origin_order());
    if (q.degree() < 1) return 0;
    const CRational r(q);
    return -contour_winding([&r](cplx s) { return r(s); }, spec);
}

[[nodiscard]] inline int rhp_root_count(const CPoly& p) { return rhp_root_count(p, contour_for({&p})); }

}  // namespace vscstab
