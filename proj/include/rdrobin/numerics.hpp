#pragma once

// Quadrature, bracketed root finding and interpolation helpers shared by the
// steady-state, threshold and transition modules.

#include "rdrobin/error.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rdrobin::num {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

struct QuadOptions {
    double rel_tol = 1e-14;
    double abs_tol = 1e-15;
    unsigned max_depth = 20;
};

/// Adaptive Gauss-Kronrod (15/31) on [a, b]. Nodes are interior, so
/// integrable endpoint behaviour is never evaluated directly. When the
/// integrand's own rounding noise exceeds rel_tol the estimate stalls; the
/// tolerance is then relaxed by 100x per retry, never beyond 1e-8.
template <class Fn>
double integrate(Fn&& fn, double a, double b, const QuadOptions& opt = {}) {
    if (a == b) return 0.0;
    // Mapped onto [-1, 1] here: the bundled Boost version compares an
    // unscaled error estimate against a scaled tolerance on other intervals.
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    auto mapped = [&](double x) { return half * fn(mid + half * x); };
    double tol = opt.rel_tol;
    const double loosest = std::max(opt.rel_tol, 1e-8);
    double err = 0.0, l1 = 0.0;
    for (;;) {
        const double q = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            mapped, -1.0, 1.0, opt.max_depth, tol, &err, &l1);
        l1 = std::abs(l1);
        if (!std::isfinite(q)) fail(ErrorCode::QuadratureFailure, "non-finite integral");
        if (err <= std::max(100.0 * tol * l1, opt.abs_tol)) return q;
        if (tol >= loosest) break;
        tol = std::min(100.0 * tol, loosest);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "tolerance not met on [%.17g, %.17g]: err=%.3g, |f|_1=%.3g", a, b, err, l1);
    fail(ErrorCode::QuadratureFailure, buf);
}

/// integrate() over [a, b] split at the sorted `breaks` lying strictly
/// inside, so integrands that are only piecewise smooth converge per piece.
template <class Fn>
double integrate_split(Fn&& fn, double a, double b, std::span<const double> breaks, const QuadOptions& opt = {}) {
    if (a == b) return 0.0;
    if (a > b) return -integrate_split(fn, b, a, breaks, opt);
    auto it = std::upper_bound(breaks.begin(), breaks.end(), a);
    double acc = 0.0, lo = a;
    for (; it != breaks.end() && *it < b; ++it) {
        acc += integrate(fn, lo, *it, opt);
        lo = *it;
    }
    return acc + integrate(fn, lo, b, opt);
}

/// Integral of h over [a, c] where h has an inverse square-root singularity
/// at s = c. Uses s = c - w^2, so the transformed integrand 2 w h(c - w^2) is
/// smooth. `h_of_w` receives w and must return 2 w h(c - w^2) directly so the
/// caller can evaluate the cancellation-prone piece in difference form.
template <class Fn>
double integrate_sqrt_endpoint(Fn&& h_of_w, double a, double c, const QuadOptions& opt = {}) {
    require(a <= c, ErrorCode::InvalidArgument, "integrate_sqrt_endpoint needs a <= c");
    return integrate(std::forward<Fn>(h_of_w), 0.0, std::sqrt(c - a), opt);
}

/// Fixed Gauss-Legendre rule. Used where the integrand is a polynomial in s
/// and the rule is exact.
template <unsigned N, class Fn>
double gauss_legendre(Fn&& fn, double a, double b) {
    return boost::math::quadrature::gauss<double, N>::integrate(std::forward<Fn>(fn), a, b);
}

/// Root of fn in [lo, hi] with fn(lo), fn(hi) of opposite sign (TOMS 748).
template <class Fn>
double find_root(Fn&& fn, double lo, double hi, double flo, double fhi, double abs_tol = 1e-15) {
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    require((flo < 0) != (fhi < 0), ErrorCode::InvalidArgument, "find_root: no sign change");
    std::uintmax_t iters = 400;
    auto tol = [abs_tol](double x, double y) { return std::abs(x - y) <= abs_tol; };
    auto r = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

template <class Fn>
double find_root(Fn&& fn, double lo, double hi, double abs_tol = 1e-15) {
    const double flo = fn(lo);
    const double fhi = fn(hi);
    return find_root(fn, lo, hi, flo, fhi, abs_tol);
}

/// All roots of fn on the open interval (a, b): sign scan on `samples` uniform
/// interior points followed by bracketed refinement. Roots closer than
/// `merge_tol` are merged.
template <class Fn>
std::vector<double> scan_roots(Fn&& fn, double a, double b, int samples, double abs_tol = 1e-13,
                               double merge_tol = 1e-9) {
    std::vector<double> roots;
    const double h = (b - a) / samples;
    double x_prev = a + h;
    double f_prev = fn(x_prev);
    for (int j = 2; j < samples; ++j) {
        const double x = a + j * h;
        const double fx = fn(x);
        if (f_prev == 0.0) {
            roots.push_back(x_prev);
        } else if ((f_prev < 0) != (fx < 0) && fx != 0.0) {
            roots.push_back(find_root(fn, x_prev, x, f_prev, fx, abs_tol));
        }
        x_prev = x;
        f_prev = fx;
    }
    if (f_prev == 0.0) roots.push_back(x_prev);
    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots) {
        if (merged.empty() || r - merged.back() > merge_tol) merged.push_back(r);
    }
    return merged;
}

/// Cubic Hermite interpolation on one cell of width h, t in [0, 1].
/// Cubic Hermite value at offsets dl = x - x0 and dr = x - x1 from the
/// knots, expanded about the nearer one so a value near a root at that knot
/// keeps its relative accuracy.
inline double hermite_at(double y0, double d0, double y1, double d1, double h, double dl, double dr) noexcept {
    const double S = (y1 - y0) / h;
    const double c3 = (d0 + d1 - 2.0 * S) / (h * h);
    if (dl <= -dr) return y0 + dl * (d0 + dl * ((3.0 * S - 2.0 * d0 - d1) / h + dl * c3));
    return y1 + dr * (d1 + dr * ((2.0 * d1 + d0 - 3.0 * S) / h + dr * c3));
}

inline double hermite(double y0, double d0, double y1, double d1, double h, double t) noexcept {
    return hermite_at(y0, d0, y1, d1, h, t * h, (t - 1.0) * h);
}

inline double hermite_derivative(double y0, double d0, double y1, double d1, double h,
                                 double t) noexcept {
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * h * d0 + (-6 * t2 + 6 * t) * y1 +
            (3 * t2 - 2 * t) * h * d1) /
           h;
}

/// Ordinary least squares y = slope * x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument,
            "fit_line needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0, ErrorCode::InvalidArgument, "fit_line: degenerate abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.slope * x[i] + fit.intercept);
        ss += r * r;
    }
    fit.rms = std::sqrt(ss / n);
    return fit;
}

}  // namespace rdrobin::num
