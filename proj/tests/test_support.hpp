#pragma once

// Independent oracles shared by the test binaries. Nothing here calls the
// library's quadrature or root finders.

#include "rdrobin/nonlinearity.hpp"

#include <array>
#include <cmath>
#include <utility>
#include <vector>

namespace test_support {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_N.
template <int N>
struct GLRule {
    std::array<long double, N> x{}, w{};
    GLRule() {
        const long double pi = 3.141592653589793238462643383279502884L;
        for (int i = 0; i < N; ++i) {
            long double z = std::cos(pi * (i + 0.75L) / (N + 0.5L));
            long double dp = 0;
            for (int it = 0; it < 100; ++it) {
                long double p0 = 1, p1 = z;
                for (int k = 2; k <= N; ++k) {
                    const long double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N * (z * p1 - p0) / (z * z - 1);
                const long double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-19L) break;
            }
            x[i] = z;
            w[i] = 2 / ((1 - z * z) * dp * dp);
        }
    }
};

template <class Fn>
long double composite_gl(Fn&& fn, long double a, long double b, int panels) {
    static const GLRule<20> rule;
    const long double h = (b - a) / panels;
    long double acc = 0;
    for (int p = 0; p < panels; ++p) {
        const long double lo = a + p * h;
        for (int i = 0; i < 20; ++i) acc += rule.w[i] * fn(lo + h * (rule.x[i] + 1) / 2);
    }
    return acc * h / 2;
}

struct Table {
    std::vector<double> s, f, fp;
};

inline Table tabulate(const rdrobin::ReactionTerm& term, double a, double b, int n) {
    Table t;
    for (int i = 0; i < n; ++i) {
        const double u = a + (b - a) * i / (n - 1);
        t.s.push_back(u);
        t.f.push_back(term.f(u));
        t.fp.push_back(term.fp(u));
    }
    return t;
}

/// f(u) = u (u - 1/4)(1 - u)(1 + 100 u^2) sampled on [0, 1.5]. Its ratio
/// s / sqrt(F(s)) dips to about 1.937 near s = 0.16 but tends to 2 at 0.
inline Table mixed_table(int n = 1501) {
    const double a = 0.25, k = 100.0;
    Table t;
    for (int i = 0; i < n; ++i) {
        const double u = 1.5 * i / (n - 1);
        const double c = u * (u - a) * (1 - u);
        const double cp = -3 * u * u + 2 * (1 + a) * u - a;
        t.s.push_back(u);
        t.f.push_back(c * (1 + k * u * u));
        t.fp.push_back(cp * (1 + k * u * u) + c * 2 * k * u);
    }
    return t;
}

inline rdrobin::Nonlinearity mixed_nonlinearity() {
    auto t = mixed_table();
    return rdrobin::Nonlinearity(rdrobin::ReactionTerm(rdrobin::TabulatedTerm(t.s, t.f, t.fp)));
}

/// Ground-state orbit of V'' = -f(V), V(0) = theta, V'(0) = 0 for the cubic,
/// by classical RK4 in long double. Returns (z, V) at every step.
inline std::vector<std::pair<long double, long double>> shoot_ground(long double alpha, long double z_end,
                                                                      long double h) {
    const long double c = 2 * (1 + alpha) / 3;
    // theta: smaller root of s^2/2 - c s + alpha = 0.
    const long double theta = c - std::sqrt(c * c - 2 * alpha);
    auto f = [&](long double u) { return u * (u - alpha) * (1 - u); };
    const long long steps = std::llround(z_end / h);
    std::vector<std::pair<long double, long double>> out;
    out.reserve(static_cast<std::size_t>(steps + 1));
    long double v = theta, p = 0;
    out.emplace_back(0.0L, v);
    for (long long k = 0; k < steps; ++k) {
        const long double k1v = p, k1p = -f(v);
        const long double k2v = p + h / 2 * k1p, k2p = -f(v + h / 2 * k1v);
        const long double k3v = p + h / 2 * k2p, k3p = -f(v + h / 2 * k2v);
        const long double k4v = p + h * k3p, k4p = -f(v + h * k3v);
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
        p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
        out.emplace_back(h * (k + 1), v);
    }
    return out;
}

/// Half-width of the compact bump with peak m for the cubic, by composite
/// Gauss-Legendre in w with s = m - w^2 and the exact factorisation of
/// F(s) - F(m) by (s - m).
inline long double bump_half_width_oracle(long double alpha, long double m, int panels) {
    const long double c = 2 * (1 + alpha) / 3;
    auto integrand = [&](long double w) {
        const long double s = m - w * w;
        const long double q = (s * s * s + s * s * m + s * m * m + m * m * m) / 2 - c * (s * s + s * m + m * m) +
                              alpha * (s + m);
        // F(s) - F(m) = (s - m) q = -w^2 q
        return 2 / std::sqrt(-q);
    };
    return composite_gl(integrand, 0.0L, std::sqrt(m), panels);
}

}  // namespace test_support
