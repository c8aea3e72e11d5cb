#pragma once

// Reaction term f, the bistable validation of f, and the scalar constants
// derived from it (alpha, lambda, theta, F(1), K, A, c(b), c-hat, H_k).

#include "rdrobin/error.hpp"
#include "rdrobin/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rdrobin {

/// Builtin cubic f(u) = u (u - alpha) (1 - u).
struct CubicTerm {
    double alpha;

    double f(double u) const noexcept { return u * (u - alpha) * (1.0 - u); }
    double fp(double u) const noexcept { return -3.0 * u * u + 2.0 * (1.0 + alpha) * u - alpha; }
    double fpp(double u) const noexcept { return -6.0 * u + 2.0 * (1.0 + alpha); }

    double F(double u) const noexcept {
        const double u2 = u * u;
        return u2 * (0.5 * u2 - (2.0 / 3.0) * (1.0 + alpha) * u + alpha);
    }
    // F(m - d) - F(m), exact Taylor expansion (F is a quartic).
    double F_drop(double m, double d) const noexcept {
        return 2.0 * d * (f(m) + d * (-0.5 * fp(m) + d * (fpp(m) / 6.0 + d * (6.0 / 24.0))));
    }
    // F(s) - lambda^2 s^2 with lambda^2 = alpha.
    double F_minus_quadratic(double s) const noexcept {
        return s * s * s * (0.5 * s - (2.0 / 3.0) * (1.0 + alpha));
    }
    std::optional<double> derivative_at_zero(int k) const noexcept {
        switch (k) {
            case 0: return 0.0;
            case 1: return -alpha;
            case 2: return 2.0 * (1.0 + alpha);
            case 3: return -6.0;
            default: return 0.0;
        }
    }
};

/// Nonlinearity sampled at knots (s_i, f_i, f'_i). order 3 is the cubic
/// Hermite interpolant through values and supplied slopes; order 1 is
/// piecewise linear. Derivatives beyond f' are never differenced.
class TabulatedTerm {
public:
    TabulatedTerm(std::vector<double> s, std::vector<double> f, std::vector<double> fp, int order = 3)
        : s_(std::move(s)), f_(std::move(f)), fp_(std::move(fp)), order_(order) {
        require(s_.size() >= 2 && s_.size() == f_.size() && s_.size() == fp_.size(),
                ErrorCode::InvalidArgument, "table needs >= 2 rows with s, f, fp");
        require(order_ == 1 || order_ == 3, ErrorCode::InvalidArgument, "interpolation order must be 1 or 3");
        require(s_.front() == 0.0, ErrorCode::InvalidArgument, "table must start at s = 0");
        for (std::size_t i = 1; i < s_.size(); ++i)
            require(s_[i] > s_[i - 1], ErrorCode::InvalidArgument, "table s must be strictly increasing");
        lambda2_ = -fp_.front();
        build_prefix();
    }

    int order() const noexcept { return order_; }
    double s_max() const noexcept { return s_.back(); }
    std::span<const double> knots() const noexcept { return s_; }

    double f(double u) const noexcept {
        if (u <= s_.front()) return f_.front() + fp_.front() * (u - s_.front());
        if (u >= s_.back()) return f_.back() + fp_.back() * (u - s_.back());
        const std::size_t i = cell(u);
        return in_cell(i, u - s_[i], u - s_[i + 1]);
    }

    /// f in cell [s_c, s_{c+1}] at offsets dl = u - s_c, dr = u - s_{c+1}.
    double in_cell(std::size_t c, double dl, double dr) const noexcept {
        const double h = s_[c + 1] - s_[c];
        if (order_ == 1) return dl <= -dr ? f_[c] + dl * (f_[c + 1] - f_[c]) / h : f_[c + 1] + dr * (f_[c + 1] - f_[c]) / h;
        return num::hermite_at(f_[c], fp_[c], f_[c + 1], fp_[c + 1], h, dl, dr);
    }

    double fp(double u) const noexcept {
        if (u <= s_.front()) return fp_.front();
        if (u >= s_.back()) return fp_.back();
        const std::size_t i = cell(u);
        const double h = s_[i + 1] - s_[i];
        const double t = (u - s_[i]) / h;
        if (order_ == 1) return fp_[i] + t * (fp_[i + 1] - fp_[i]);
        return num::hermite_derivative(f_[i], fp_[i], f_[i + 1], fp_[i + 1], h, t);
    }

    double F(double u) const { return -2.0 * antiderivative(u, prefix_f_, 0.0); }
    double F_drop(double m, double d) const {
        // Short drops are integrated directly so small d keeps full relative accuracy.
        if (d <= 4.0 * min_cell_) return 2.0 * drop_segment(m, d);
        const double lo = m - d;
        if (lo < s_.front() || m > s_.back())
            return 2.0 * (antiderivative(m, prefix_f_, 0.0) - antiderivative(lo, prefix_f_, 0.0));
        // whole cells from the extended-precision prefix, partial cells by
        // quadrature: no cancellation against the magnitude of F
        const std::size_t i = cell(m), j = cell(lo);
        if (i == j) return 2.0 * piece(lo, m, 0.0);
        return 2.0 * (piece(lo, s_[j + 1], 0.0) + static_cast<double>(prefix_f_[i] - prefix_f_[j + 1]) +
                      piece(s_[i], m, 0.0));
    }
    double F_minus_quadratic(double s) const {
        if (s > 0.0 && s <= s_[1]) return -2.0 * first_cell_q(s);
        return -2.0 * antiderivative(s, prefix_q_, lambda2_);
    }
    std::optional<double> derivative_at_zero(int k) const noexcept {
        if (k == 0) return f_.front();
        if (k == 1) return fp_.front();
        return std::nullopt;
    }

private:
    std::size_t cell(double u) const noexcept {
        auto it = std::upper_bound(s_.begin(), s_.end(), u);
        std::size_t i = static_cast<std::size_t>(it - s_.begin());
        i = std::clamp<std::size_t>(i, 1, s_.size() - 1);
        return i - 1;
    }

    // int_a^b (f + c r) dr with a, b in one cell or one extension piece.
    // Gauss-Legendre with 8 nodes is exact for the interpolant.
    double piece(double a, double b, double c) const {
        if (a == b) return 0.0;
        return num::gauss_legendre<8>([&](double r) { return f(r) + c * r; }, a, b);
    }

    // int_a^b (f + c r) dr for arbitrary a <= b, split at knots.
    double segment(double a, double b, double c) const {
        if (a > b) return -segment(b, a, c);
        double acc = 0.0;
        double lo = a;
        while (lo < b) {
            double hi = b;
            if (lo < s_.front()) {
                hi = std::min(b, s_.front());
            } else if (lo < s_.back()) {
                hi = std::min(b, s_[cell(lo) + 1]);
            }
            acc += piece(lo, hi, c);
            lo = hi;
        }
        return acc;
    }

    // int_0^d f(m - t) dt, split where m - t crosses a knot. Parameterised
    // by t so the interval length is exactly d.
    double drop_segment(double m, double d) const {
        double acc = 0.0;
        double t0 = 0.0;
        while (t0 < d) {
            const double u = m - t0;
            double t1 = d;
            if (u > s_.front() && u <= s_.back()) {
                const std::size_t i = cell(u);
                const std::size_t c = s_[i] < u ? i : i - 1;
                t1 = std::min(d, m - s_[c]);
                if (!(t1 > t0)) t1 = d;
                // offsets from both knots taken before subtracting t, so
                // t far below the cell width is not rounded away
                const double ml = m - s_[c], mr = m - s_[c + 1];
                acc += num::gauss_legendre<8>([&](double t) { return in_cell(c, ml - t, mr - t); }, t0, t1);
                t0 = t1;
                continue;
            }
            if (u > s_.back()) t1 = std::min(d, m - s_.back());
            if (!(t1 > t0)) t1 = d;
            acc += num::gauss_legendre<8>([&](double t) { return f(m - t); }, t0, t1);
            t0 = t1;
        }
        return acc;
    }

    // int_0^u (f + c r) dr from cumulative knot integrals.
    double antiderivative(double u, const std::vector<long double>& prefix, double c) const {
        if (u <= s_.front()) return -segment(u, 0.0, c);
        if (u >= s_.back()) return static_cast<double>(prefix.back() + piece(s_.back(), u, c));
        const std::size_t i = cell(u);
        return static_cast<double>(prefix[i] + piece(s_[i], u, c));
    }

    // int_0^u (f + lambda^2 r) dr on the first cell from the interpolant's
    // monomial coefficients; the linear terms cancel exactly when f(0) = 0.
    double first_cell_q(double u) const {
        const double h = s_[1];
        const double c0 = f_[0];
        if (order_ == 1) {
            const double c1 = (f_[1] - f_[0]) / h + lambda2_;
            return u * (c0 + 0.5 * c1 * u);
        }
        const double slope = (f_[1] - f_[0]) / h;
        const double c2 = (3.0 * slope - 2.0 * fp_[0] - fp_[1]) / h;
        const double c3 = (fp_[0] + fp_[1] - 2.0 * slope) / (h * h);
        // fp_[0] + lambda2_ == 0 by construction
        return u * (c0 + u * u * (c2 / 3.0 + 0.25 * c3 * u));
    }

    void build_prefix() {
        prefix_f_.assign(s_.size(), 0.0);
        prefix_q_.assign(s_.size(), 0.0);
        min_cell_ = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < s_.size(); ++i) {
            prefix_f_[i] = prefix_f_[i - 1] + piece(s_[i - 1], s_[i], 0.0);
            prefix_q_[i] = i == 1 ? first_cell_q(s_[1]) : prefix_q_[i - 1] + piece(s_[i - 1], s_[i], lambda2_);
            min_cell_ = std::min(min_cell_, s_[i] - s_[i - 1]);
        }
    }

    std::vector<double> s_, f_, fp_;
    int order_;
    double lambda2_ = 0.0;
    std::vector<long double> prefix_f_, prefix_q_;
    double min_cell_ = 0.0;
};

/// The raw reaction term, before the bistability conditions are checked.
class ReactionTerm {
public:
    using Variant = std::variant<CubicTerm, TabulatedTerm>;

    ReactionTerm(CubicTerm c) : term_(c) {}
    ReactionTerm(TabulatedTerm t) : term_(std::move(t)) {}

    static ReactionTerm cubic(double alpha) {
        require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidArgument, "cubic alpha must lie in (0,1)");
        return ReactionTerm(CubicTerm{alpha});
    }

    bool is_cubic() const noexcept { return std::holds_alternative<CubicTerm>(term_); }
    const Variant& variant() const noexcept { return term_; }

    double f(double u) const {
        return std::visit([u](const auto& t) { return t.f(u); }, term_);
    }
    double fp(double u) const {
        return std::visit([u](const auto& t) { return t.fp(u); }, term_);
    }
    /// F(u) = -2 int_0^u f. Closed form for the cubic, exact piecewise
    /// integration of the interpolant for a table.
    double F(double u) const {
        return std::visit([u](const auto& t) { return t.F(u); }, term_);
    }
    /// F(m - d) - F(m), evaluated without cancellation for small d.
    double F_drop(double m, double d) const {
        return std::visit([m, d](const auto& t) { return t.F_drop(m, d); }, term_);
    }
    /// F(s) - lambda^2 s^2, evaluated without cancellation for small s.
    double F_minus_quadratic(double s) const {
        return std::visit([s](const auto& t) { return t.F_minus_quadratic(s); }, term_);
    }
    std::optional<double> derivative_at_zero(int k) const {
        return std::visit([k](const auto& t) { return t.derivative_at_zero(k); }, term_);
    }

    /// Interpolation knots of a table; empty for closed forms.
    std::span<const double> knots() const noexcept {
        if (const auto* t = std::get_if<TabulatedTerm>(&term_)) return t->knots();
        return {};
    }

    /// Vectorised f over a span; dispatch happens once.
    void f_many(std::span<const double> u, std::span<double> out) const {
        std::visit(
            [&](const auto& t) {
                for (std::size_t i = 0; i < u.size(); ++i) out[i] = t.f(u[i]);
            },
            term_);
    }

private:
    Variant term_;
};

/// F(u) by adaptive quadrature of -2 f, independent of the closed forms.
inline double eval_F_quadrature(const ReactionTerm& term, double u, const num::QuadOptions& opt = {}) {
    require(u >= 0.0, ErrorCode::InvalidArgument, "eval_F needs u >= 0");
    return -2.0 * num::integrate_split([&](double s) { return term.f(s); }, 0.0, u, term.knots(), opt);
}

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;
    int samples = 0;
    double delta = 0.0;
    double alpha = std::nan("");
    double lambda = std::nan("");
    double theta = std::nan("");
    double F_one = std::nan("");
    double K_lower = std::nan("");
    std::optional<int> k_order;
    bool theta_found = false;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    std::string failures() const {
        std::string out;
        for (const auto& c : checks)
            if (!c.passed) out += c.name + (c.detail.empty() ? "" : " (" + c.detail + ")") + "; ";
        return out;
    }
};

/// Checks the unbalanced bistable conditions on a uniform sample grid of
/// [0, 1 + delta] and computes alpha, theta, lambda, F(1), K. Never throws for
/// a failed condition; the report carries pass/fail per sub-condition.
inline ValidationReport validate_F(const ReactionTerm& term, int samples = 4000, double delta = 0.5) {
    ValidationReport rep;
    rep.samples = samples;
    if (const auto* t = std::get_if<TabulatedTerm>(&term.variant())) delta = std::min(delta, t->s_max() - 1.0);
    rep.delta = delta;
    auto add = [&](std::string name, bool ok, std::string detail = {}) {
        rep.checks.push_back({std::move(name), ok, std::move(detail)});
    };

    add("table covers (1, 1+delta]", delta > 0.0);
    const double f0 = term.f(0.0);
    add("f(0) = 0", std::abs(f0) <= 1e-12, "f(0)=" + std::to_string(f0));
    const double fp0 = term.fp(0.0);
    add("f'(0) < 0", fp0 < 0.0, "f'(0)=" + std::to_string(fp0));
    if (fp0 < 0.0) rep.lambda = std::sqrt(-fp0);

    // alpha: first sign change of f on (0, 1).
    const int n_unit = std::max(samples, 16);
    double alpha = std::nan("");
    {
        double prev_u = 1.0 / n_unit;
        double prev_f = term.f(prev_u);
        for (int j = 2; j < n_unit; ++j) {
            const double u = static_cast<double>(j) / n_unit;
            const double fu = term.f(u);
            if (prev_f < 0.0 && fu >= 0.0) {
                alpha = fu == 0.0 ? u : num::find_root([&](double x) { return term.f(x); }, prev_u, u, prev_f, fu);
                break;
            }
            prev_u = u;
            prev_f = fu;
        }
    }
    add("alpha found in (0,1)", std::isfinite(alpha));
    rep.alpha = alpha;

    if (std::isfinite(alpha)) {
        // Sign pattern; points within 1e-9 of alpha or 1 are not judged.
        bool neg_low = true, pos_mid = true, neg_high = true;
        double worst_low = 0, worst_mid = 0, worst_high = 0;
        const double top = 1.0 + delta;
        for (int j = 1; j <= samples; ++j) {
            const double u = top * j / samples;
            const double fu = term.f(u);
            if (u < alpha - 1e-9) {
                if (!(fu < 0.0)) { neg_low = false; worst_low = u; }
            } else if (u > alpha + 1e-9 && u < 1.0 - 1e-9) {
                if (!(fu > 0.0)) { pos_mid = false; worst_mid = u; }
            } else if (u > 1.0 + 1e-9) {
                if (!(fu < 0.0)) { neg_high = false; worst_high = u; }
            }
        }
        add("f < 0 on (0,alpha)", neg_low, neg_low ? "" : "violated at u=" + std::to_string(worst_low));
        add("f > 0 on (alpha,1)", pos_mid, pos_mid ? "" : "violated at u=" + std::to_string(worst_mid));
        add("f < 0 on (1,1+delta]", neg_high, neg_high ? "" : "violated at u=" + std::to_string(worst_high));
        add("f(1) = 0", std::abs(term.f(1.0)) <= 1e-10, "f(1)=" + std::to_string(term.f(1.0)));

        rep.F_one = term.F(1.0);
        add("F(1) < 0", rep.F_one < 0.0, "F(1)=" + std::to_string(rep.F_one));

        // theta: F strictly decreasing on (alpha, 1); smallest (unique) zero.
        const double lo = alpha + 1e-9;
        const double hi = 1.0 - 1e-9;
        const double Flo = term.F(lo);
        const double Fhi = term.F(hi);
        if (pos_mid && Flo > 0.0 && Fhi < 0.0) {
            auto Ffn = [&](double s) { return term.F(s); };
            double th = num::find_root(Ffn, lo, hi, Flo, Fhi, 1e-16);
            // Newton polish, F' = -2 f.
            const double fth = term.f(th);
            if (fth > 0.0) {
                const double cand = th + term.F(th) / (2.0 * fth);
                if (std::abs(term.F(cand)) <= std::abs(term.F(th))) th = cand;
            }
            rep.theta = th;
            rep.theta_found = true;
        }
        add("theta in (alpha,1) with F(theta)=0", rep.theta_found);

        if (rep.theta_found) {
            bool Fpos = true;
            for (int j = 1; j < samples; ++j) {
                const double s = rep.theta * j / samples;
                if (!(term.F(s) > 0.0)) { Fpos = false; break; }
            }
            add("F > 0 on (0,theta)", Fpos);
        }

        // K = -inf_{s>1} f'(s), sampled on (1, 10]; beyond a table the
        // right-end slope is used. Heuristic by construction.
        double min_fp = std::numeric_limits<double>::infinity();
        for (int j = 1; j <= samples; ++j) {
            const double s = 1.0 + 9.0 * j / samples;
            min_fp = std::min(min_fp, term.fp(s));
        }
        rep.K_lower = -min_fp;
        add("inf_{s>1} f' finite (sampled)", std::isfinite(rep.K_lower));
    }

    for (int k = 2; k <= 8; ++k) {
        const auto d = term.derivative_at_zero(k);
        if (!d) break;
        if (*d != 0.0) {
            rep.k_order = k;
            break;
        }
    }
    return rep;
}

/// A reaction term that passed validate_F, with its characteristic values.
class Nonlinearity {
public:
    explicit Nonlinearity(ReactionTerm term, int samples = 4000, double delta = 0.5)
        : term_(std::move(term)) {
        report_ = validate_F(term_, samples, delta);
        if (!report_.ok()) {
            const bool theta_issue = !report_.theta_found;
            bool sign_issue = false;
            for (const auto& c : report_.checks)
                if (!c.passed && c.name.rfind("theta", 0) != 0 && c.name != "F > 0 on (0,theta)" &&
                    c.name != "F(1) < 0")
                    sign_issue = true;
            if (sign_issue) fail(ErrorCode::NotBistable, report_.failures());
            if (theta_issue) fail(ErrorCode::NoThetaFound, report_.failures());
            fail(ErrorCode::NotBistable, report_.failures());
        }
    }

    static Nonlinearity cubic(double alpha) { return Nonlinearity(ReactionTerm::cubic(alpha)); }

    const ReactionTerm& term() const noexcept { return term_; }
    const ValidationReport& report() const noexcept { return report_; }

    double f(double u) const { return term_.f(u); }
    double fp(double u) const { return term_.fp(u); }
    double F(double u) const { return term_.F(u); }
    double F_drop(double m, double d) const { return term_.F_drop(m, d); }
    double F_minus_quadratic(double s) const { return term_.F_minus_quadratic(s); }
    std::optional<double> derivative_at_zero(int k) const { return term_.derivative_at_zero(k); }
    std::span<const double> knots() const noexcept { return term_.knots(); }

    /// Knots s in (lo, hi) mapped into an integration variable, ascending.
    template <class Map>
    std::vector<double> breaks(double lo, double hi, Map&& map) const {
        std::vector<double> out;
        for (double s : knots())
            if (s > lo && s < hi) out.push_back(map(s));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
    void f_many(std::span<const double> u, std::span<double> out) const { term_.f_many(u, out); }

    double alpha() const noexcept { return report_.alpha; }
    double lambda() const noexcept { return report_.lambda; }
    double theta() const noexcept { return report_.theta; }
    double F_one() const noexcept { return report_.F_one; }
    double K_lower() const noexcept { return report_.K_lower; }
    std::optional<int> k_order() const noexcept { return report_.k_order; }

    /// s / sqrt(F(s)) on (0, theta), written as 1 / sqrt(F/s^2) so that the
    /// s -> 0 limit 1/lambda is reached without 0/0.
    double shift_ratio(double s) const {
        const double q = lambda() * lambda() + F_minus_quadratic(s) / (s * s);
        return 1.0 / std::sqrt(q);
    }

private:
    ReactionTerm term_;
    ValidationReport report_;
};

struct DerivedConstants {
    double lambda = 0.0;
    double A = 0.0;     // tail amplitude of the ground state
    double I_F = 0.0;   // int_0^theta sqrt(F)
    double A_exponent = 0.0;  // int_0^theta [lambda/sqrt(F) - 1/s] ds
    std::optional<double> c_hat;  // needs f''(0)
    std::optional<int> k;         // order for H_k
    std::optional<double> H_k;
    std::optional<double> fk0;    // f^{(k)}(0)

    /// Drift coefficient c(b); vanishes at b = 1/lambda.
    double c_of_b(double b) const {
        return lambda * lambda * (1.0 - b * lambda) * A * A / ((1.0 + b * lambda) * I_F);
    }
};

/// int_0^theta [lambda/sqrt(F(s)) - 1/s] ds. Near s = 0 the integrand is
/// written as -(F - lambda^2 s^2) / (s sqrt(F) (lambda s + sqrt(F))), which is
/// bounded and free of cancellation; near theta the square-root singularity
/// is removed with s = theta - w^2.
inline double tail_amplitude_exponent(const Nonlinearity& f, const num::QuadOptions& opt = {}) {
    const double lam = f.lambda();
    const double th = f.theta();
    const double mid = 0.5 * th;
    auto near_zero = [&](double s) {
        const double F = f.F(s);
        const double sq = std::sqrt(F);
        return -f.F_minus_quadratic(s) / (s * sq * (lam * s + sq));
    };
    auto near_theta = [&](double w) {
        const double s = th - w * w;
        return 2.0 * w * lam / std::sqrt(f.F_drop(th, w * w)) - 2.0 * w / s;
    };
    const auto s_breaks = f.breaks(0.0, mid, [](double s) { return s; });
    const auto w_breaks = f.breaks(mid, th, [th](double s) { return std::sqrt(th - s); });
    return num::integrate_split(near_zero, 0.0, mid, s_breaks, opt) +
           num::integrate_split(near_theta, 0.0, std::sqrt(th - mid), w_breaks, opt);
}

inline DerivedConstants compute_constants(const Nonlinearity& f, const num::QuadOptions& opt = {}) {
    DerivedConstants dc;
    dc.lambda = f.lambda();
    const double th = f.theta();
    dc.A_exponent = tail_amplitude_exponent(f, opt);
    dc.A = th * std::exp(dc.A_exponent);
    // Above theta/2, s = theta - w^2 removes the endpoint square root; below
    // it F(s) is used directly since F(theta) = 0 makes the drop form cancel.
    const double mid = 0.5 * th;
    dc.I_F = num::integrate_split([&](double s) { return std::sqrt(std::max(0.0, f.F(s))); }, 0.0, mid,
                                  f.breaks(0.0, mid, [](double s) { return s; }), opt) +
             num::integrate_split([&](double w) { return 2.0 * w * std::sqrt(std::max(0.0, f.F_drop(th, w * w))); },
                                  0.0, std::sqrt(th - mid),
                                  f.breaks(mid, th, [th](double s) { return std::sqrt(th - s); }), opt);
    require(dc.A > 0.0 && dc.I_F > 0.0, ErrorCode::QuadratureFailure, "A or I_F not positive");

    if (const auto f2 = f.derivative_at_zero(2)) dc.c_hat = *f2 * dc.A * dc.A * dc.A / (12.0 * dc.I_F);
    if (const auto k = f.k_order()) {
        const auto fk = f.derivative_at_zero(*k);
        double fact = 1.0;
        for (int j = 2; j <= *k + 1; ++j) fact *= j;
        dc.k = *k;
        dc.fk0 = *fk;
        dc.H_k = *fk * std::pow(dc.A, *k) / (dc.lambda * fact * (*k - 1));
    }
    return dc;
}

inline double require_c_hat(const DerivedConstants& dc) {
    if (!dc.c_hat) fail(ErrorCode::DerivativeUnavailable, "c-hat needs f''(0), which this nonlinearity does not supply");
    return *dc.c_hat;
}

enum class RegimeLabel { InfiniteShift, FiniteShift, Mixed };

constexpr std::string_view to_string(RegimeLabel r) noexcept {
    switch (r) {
        case RegimeLabel::InfiniteShift: return "InfiniteShift";
        case RegimeLabel::FiniteShift: return "FiniteShift";
        case RegimeLabel::Mixed: return "Mixed";
    }
    return "?";
}

struct RegimeReport {
    RegimeLabel label = RegimeLabel::InfiniteShift;
    double b = 0.0;
    std::vector<double> roots;  // zeros of b sqrt(F(s)) - s in (0, theta)
    int scan_samples = 0;
    int near_zero_probes = 0;
    double min_ratio = 0.0;      // min of s/sqrt(F) over the scan
    bool flagged = false;        // near-zero probes disagree with each other
    std::string note;
};

/// Classifies b against g(s) = s / sqrt(F(s)) on (0, theta).
/// FiniteShift: b >= g at every geometric probe s = theta 2^{-j}, j = 20..44.
/// InfiniteShift: b < g everywhere sampled. Mixed: otherwise. Probes that
/// disagree among themselves near 0 set `flagged`.
inline RegimeReport regime_partition(const Nonlinearity& f, double b, int samples = 10000) {
    require(b >= 0.0, ErrorCode::InvalidArgument, "b must be >= 0");
    RegimeReport rep;
    rep.b = b;
    rep.scan_samples = samples;
    const double th = f.theta();

    int below = 0, probes = 0;
    for (int j = 20; j <= 44; ++j, ++probes) {
        const double s = std::ldexp(th, -j);
        if (b >= f.shift_ratio(s)) ++below;
    }
    rep.near_zero_probes = probes;

    double min_g = std::numeric_limits<double>::infinity();
    bool any_le = false;
    for (int j = 1; j < samples; ++j) {
        const double s = th * j / samples;
        const double g = f.shift_ratio(s);
        min_g = std::min(min_g, g);
        if (b >= g) any_le = true;
    }
    for (int j = 1; j < 20; ++j) {
        const double g = f.shift_ratio(std::ldexp(th, -j));
        min_g = std::min(min_g, g);
        if (b >= g) any_le = true;
    }
    rep.min_ratio = min_g;

    if (below == probes) {
        rep.label = RegimeLabel::FiniteShift;
    } else if (!any_le && below == 0) {
        rep.label = RegimeLabel::InfiniteShift;
    } else {
        rep.label = RegimeLabel::Mixed;
    }
    if (below != 0 && below != probes) {
        rep.flagged = true;
        rep.note = "g(s) oscillates about b near s = 0; sequence condition not decidable on the probe grid";
    }

    if (b > 0.0) {
        rep.roots = num::scan_roots([&](double s) { return b / f.shift_ratio(s) - 1.0; }, 0.0, th, samples, 1e-15);
    }
    return rep;
}

}  // namespace rdrobin
