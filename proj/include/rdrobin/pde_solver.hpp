#pragma once

// Finite-difference evolution of u_t = u_xx + f(u) on a truncated half line
// [0, n dx] with u(0) = b u_x(0) at the left end and u = 0 at the right end.
// Diffusion is implicit (theta scheme, Thomas solves), reaction explicit at
// the midpoint through a half-step predictor.

#include "rdrobin/error.hpp"
#include "rdrobin/nonlinearity.hpp"
#include "rdrobin/numerics.hpp"
#include "rdrobin/steady_states.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rdrobin {

struct SolverConfig {
    double dx = 0.02;
    double dt = 0.01;
    double theta_scheme = 0.5;
    double L0 = 0.0;             // 0: chosen from the datum support and the margin
    double far_field_tol = 1e-12;
    double growth_margin = 0.0;  // 0: 20 / lambda
    double max_t = 0.0;          // 0: 2000 / lambda^2
    int rannacher_steps = 2;     // initial steps taken as two backward-Euler half steps

    double margin(const Nonlinearity& f) const { return growth_margin > 0 ? growth_margin : 20.0 / f.lambda(); }
    double horizon(const Nonlinearity& f) const {
        return max_t > 0 ? max_t : 2000.0 / (f.lambda() * f.lambda());
    }
};

/// Nodal values u_i at x_i = i dx, i = 0..n, with u_n = 0. Time is
/// steps * dt so that repeated runs agree bitwise.
struct Field {
    double b = 0.0;
    double dx = 0.0;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::vector<double> u;

    double t() const noexcept { return static_cast<double>(steps) * dt; }
    std::size_t n() const noexcept { return u.size() - 1; }
    double length() const noexcept { return dx * static_cast<double>(n()); }
    double x(std::size_t i) const noexcept { return dx * static_cast<double>(i); }
    double max() const { return *std::max_element(u.begin(), u.end()); }
    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
    }
};

// ---------------------------------------------------------------- data

enum class BumpShape { Triangle, Smooth, Plateau, TwoBump };

constexpr std::string_view to_string(BumpShape s) noexcept {
    switch (s) {
        case BumpShape::Triangle: return "triangle";
        case BumpShape::Smooth: return "smooth";
        case BumpShape::Plateau: return "plateau";
        case BumpShape::TwoBump: return "two-bump";
    }
    return "?";
}

inline std::optional<BumpShape> parse_bump_shape(std::string_view s) {
    if (s == "triangle") return BumpShape::Triangle;
    if (s == "smooth") return BumpShape::Smooth;
    if (s == "plateau") return BumpShape::Plateau;
    if (s == "two-bump" || s == "twobump") return BumpShape::TwoBump;
    return std::nullopt;
}

namespace detail {

inline double smooth_bump01(double q) {
    // exp(1 - 1/(1 - q^2)) on |q| < 1, peak 1 at q = 0
    if (std::abs(q) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = std::exp(-1.0 / t);
    const double c = std::exp(-1.0 / (1.0 - t));
    return a / (a + c);
}

}  // namespace detail

/// phi supported in [0, h], max phi = 1.
struct ScaledBump {
    BumpShape shape = BumpShape::Triangle;
    double h = 1.0;

    double operator()(double x) const {
        if (x < 0.0 || x > h) return 0.0;
        switch (shape) {
            case BumpShape::Triangle: return std::max(0.0, 1.0 - std::abs(2.0 * x / h - 1.0));
            case BumpShape::Smooth: return detail::smooth_bump01(2.0 * x / h - 1.0);
            case BumpShape::Plateau: {
                const double d = 0.1 * h;
                return detail::smooth_step(x / d) * detail::smooth_step((h - x) / d);
            }
            case BumpShape::TwoBump: {
                const double w = 0.4 * h;
                return detail::smooth_bump01(2.0 * x / w - 1.0) + detail::smooth_bump01(2.0 * (x - 0.6 * h) / w - 1.0);
            }
        }
        return 0.0;
    }
    double support() const noexcept { return h; }
};

/// V(x - z0) on [0, 2 z0] followed by a C^1 cap on (2 z0, 2 z0 + rho] that is
/// steeper than V and vanishes at 2 z0 + rho: V(x - z0) - V(z0 + rho) q^2,
/// q = (x - 2 z0) / rho.
struct CappedGround {
    std::shared_ptr<const SteadyProfile> V;
    double z0 = 0.0;
    double rho = 1.0;

    double operator()(double x) const {
        if (x < 0.0 || x >= 2.0 * z0 + rho) return 0.0;
        const double base = V->value(x - z0);
        if (x <= 2.0 * z0) return base;
        const double q = (x - 2.0 * z0) / rho;
        return std::max(0.0, base - V->value(z0 + rho) * q * q);
    }
    double support() const noexcept { return 2.0 * z0 + rho; }
};

/// Zero on [0, 2 L_m - x'_m] and a smooth bump of the given width after it.
struct BumpOffset {
    double m = 0.0;
    double x_prime = 0.0;
    double L_m = 0.0;
    double width = 1.0;

    double start() const noexcept { return 2.0 * L_m - x_prime; }
    double operator()(double x) const { return detail::smooth_bump01(2.0 * (x - start()) / width - 1.0); }
    double support() const noexcept { return start() + width; }
};

/// V(x - z) on the half line; not compactly supported but below any
/// tolerance beyond `support(tol)`.
struct GroundShiftDatum {
    std::shared_ptr<const SteadyProfile> V;
    double z = 0.0;

    double operator()(double x) const { return x < 0.0 ? 0.0 : V->value(x - z); }
    double support() const {
        const auto& t = V->tail();
        return z + std::log(std::max(t.A, 1.0) / 1e-300) / t.lambda;
    }
};

/// Any other profile given as a function and a support bound.
struct CustomDatum {
    std::string name;
    std::function<double(double)> phi;
    double support_bound = 0.0;

    double operator()(double x) const { return x < 0.0 ? 0.0 : phi(x); }
    double support() const noexcept { return support_bound; }
};

/// Initial datum sigma * phi.
class InitialDatum {
public:
    using Family = std::variant<ScaledBump, CappedGround, BumpOffset, GroundShiftDatum, CustomDatum>;

    InitialDatum(Family family, double sigma = 1.0) : family_(std::move(family)), sigma_(sigma) {}

    static InitialDatum bump(BumpShape shape, double h, double sigma = 1.0) {
        require(h > 0.0, ErrorCode::InvalidArgument, "bump width h must be positive");
        return InitialDatum(ScaledBump{shape, h}, sigma);
    }

    double sigma() const noexcept { return sigma_; }
    InitialDatum with_sigma(double s) const { return InitialDatum(family_, s); }
    const Family& family() const noexcept { return family_; }

    double phi(double x) const {
        return std::visit([x](const auto& p) { return p(x); }, family_);
    }
    double operator()(double x) const { return sigma_ * phi(x); }
    double support() const {
        return std::visit([](const auto& p) { return p.support(); }, family_);
    }

    std::string name() const {
        struct V {
            std::string operator()(const ScaledBump& s) const { return std::string(to_string(s.shape)); }
            std::string operator()(const CappedGround&) const { return "capped-ground"; }
            std::string operator()(const BumpOffset&) const { return "bump-offset"; }
            std::string operator()(const GroundShiftDatum&) const { return "ground-shift"; }
            std::string operator()(const CustomDatum& c) const { return c.name; }
        };
        return std::visit(V{}, family_);
    }

    /// Shape parameters as (key, value) pairs for reports.
    std::vector<std::pair<std::string, double>> parameters() const {
        struct V {
            std::vector<std::pair<std::string, double>> operator()(const ScaledBump& s) const { return {{"h", s.h}}; }
            std::vector<std::pair<std::string, double>> operator()(const CappedGround& c) const {
                return {{"z0", c.z0}, {"rho", c.rho}};
            }
            std::vector<std::pair<std::string, double>> operator()(const BumpOffset& b) const {
                return {{"m", b.m}, {"x_prime", b.x_prime}, {"L_m", b.L_m}, {"width", b.width}};
            }
            std::vector<std::pair<std::string, double>> operator()(const GroundShiftDatum& g) const {
                return {{"z", g.z}};
            }
            std::vector<std::pair<std::string, double>> operator()(const CustomDatum& c) const {
                return {{"support", c.support_bound}};
            }
        };
        return std::visit(V{}, family_);
    }

private:
    Family family_;
    double sigma_;
};

/// Point x'_m in (0, L_m) with v_m(x) = b v_m'(x), by bisection on the
/// compact bump's rising half. Exists for m close to theta when the ground
/// shift set is nonempty.
inline std::optional<double> bump_robin_point(const Nonlinearity& f, double m, double b) {
    const double L = bump_half_width(f, m);
    if (b == 0.0) return 0.0;
    // On the rising half v' = sqrt(F(v) - F(m)); v = b v' in terms of v alone.
    auto g = [&](double v) { return v - b * std::sqrt(std::max(0.0, f.F_drop(m, m - v))); };
    const auto roots = num::scan_roots(g, 0.0, m, 4000, 1e-15);
    if (roots.empty()) return std::nullopt;
    const double v1 = roots.front();
    auto rate = [&](double w) {
        if (w == 0.0) return 2.0 / std::sqrt(2.0 * f.f(m));
        return 2.0 * w / std::sqrt(f.F_drop(m, w * w));
    };
    // x(v) = L_m - int_v^m ds / sqrt(F(s) - F(m))
    return L - num::integrate_split(rate, 0.0, std::sqrt(m - v1), bump_breaks(f, m));
}

inline InitialDatum make_bump_offset(const Nonlinearity& f, double m, double b, double width, double sigma = 1.0) {
    const auto xp = bump_robin_point(f, m, b);
    require(xp.has_value(), ErrorCode::InvalidM, "v_m never meets v = b v' for this m and b");
    return InitialDatum(BumpOffset{m, *xp, bump_half_width(f, m), width}, sigma);
}

/// Grid with room for the datum plus twice the growth margin.
inline Field make_field(const InitialDatum& datum, double b, const SolverConfig& cfg, const Nonlinearity& f) {
    require(b >= 0.0, ErrorCode::InvalidArgument, "b must be >= 0");
    require(cfg.dx > 0.0 && cfg.dt > 0.0, ErrorCode::InvalidArgument, "dx and dt must be positive");
    Field fld;
    fld.b = b;
    fld.dx = cfg.dx;
    fld.dt = cfg.dt;
    double support = datum.support();
    if (std::holds_alternative<GroundShiftDatum>(datum.family())) {
        const auto& g = std::get<GroundShiftDatum>(datum.family());
        support = g.z + std::log(g.V->tail().A / cfg.far_field_tol) / f.lambda();
    }
    const double L = std::max(cfg.L0, support + 2.0 * cfg.margin(f));
    const auto n = static_cast<std::size_t>(std::ceil(L / cfg.dx));
    fld.u.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) fld.u[i] = std::max(0.0, datum(fld.x(i)));
    if (b == 0.0) fld.u[0] = 0.0;
    fld.u[n] = 0.0;
    return fld;
}

// ---------------------------------------------------------------- stepping

namespace detail {

/// LU factors of (I - c D) for the discrete Laplacian with the Robin ghost
/// node on the left and u_n = 0 on the right. Unknowns are i = first..n-1.
class Tridiagonal {
public:
    Tridiagonal() = default;
    Tridiagonal(std::size_t n, double dx, double b, double c) : n_(n), first_(b == 0.0 ? 1 : 0) {
        const double r = c / (dx * dx);
        const std::size_t m = n - first_;
        lower_.assign(m, -r);
        upper_.assign(m, -r);
        diag_.assign(m, 1.0 + 2.0 * r);
        if (first_ == 0) {
            // row 0: u_0 - c (2 u_1 - 2 (1 + dx/b) u_0) / dx^2
            diag_[0] = 1.0 + 2.0 * r * (1.0 + dx / b);
            upper_[0] = -2.0 * r;
        }
        // forward elimination factors
        cp_.assign(m, 0.0);
        inv_.assign(m, 0.0);
        inv_[0] = 1.0 / diag_[0];
        cp_[0] = upper_[0] * inv_[0];
        for (std::size_t i = 1; i < m; ++i) {
            inv_[i] = 1.0 / (diag_[i] - lower_[i] * cp_[i - 1]);
            cp_[i] = upper_[i] * inv_[i];
        }
    }

    std::size_t first() const noexcept { return first_; }

    /// Solves in place on rhs[first..n-1]; rhs[n] is left untouched.
    void solve(std::span<double> rhs) const {
        const std::size_t m = n_ - first_;
        double* d = rhs.data() + first_;
        d[0] *= inv_[0];
        for (std::size_t i = 1; i < m; ++i) d[i] = (d[i] - lower_[i] * d[i - 1]) * inv_[i];
        for (std::size_t i = m - 1; i-- > 0;) d[i] -= cp_[i] * d[i + 1];
    }

private:
    std::size_t n_ = 0;
    std::size_t first_ = 0;
    std::vector<double> lower_, upper_, diag_, cp_, inv_;
};

}  // namespace detail

/// out = D u on the unknowns (out[n] = 0; out[0] = 0 when b = 0).
inline void apply_laplacian(const Field& fld, std::span<const double> u, std::span<double> out) {
    const std::size_t n = fld.n();
    const double inv = 1.0 / (fld.dx * fld.dx);
    if (fld.b > 0.0) {
        out[0] = (2.0 * u[1] - 2.0 * (1.0 + fld.dx / fld.b) * u[0]) * inv;
    } else {
        out[0] = 0.0;
    }
    for (std::size_t i = 1; i < n; ++i) out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv;
    out[n] = 0.0;
}

/// Stateful stepper: caches factorizations per (node count, coefficient).
class Stepper {
public:
    Stepper(const Nonlinearity& f, const SolverConfig& cfg, double u0_sup)
        : f_(&f), cfg_(cfg), bound_(10.0 * std::max(1.0, u0_sup)) {
        require(cfg.theta_scheme >= 0.0 && cfg.theta_scheme <= 1.0, ErrorCode::InvalidArgument,
                "theta_scheme must lie in [0,1]");
        for (int j = 0; j <= 1000; ++j) unit_slope_ = std::max(unit_slope_, std::abs(f.fp(j / 1000.0)));
    }

    std::int64_t clipped() const noexcept { return clipped_; }

    std::int64_t substeps() const noexcept { return substeps_; }

    /// Advances by dt. While u > 1 somewhere the step is cut into substeps k
    /// with k max|f'(u)| <= 1/2, re-measured after every substep.
    void step(Field& fld) {
        double left = fld.dt;
        bool split = false;
        while (left > 0.0) {
            double k = left;
            if (fld.max() > 1.0) {
                double s = unit_slope_;
                for (double v : fld.u)
                    if (v > 1.0) s = std::max(s, std::abs(f_->fp(v)));
                k = std::min(left, 0.5 / s);
                if (k < left) split = true;
                // avoid a sliver at the end of the step
                if (left - k < 1e-3 * fld.dt) k = left;
            }
            if (fld.steps < cfg_.rannacher_steps) {
                sub_step(fld, 0.5 * k, 1.0);
                sub_step(fld, 0.5 * k, 1.0);
            } else {
                sub_step(fld, k, cfg_.theta_scheme);
            }
            if (split) ++substeps_;
            left = k == left ? 0.0 : left - k;
        }
        ++fld.steps;
    }

private:
    const detail::Tridiagonal& factors(const Field& fld, double c) {
        auto key = std::make_pair(fld.n(), c);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            if (cache_.size() > 16) cache_.clear();
            it = cache_.emplace(key, detail::Tridiagonal(fld.n(), fld.dx, fld.b, c)).first;
        }
        return it->second;
    }

    // One predictor-corrector step of size k with weight th on the new level.
    void sub_step(Field& fld, double k, double th) {
        const std::size_t n = fld.n();
        auto& u = fld.u;
        fu_.resize(n + 1);
        star_.resize(n + 1);
        lap_.resize(n + 1);

        // predictor: (I - k/2 D) u* = u + k/2 f(u)
        f_->f_many(u, fu_);
        for (std::size_t i = 0; i <= n; ++i) star_[i] = u[i] + 0.5 * k * fu_[i];
        star_[n] = 0.0;
        if (fld.b == 0.0) star_[0] = 0.0;
        factors(fld, 0.5 * k).solve(star_);

        // corrector: (I - th k D) u' = (I + (1-th) k D) u + k f(u*)
        f_->f_many(star_, fu_);
        if (th < 1.0) {
            apply_laplacian(fld, u, lap_);
            for (std::size_t i = 0; i < n; ++i) u[i] += (1.0 - th) * k * lap_[i] + k * fu_[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) u[i] += k * fu_[i];
        }
        u[n] = 0.0;
        if (fld.b == 0.0) u[0] = 0.0;
        if (th > 0.0) factors(fld, th * k).solve(u);

        for (std::size_t i = 0; i <= n; ++i) {
            const double v = u[i];
            if (v < 0.0) {
                if (v < -10.0 * num::kEps) {
                    fail(ErrorCode::NegativeUndershoot,
                         "u = " + std::to_string(v) + " at x = " + std::to_string(fld.x(i)) + ", t = " +
                             std::to_string(fld.t()));
                }
                u[i] = 0.0;
                ++clipped_;
            } else if (!(v <= bound_)) {
                fail(ErrorCode::NumericalBlowup,
                     "|u| exceeded " + std::to_string(bound_) + " at x = " + std::to_string(fld.x(i)));
            }
        }
    }

    const Nonlinearity* f_;
    SolverConfig cfg_;
    double bound_;
    std::int64_t clipped_ = 0;
    std::int64_t substeps_ = 0;
    double unit_slope_ = 0.0;
    std::map<std::pair<std::size_t, double>, detail::Tridiagonal> cache_;
    std::vector<double> fu_, star_, lap_;
};

/// One step from a fresh stepper (for isolated use; runs keep one stepper).
inline Field step(Field fld, const SolverConfig& cfg, const Nonlinearity& f) {
    Stepper s(f, cfg, fld.max());
    s.step(fld);
    return fld;
}

// ---------------------------------------------------------------- diagnostics

/// Discrete energy sum (u_{i+1} - u_i)^2 / dx + trapezoid of F(u) + u_0^2 / b.
/// For the semi-discrete scheme it decreases exactly along solutions.
inline double energy(const Field& fld, const Nonlinearity& f) {
    const auto& u = fld.u;
    const std::size_t n = fld.n();
    double grad = 0.0, pot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = u[i + 1] - u[i];
        grad += d * d;
    }
    for (std::size_t i = 1; i < n; ++i) pot += f.F(u[i]);
    pot += 0.5 * f.F(u[0]);
    double e = grad / fld.dx + fld.dx * pot;
    if (fld.b > 0.0) e += u[0] * u[0] / fld.b;
    return e;
}

/// Strict sign alternations of consecutive centered differences whose size
/// is at least `flat`.
inline int sign_changes_ux(const Field& fld, double flat = 1e-13) {
    const auto& u = fld.u;
    int changes = 0;
    int last = 0;
    for (std::size_t i = 1; i < fld.n(); ++i) {
        const double d = u[i + 1] - u[i - 1];
        if (std::abs(d) < flat) continue;
        const int s = d > 0 ? 1 : -1;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return changes;
}

/// Left-boundary residual |u_0 - b (-3 u_0 + 4 u_1 - u_2) / (2 dx)|.
inline double robin_residual(const Field& fld) {
    const auto& u = fld.u;
    return std::abs(u[0] - fld.b * (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * fld.dx));
}

struct DecayReport {
    bool applicable = false;  // enough points above the noise floor
    bool bounded = false;     // tail decays at least like exp(-x^2 / (16 t))
    double slope = 0.0;       // fit of log u against -x^2/(16 t)
    double log_prefactor = 0.0;
    double margin = 0.0;      // slope - 1
    int points = 0;
    double x_from = 0.0;
};

/// Tail of u beyond x_from = max(2h, x_start) against the Gaussian envelope.
/// The prefactor C(t) is fitted, only the exponent is tested.
inline DecayReport decay_check(const Field& fld, double h, double x_start = 0.0, double floor = 1e-250) {
    DecayReport rep;
    const double t = fld.t();
    rep.x_from = std::max(2.0 * h, x_start);
    if (t <= 0.0) {
        rep.applicable = true;
        rep.bounded = true;
        for (std::size_t i = 0; i <= fld.n(); ++i)
            if (fld.x(i) > rep.x_from && fld.u[i] != 0.0) rep.bounded = false;
        rep.margin = std::numeric_limits<double>::infinity();
        return rep;
    }
    std::vector<double> X, Y;
    for (std::size_t i = 0; i < fld.n(); ++i) {
        const double x = fld.x(i);
        if (x <= rep.x_from || fld.u[i] <= floor) continue;
        X.push_back(-x * x / (16.0 * t));
        Y.push_back(std::log(fld.u[i]));
    }
    rep.points = static_cast<int>(X.size());
    if (X.size() < 8) {
        // Nothing above the floor: trivially bounded.
        rep.applicable = X.empty();
        rep.bounded = X.empty();
        rep.margin = X.empty() ? std::numeric_limits<double>::infinity() : 0.0;
        return rep;
    }
    const auto fit = num::fit_line(X, Y);
    rep.applicable = true;
    rep.slope = fit.slope;
    rep.log_prefactor = fit.intercept;
    rep.margin = fit.slope - 1.0;
    rep.bounded = fit.slope >= 1.0;
    return rep;
}

// ---------------------------------------------------------------- runs

struct Hook {
    double interval = 1.0;
    // Return true to stop the run.
    std::function<bool(const Field&)> fn;
};

struct LogRow {
    double t;
    double umax;
    double argmax;
    double energy;
    int signchanges;
    double domain_len;
};

struct RunRecord {
    Field final;
    std::vector<LogRow> log;
    std::int64_t clipped = 0;
    int growth_events = 0;
    bool stopped_by_hook = false;
};

struct RunOptions {
    std::vector<Hook> hooks;
    double log_every = 0.0;  // 0: no run log
    double t_end = 0.0;      // 0: cfg.horizon(f)
};

namespace detail {

inline std::int64_t interval_steps(double interval, double dt) {
    const double r = interval / dt;
    const auto k = static_cast<std::int64_t>(std::llround(r));
    require(k >= 1 && std::abs(r - static_cast<double>(k)) <= 1e-9 * r, ErrorCode::InvalidArgument,
            "hook interval must be a positive multiple of dt");
    return k;
}

}  // namespace detail

/// Doubles the interval by appending zero nodes; existing values are kept
/// bitwise.
inline void grow_domain(Field& fld) { fld.u.resize(2 * fld.n() + 1, 0.0); }

/// Advances to t_end or until a hook asks to stop. Hooks fire at t = 0 and
/// every `interval` after. The domain doubles (zeros appended) whenever u at
/// x_{n - margin} exceeds far_field_tol.
inline RunRecord run(Field fld, const SolverConfig& cfg, const Nonlinearity& f, const RunOptions& opt = {}) {
    RunRecord rec;
    Stepper stepper(f, cfg, fld.max());
    const double t_end = opt.t_end > 0.0 ? opt.t_end : cfg.horizon(f);
    const auto end_steps = static_cast<std::int64_t>(std::llround(t_end / fld.dt));
    std::vector<std::int64_t> every;
    for (const auto& h : opt.hooks) every.push_back(detail::interval_steps(h.interval, fld.dt));
    const std::int64_t log_k = opt.log_every > 0.0 ? detail::interval_steps(opt.log_every, fld.dt) : 0;
    const auto margin_nodes = static_cast<std::size_t>(std::ceil(cfg.margin(f) / fld.dx));

    auto fire = [&]() {
        if (log_k && fld.steps % log_k == 0) {
            const std::size_t am = fld.argmax();
            rec.log.push_back({fld.t(), fld.u[am], fld.x(am), energy(fld, f), sign_changes_ux(fld), fld.length()});
        }
        bool stop = false;
        for (std::size_t j = 0; j < opt.hooks.size(); ++j)
            if (fld.steps % every[j] == 0 && opt.hooks[j].fn(fld)) stop = true;
        return stop;
    };

    if (fire()) {
        rec.stopped_by_hook = true;
    } else {
        while (fld.steps < end_steps) {
            stepper.step(fld);
            if (fld.n() > margin_nodes && fld.u[fld.n() - margin_nodes] > cfg.far_field_tol) {
                grow_domain(fld);
                ++rec.growth_events;
            }
            if (fire()) {
                rec.stopped_by_hook = true;
                break;
            }
        }
    }
    rec.clipped = stepper.clipped();
    rec.final = std::move(fld);
    return rec;
}

}  // namespace rdrobin
