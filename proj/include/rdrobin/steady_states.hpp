#pragma once

// Bounded nonnegative steady states of v'' + f(v) = 0 built from the phase
// plane: the ground state V (v'^2 = F(v)), the active state v_*
// (v'^2 = F(v) - F(1)) and compact bumps v_m (v'^2 = F(v) - F(m)). Each arc is
// obtained by inverting its travel-distance integral, not by shooting.

#include "rdrobin/error.hpp"
#include "rdrobin/nonlinearity.hpp"
#include "rdrobin/numerics.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace rdrobin {

namespace detail {

/// Travel distance Y(w) = int_0^w rate(w') dw' along a phase-plane arc, for a
/// positive integrand `rate`. Inverts Y on an increasing list of targets by
/// safeguarded Newton, integrating only from the last converged point.
/// `breaks` lists ascending points where rate is not smooth.
class ArcInverter {
public:
    ArcInverter(std::function<double(double)> rate, double w_max, double w_start = 0.0, double y_start = 0.0,
                std::vector<double> breaks = {})
        : rate_(std::move(rate)), w_max_(w_max), w_anchor_(w_start), y_anchor_(y_start), breaks_(std::move(breaks)) {}

    double distance_to(double w) const { return y_anchor_ + num::integrate_split(rate_, w_anchor_, w, breaks_); }

    /// w with Y(w) = target; target must not decrease between calls.
    double solve(double target) {
        require(target >= y_anchor_ - 1e-14, ErrorCode::InversionFailure, "arc targets must be increasing");
        if (target <= y_anchor_) return w_anchor_;
        double lo = w_anchor_;
        double r0 = rate_(std::max(lo, 1e-300));
        double step = (target - y_anchor_) / std::max(r0, 1e-300);
        if (!std::isfinite(step) || step <= 0) step = 1e-3;
        double hi = std::min(w_max_, lo + 2.0 * step);
        while (hi < w_max_ && distance_to(hi) < target) {
            lo = hi;
            step *= 2.0;
            hi = std::min(w_max_, hi + step);
        }
        auto fn = [&](double w) { return std::make_pair(distance_to(w) - target, rate_(w)); };
        std::uintmax_t iters = 100;
        const double guess = std::clamp(w_anchor_ + (target - y_anchor_) / std::max(r0, 1e-300), lo, hi);
        const double w = boost::math::tools::newton_raphson_iterate(fn, guess, lo, hi, 50, iters);
        const double y = distance_to(w);
        if (!(std::abs(y - target) <= 1e-11 * std::max(1.0, std::abs(target))) || iters >= 100) {
            fail(ErrorCode::InversionFailure, "arc inversion did not converge at target " + std::to_string(target));
        }
        w_anchor_ = w;
        y_anchor_ = y;
        return w;
    }

private:
    std::function<double(double)> rate_;
    double w_max_;
    double w_anchor_;
    double y_anchor_;
    std::vector<double> breaks_;
};

}  // namespace detail

/// Distance z(V) = int_V^theta ds / sqrt(F(s)) from the ground-state peak.
/// Near theta the variable w = sqrt(theta - V) is used, below theta/2 the
/// variable nu = -ln V; both integrands are smooth.
class GroundArc {
public:
    explicit GroundArc(const Nonlinearity& f) : f_(&f), theta_(f.theta()) {
        w_mid_ = std::sqrt(0.5 * theta_);
        nu_mid_ = -std::log(0.5 * theta_);
        w_breaks_ = f.breaks(0.5 * theta_, theta_, [th = theta_](double s) { return std::sqrt(th - s); });
        nu_breaks_ = f.breaks(0.0, 0.5 * theta_, [](double s) { return -std::log(s); });
        z_mid_ = num::integrate_split([this](double w) { return rate_w(w); }, 0.0, w_mid_, w_breaks_);
    }

    double rate_w(double w) const {
        if (w == 0.0) return 2.0 / std::sqrt(2.0 * f_->f(theta_));
        return 2.0 * w / std::sqrt(f_->F_drop(theta_, w * w));
    }
    double rate_nu(double nu) const {
        const double s = std::exp(-nu);
        return s / std::sqrt(f_->F(s));
    }

    double theta() const noexcept { return theta_; }
    double z_mid() const noexcept { return z_mid_; }
    double w_mid() const noexcept { return w_mid_; }
    double nu_mid() const noexcept { return nu_mid_; }
    /// Non-smooth points of rate_w and rate_nu, ascending.
    const std::vector<double>& w_breaks() const noexcept { return w_breaks_; }
    const std::vector<double>& nu_breaks() const noexcept { return nu_breaks_; }

    double z_of(double V) const {
        require(V > 0.0 && V <= theta_, ErrorCode::InvalidArgument, "ground-state value must lie in (0, theta]");
        if (V >= 0.5 * theta_) {
            return num::integrate_split([this](double w) { return rate_w(w); }, 0.0, std::sqrt(theta_ - V), w_breaks_);
        }
        return z_mid_ +
               num::integrate_split([this](double nu) { return rate_nu(nu); }, nu_mid_, -std::log(V), nu_breaks_);
    }

    /// |V'| at value V from the first integral.
    double slope_of(double V) const {
        if (V <= 0.0) return 0.0;
        const double F = V > 0.5 * theta_ ? f_->F_drop(theta_, theta_ - V) : f_->F(V);
        return std::sqrt(std::max(0.0, F));
    }

private:
    const Nonlinearity* f_;
    double theta_;
    double w_mid_ = 0.0, nu_mid_ = 0.0, z_mid_ = 0.0;
    std::vector<double> w_breaks_, nu_breaks_;
};

/// Distance x(v) = int_0^v ds / sqrt(F(s) - F(1)) along the active state.
class ActiveArc {
public:
    explicit ActiveArc(const Nonlinearity& f) : f_(&f) {
        v_breaks_ = f.breaks(0.0, 0.5, [](double s) { return s; });
        tau_breaks_ = f.breaks(0.5, 1.0, [](double s) { return -std::log1p(-s); });
        x_mid_ = num::integrate_split([this](double v) { return rate_v(v); }, 0.0, 0.5, v_breaks_);
        tau_mid_ = std::log(2.0);
    }
    double rate_v(double v) const { return 1.0 / std::sqrt(f_->F_drop(1.0, 1.0 - v)); }
    // v = 1 - e^{-tau}
    double rate_tau(double tau) const {
        const double d = std::exp(-tau);
        return d / std::sqrt(f_->F_drop(1.0, d));
    }
    double x_mid() const noexcept { return x_mid_; }
    double tau_mid() const noexcept { return tau_mid_; }
    const std::vector<double>& v_breaks() const noexcept { return v_breaks_; }
    const std::vector<double>& tau_breaks() const noexcept { return tau_breaks_; }

    double x_of(double v) const {
        require(v >= 0.0 && v < 1.0, ErrorCode::InvalidArgument, "active-state value must lie in [0,1)");
        if (v <= 0.5) return num::integrate_split([this](double s) { return rate_v(s); }, 0.0, v, v_breaks_);
        return x_mid_ + num::integrate_split([this](double t) { return rate_tau(t); }, tau_mid_, -std::log1p(-v),
                                             tau_breaks_);
    }
    double slope_of(double v) const { return std::sqrt(std::max(0.0, f_->F_drop(1.0, 1.0 - v))); }

private:
    const Nonlinearity* f_;
    double x_mid_ = 0.0, tau_mid_ = 0.0;
    std::vector<double> v_breaks_, tau_breaks_;
};

/// Knots of f in (0, m) in the bump variable w = sqrt(m - s), ascending.
inline std::vector<double> bump_breaks(const Nonlinearity& f, double m) {
    return f.breaks(0.0, m, [m](double s) { return std::sqrt(m - s); });
}

/// Half-width L_m = int_0^m ds / sqrt(F(s) - F(m)) of the compact bump with
/// peak m in (theta, 1), with s = m - w^2.
inline double bump_half_width(const Nonlinearity& f, double m) {
    if (!(m > f.theta() && m < 1.0)) {
        fail(ErrorCode::InvalidM, "compact bump needs m in (theta, 1), got " + std::to_string(m));
    }
    auto rate = [&](double w) {
        if (w == 0.0) return 2.0 / std::sqrt(2.0 * f.f(m));
        return 2.0 * w / std::sqrt(f.F_drop(m, w * w));
    };
    return num::integrate_split(rate, 0.0, std::sqrt(m), bump_breaks(f, m));
}

enum class ProfileKind { Ground, Active, CompactBump };

constexpr std::string_view to_string(ProfileKind k) noexcept {
    switch (k) {
        case ProfileKind::Ground: return "ground";
        case ProfileKind::Active: return "active";
        case ProfileKind::CompactBump: return "compact_bump";
    }
    return "?";
}

/// Analytic continuation beyond the tabulated range.
struct ProfileTail {
    // Ground: V(z) ~ A e^{-lambda|z|} - H e^{-k lambda |z|}
    double A = 0.0;
    double lambda = 0.0;
    double H = 0.0;
    int k = 0;
    // Active: 1 - v ~ (1 - v_N) e^{-mu (x - x_N)}
    double mu = 0.0;
    // CompactBump: support [0, support_end]
    double support_end = 0.0;
};

/// A tabulated steady state on a uniform grid with slopes from the first
/// integral; evaluation is cubic Hermite inside the grid and the analytic
/// tail outside.
class SteadyProfile {
public:
    SteadyProfile(ProfileKind kind, double x0, double h, std::vector<double> values, std::vector<double> derivs,
                  ProfileTail tail, double m = 0.0, double half_width = 0.0)
        : kind_(kind), x0_(x0), h_(h), values_(std::move(values)), derivs_(std::move(derivs)), tail_(tail),
          m_(m), half_width_(half_width) {}

    ProfileKind kind() const noexcept { return kind_; }
    double m() const noexcept { return m_; }
    double half_width() const noexcept { return half_width_; }
    double spacing() const noexcept { return h_; }
    double x_begin() const noexcept { return x0_; }
    double x_end() const noexcept { return x0_ + h_ * static_cast<double>(values_.size() - 1); }
    const ProfileTail& tail() const noexcept { return tail_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<double>& derivs() const noexcept { return derivs_; }

    std::vector<double> grid() const {
        std::vector<double> g(values_.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = x0_ + h_ * static_cast<double>(i);
        return g;
    }

    double value(double x) const {
        if (x < x0_ || x > x_end()) return tail_value(x);
        const auto [i, t] = locate(x);
        return num::hermite(values_[i], derivs_[i], values_[i + 1], derivs_[i + 1], h_, t);
    }

    double deriv(double x) const {
        if (x < x0_ || x > x_end()) return tail_deriv(x);
        const auto [i, t] = locate(x);
        return num::hermite_derivative(values_[i], derivs_[i], values_[i + 1], derivs_[i + 1], h_, t);
    }

    void write_csv(std::ostream& os) const {
        os << "z,v,vprime\n";
        char buf[128];
        for (std::size_t i = 0; i < values_.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x0_ + h_ * static_cast<double>(i), values_[i],
                          derivs_[i]);
            os << buf;
        }
    }

private:
    std::pair<std::size_t, double> locate(double x) const {
        const double r = (x - x0_) / h_;
        std::size_t i = static_cast<std::size_t>(r);
        if (i >= values_.size() - 1) i = values_.size() - 2;
        return {i, r - static_cast<double>(i)};
    }

    double tail_value(double x) const {
        switch (kind_) {
            case ProfileKind::Ground: {
                const double a = std::abs(x);
                return tail_.A * std::exp(-tail_.lambda * a) - tail_.H * std::exp(-tail_.k * tail_.lambda * a);
            }
            case ProfileKind::Active:
                if (x < x0_) return 0.0;
                return 1.0 - (1.0 - values_.back()) * std::exp(-tail_.mu * (x - x_end()));
            case ProfileKind::CompactBump:
                return 0.0;
        }
        return 0.0;
    }
    double tail_deriv(double x) const {
        switch (kind_) {
            case ProfileKind::Ground: {
                const double a = std::abs(x);
                const double mag = tail_.lambda * tail_.A * std::exp(-tail_.lambda * a) -
                                   tail_.k * tail_.lambda * tail_.H * std::exp(-tail_.k * tail_.lambda * a);
                return x > 0 ? -mag : mag;
            }
            case ProfileKind::Active:
                if (x < x0_) return 0.0;
                return tail_.mu * (1.0 - values_.back()) * std::exp(-tail_.mu * (x - x_end()));
            case ProfileKind::CompactBump:
                return 0.0;
        }
        return 0.0;
    }

    ProfileKind kind_;
    double x0_, h_;
    std::vector<double> values_, derivs_;
    ProfileTail tail_;
    double m_, half_width_;
};

/// Ground state V on [-z_max, z_max] with n intervals per half line
/// (spacing z_max / n), V(0) = theta, even.
inline SteadyProfile build_ground_state(const Nonlinearity& f, double z_max, int n) {
    const double lam = f.lambda();
    require(z_max >= 5.0 / lam - 1e-12, ErrorCode::InvalidArgument, "z_max must be >= 5/lambda");
    require(n >= 10, ErrorCode::InvalidArgument, "n too small");
    const DerivedConstants dc = compute_constants(f);
    const GroundArc arc(f);
    const double th = f.theta();
    const double h = z_max / n;

    std::vector<double> half_v(n + 1), half_d(n + 1);
    half_v[0] = th;
    half_d[0] = 0.0;
    detail::ArcInverter near_peak([&](double w) { return arc.rate_w(w); }, arc.w_mid(), 0.0, 0.0, arc.w_breaks());
    detail::ArcInverter far([&](double nu) { return arc.rate_nu(nu); }, 800.0, arc.nu_mid(), arc.z_mid(),
                            arc.nu_breaks());
    for (int k = 1; k <= n; ++k) {
        const double z = k * h;
        double V;
        if (z <= arc.z_mid()) {
            const double w = near_peak.solve(z);
            V = th - w * w;
        } else {
            V = std::exp(-far.solve(z));
        }
        if (!(V > 0.0 && V < half_v[k - 1])) fail(ErrorCode::InversionFailure, "ground-state arc not monotone");
        half_v[k] = V;
        half_d[k] = -arc.slope_of(V);
    }

    std::vector<double> vals(2 * n + 1), ders(2 * n + 1);
    for (int k = 0; k <= n; ++k) {
        vals[n + k] = half_v[k];
        vals[n - k] = half_v[k];
        ders[n + k] = half_d[k];
        ders[n - k] = -half_d[k];
    }
    ProfileTail tail;
    tail.A = dc.A;
    tail.lambda = lam;
    if (dc.H_k && dc.k) {
        tail.H = *dc.H_k;
        tail.k = *dc.k;
    }
    return SteadyProfile(ProfileKind::Ground, -z_max, h, std::move(vals), std::move(ders), tail);
}

/// Active state v_* on [0, x_max] with n intervals.
inline SteadyProfile build_active_state(const Nonlinearity& f, double x_max, int n) {
    require(f.F_one() < 0.0, ErrorCode::InvalidArgument, "active state needs F(1) < 0");
    require(x_max > 0.0 && n >= 10, ErrorCode::InvalidArgument, "bad active-state grid");
    const ActiveArc arc(f);
    const double h = x_max / n;
    std::vector<double> v(n + 1), d(n + 1);
    v[0] = 0.0;
    d[0] = arc.slope_of(0.0);
    detail::ArcInverter low([&](double s) { return arc.rate_v(s); }, 0.5, 0.0, 0.0, arc.v_breaks());
    detail::ArcInverter high([&](double t) { return arc.rate_tau(t); }, 800.0, arc.tau_mid(), arc.x_mid(),
                             arc.tau_breaks());
    for (int k = 1; k <= n; ++k) {
        const double x = k * h;
        if (x <= arc.x_mid()) {
            v[k] = low.solve(x);
        } else {
            v[k] = -std::expm1(-high.solve(x));
        }
        d[k] = arc.slope_of(v[k]);
    }
    ProfileTail tail;
    tail.mu = std::sqrt(-f.fp(1.0));
    return SteadyProfile(ProfileKind::Active, 0.0, h, std::move(v), std::move(d), tail);
}

/// Compact bump v_m on [0, 2 L_m] with n intervals (n even), extended by 0.
inline SteadyProfile build_compact_bump(const Nonlinearity& f, double m, int n) {
    const double L = bump_half_width(f, m);
    require(n >= 10, ErrorCode::InvalidArgument, "n too small");
    if (n % 2) ++n;
    const double h = 2.0 * L / n;
    const int half = n / 2;
    auto rate = [&](double w) {
        if (w == 0.0) return 2.0 / std::sqrt(2.0 * f.f(m));
        return 2.0 * w / std::sqrt(f.F_drop(m, w * w));
    };
    detail::ArcInverter inv(rate, std::sqrt(m), 0.0, 0.0, bump_breaks(f, m));
    std::vector<double> v(n + 1), d(n + 1);
    v[half] = m;
    d[half] = 0.0;
    for (int k = 1; k <= half; ++k) {
        double val;
        if (k == half) {
            val = 0.0;
        } else {
            const double w = inv.solve(k * h);
            val = m - w * w;
        }
        const double slope = std::sqrt(std::max(0.0, f.F_drop(m, m - val)));
        v[half - k] = val;
        v[half + k] = val;
        d[half - k] = slope;
        d[half + k] = -slope;
    }
    ProfileTail tail;
    tail.support_end = 2.0 * L;
    return SteadyProfile(ProfileKind::CompactBump, 0.0, h, std::move(v), std::move(d), tail, m, L);
}

struct GroundShift {
    double s0;  // V(-z) = s0 with b sqrt(F(s0)) = s0
    double z;
};

struct ShiftSets {
    double b = 0.0;
    std::vector<GroundShift> ground;
    std::vector<double> active;  // z <= 0 with v_*(-z) = b v_*'(-z)
    int scan_samples = 0;
};

/// Ground and active shift sets for Robin parameter b. The ground set comes
/// from the roots of b sqrt(F(s)) = s on (0, theta); the active set from the
/// roots of v = b sqrt(F(v) - F(1)) restricted to the tabulated range of v_*.
inline ShiftSets find_shift_sets(const Nonlinearity& f, const SteadyProfile& V, const SteadyProfile& vstar, double b,
                                 int samples = 10000) {
    require(b >= 0.0, ErrorCode::InvalidArgument, "b must be >= 0");
    require(V.kind() == ProfileKind::Ground && vstar.kind() == ProfileKind::Active, ErrorCode::InvalidArgument,
            "find_shift_sets needs a ground and an active profile");
    ShiftSets out;
    out.b = b;
    out.scan_samples = samples;
    if (b == 0.0) {
        out.active.push_back(0.0);
        return out;
    }
    const GroundArc garc(f);
    const double th = f.theta();
    for (double s0 : num::scan_roots([&](double s) { return b / f.shift_ratio(s) - 1.0; }, 0.0, th, samples, 1e-15)) {
        out.ground.push_back({s0, garc.z_of(s0)});
    }
    const ActiveArc aarc(f);
    auto active_fn = [&](double v) { return v - b * aarc.slope_of(v); };
    for (double v : num::scan_roots(active_fn, 0.0, 1.0, samples, 1e-15)) {
        const double x = aarc.x_of(v);
        if (x <= vstar.x_end()) out.active.push_back(-x);
    }
    std::sort(out.active.begin(), out.active.end());
    return out;
}

enum class OrbitType { Trivial, Ground, Periodic, CompactBump, Active, Unbounded };

constexpr std::string_view to_string(OrbitType o) noexcept {
    switch (o) {
        case OrbitType::Trivial: return "trivial";
        case OrbitType::Ground: return "ground";
        case OrbitType::Periodic: return "periodic";
        case OrbitType::CompactBump: return "compact_bump";
        case OrbitType::Active: return "active";
        case OrbitType::Unbounded: return "unbounded";
    }
    return "?";
}

/// Phase-plane classification of the orbit through (v, v') with v in [0, 1],
/// by its level q = F(v) - v'^2. Periodic orbits are recognised but never
/// tabulated.
inline OrbitType classify_orbit(const Nonlinearity& f, double v, double vp, double tol = 1e-12) {
    if (v == 0.0 && vp == 0.0) return OrbitType::Trivial;
    const double q = f.F(v) - vp * vp;
    const double Fa = f.F(f.alpha());
    if (std::abs(q) <= tol) return OrbitType::Ground;
    if (std::abs(q - f.F_one()) <= tol) return OrbitType::Active;
    if (q > 0.0 && q <= Fa + tol) return OrbitType::Periodic;
    if (q < 0.0 && q > f.F_one()) return OrbitType::CompactBump;
    return OrbitType::Unbounded;
}

}  // namespace rdrobin
