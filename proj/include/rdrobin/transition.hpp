#pragma once

// Transition-case dynamics: the pulse position xi(t) of a near-threshold
// solution, the Robin-compatible family Phi(x, xi) = V(xi - x) - B(xi) e^{-lambda x}
// along which it drifts, and the reduced law y' = c(b) e^{-2 lambda y}
// (y' = c_hat e^{-3 lambda y} when b lambda = 1).

#include "rdrobin/error.hpp"
#include "rdrobin/nonlinearity.hpp"
#include "rdrobin/numerics.hpp"
#include "rdrobin/pde_solver.hpp"
#include "rdrobin/steady_states.hpp"
#include "rdrobin/threshold.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rdrobin {

// ---------------------------------------------------------------- pulse

struct PulseSample {
    double t;
    double xi;
    double umax;
};

/// Leftmost local maximum of u above alpha, refined by the parabola through
/// the node and its two neighbours. A maximum at x = 0 is reported as 0.
inline std::optional<PulseSample> pulse_position(const Field& fld, double alpha) {
    const auto& u = fld.u;
    const std::size_t n = fld.n();
    if (n < 2) return std::nullopt;
    if (u[0] > alpha && u[0] > u[1]) return PulseSample{fld.t(), 0.0, u[0]};
    for (std::size_t i = 1; i < n; ++i) {
        if (u[i] > alpha && u[i] >= u[i - 1] && u[i] > u[i + 1]) {
            const double a = u[i - 1], c = u[i], e = u[i + 1];
            const double curv = a - 2.0 * c + e;
            const double d = curv < 0.0 ? 0.5 * (a - e) / curv : 0.0;
            return PulseSample{fld.t(), fld.x(i) + d * fld.dx, c - 0.25 * (a - e) * d};
        }
    }
    return std::nullopt;
}

struct PulseTrajectory {
    std::vector<PulseSample> samples;
    double band_lo = 0.0;  // umax band marking a transition-like shape
    double band_hi = 0.0;
    std::size_t valid_begin = 0;  // [valid_begin, valid_end) into samples
    std::size_t valid_end = 0;
    bool lost = false;  // no maximum above alpha: the run has resolved
    double lost_at = 0.0;

    bool has_window() const noexcept { return valid_end > valid_begin; }
    double t_start() const { return samples.at(valid_begin).t; }
    double t_end() const { return samples.at(valid_end - 1).t; }
    std::span<const PulseSample> window() const {
        return std::span<const PulseSample>(samples).subspan(valid_begin, valid_end - valid_begin);
    }
};

/// Collects pulse samples from a run through a hook. The valid window is the
/// longest contiguous stretch of samples with umax inside the band
/// (alpha + 0.1 (theta - alpha), theta + 0.1 (1 - theta)) by default.
class PulseTracker {
public:
    explicit PulseTracker(const Nonlinearity& f) : alpha_(f.alpha()) {
        lo_ = f.alpha() + 0.1 * (f.theta() - f.alpha());
        hi_ = f.theta() + 0.1 * (1.0 - f.theta());
    }
    PulseTracker(const Nonlinearity& f, double band_lo, double band_hi)
        : alpha_(f.alpha()), lo_(band_lo), hi_(band_hi) {}

    /// Records one snapshot; returns false once the pulse is lost.
    bool observe(const Field& fld) {
        if (lost_) return false;
        const auto p = pulse_position(fld, alpha_);
        if (!p) {
            lost_ = true;
            lost_at_ = fld.t();
            return false;
        }
        samples_.push_back(*p);
        return true;
    }

    Hook hook(double interval) {
        return {interval, [this](const Field& fld) {
                    observe(fld);
                    return false;
                }};
    }

    PulseTrajectory trajectory() const {
        PulseTrajectory tr;
        tr.samples = samples_;
        tr.band_lo = lo_;
        tr.band_hi = hi_;
        tr.lost = lost_;
        tr.lost_at = lost_at_;
        std::size_t best_b = 0, best_len = 0;
        for (std::size_t i = 0; i < samples_.size();) {
            if (!in_band(samples_[i].umax)) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < samples_.size() && in_band(samples_[j].umax)) ++j;
            if (j - i > best_len) {
                best_len = j - i;
                best_b = i;
            }
            i = j;
        }
        tr.valid_begin = best_b;
        tr.valid_end = best_b + best_len;
        return tr;
    }

private:
    bool in_band(double v) const noexcept { return v > lo_ && v < hi_; }

    double alpha_, lo_, hi_;
    std::vector<PulseSample> samples_;
    bool lost_ = false;
    double lost_at_ = 0.0;
};

// ---------------------------------------------------------------- manifold

struct ManifoldProfile {
    double xi = 0.0;
    double b = 0.0;
    double lambda = 0.0;
    double B = 0.0;
    double V_xi = 0.0;   // V(xi)
    double Vp_xi = 0.0;  // V'(xi) = -sqrt(F(V(xi)))
    std::vector<double> x;
    std::vector<double> values;

    /// Phi(0) - b Phi_x(0) from the closed-form Phi(0) and Phi_x(0).
    double boundary_residual() const {
        const double phi0 = V_xi - B;
        const double phix0 = -Vp_xi + lambda * B;
        return phi0 - b * phix0;
    }
};

/// B(xi) = (V(xi) + b V'(xi)) / (1 + b lambda), with V'(xi) = -sqrt(F(V(xi)))
/// for xi >= 0. The numerator is rewritten as
/// (V^2 (1 - b^2 lambda^2) - b^2 (F(V) - lambda^2 V^2)) / (V + b sqrt(F(V)))
/// so the leading e^{-lambda xi} terms cancel exactly when b lambda = 1.
inline double manifold_B(const Nonlinearity& f, double V, double b) {
    if (b == 0.0) return V;
    const double lam = f.lambda();
    const double sq = std::sqrt(std::max(0.0, f.F(V)));
    const double bl = b * lam;
    const double num = V * V * (1.0 - bl) * (1.0 + bl) - b * b * f.F_minus_quadratic(V);
    return num / ((V + b * sq) * (1.0 + bl));
}

inline ManifoldProfile build_manifold_profile(const Nonlinearity& f, const SteadyProfile& V, double b, double xi,
                                              std::span<const double> grid) {
    require(V.kind() == ProfileKind::Ground, ErrorCode::InvalidArgument, "manifold profile needs the ground state");
    require(xi >= 0.0 && b >= 0.0, ErrorCode::InvalidArgument, "manifold profile needs xi >= 0 and b >= 0");
    ManifoldProfile p;
    p.xi = xi;
    p.b = b;
    p.lambda = f.lambda();
    p.V_xi = V.value(xi);
    p.Vp_xi = -std::sqrt(std::max(0.0, f.F(p.V_xi)));
    p.B = manifold_B(f, p.V_xi, b);
    p.x.assign(grid.begin(), grid.end());
    p.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        const double v = V.value(xi - x);
        const double phi = v - p.B * std::exp(-p.lambda * x);
        if (x > 0.0 && phi <= 0.0 && v > 1e-200) {
            fail(ErrorCode::NegativeProfile,
                 "Phi(x, xi) <= 0 at x = " + std::to_string(x) + " for xi = " + std::to_string(xi));
        }
        p.values[i] = x == 0.0 && b == 0.0 ? 0.0 : std::max(phi, 0.0);
    }
    return p;
}

/// R = Phi_xx + f(Phi) pointwise. With W = B e^{-lambda x} and V'' = -f(V)
/// this is W (f'(0) - int_0^1 f'(V - s W) ds), evaluated by Gauss-Legendre
/// so no difference of nearly equal terms is formed.
inline double manifold_remainder(const Nonlinearity& f, const SteadyProfile& V, const ManifoldProfile& p, double x) {
    const double v = V.value(p.xi - x);
    const double W = p.B * std::exp(-p.lambda * x);
    const double avg = num::gauss_legendre<10>([&](double s) { return f.fp(v - s * W); }, 0.0, 1.0);
    return W * (f.fp(0.0) - avg);
}

inline double manifold_remainder_sup(const Nonlinearity& f, const SteadyProfile& V, const ManifoldProfile& p) {
    double sup = 0.0;
    for (double x : p.x) sup = std::max(sup, std::abs(manifold_remainder(f, V, p, x)));
    return sup;
}

/// Phi(., xi) as an initial datum.
inline InitialDatum manifold_datum(const Nonlinearity& f, std::shared_ptr<const SteadyProfile> V, double b, double xi,
                                   double far_field_tol = 1e-12) {
    const double tail = std::log(V->tail().A / far_field_tol) / f.lambda();
    const double v = V->value(xi);
    const double B = manifold_B(f, v, b);
    const double lam = f.lambda();
    auto phi = [V, xi, B, lam, b](double x) {
        if (x == 0.0 && b == 0.0) return 0.0;
        return std::max(0.0, V->value(xi - x) - B * std::exp(-lam * x));
    };
    return InitialDatum(CustomDatum{"manifold", phi, xi + tail}, 1.0);
}

// ---------------------------------------------------------------- reduced law

struct ReducedODEResult {
    double rate = 0.0;      // 2 lambda, or 3 lambda on the c_hat branch
    double constant = 0.0;  // c(b), or c_hat
    double y0 = 0.0;
    bool c_hat_branch = false;
    std::vector<double> t;
    std::vector<double> y_numeric;
    std::vector<double> y_closed;

    /// y(t) = ln(rate c t + e^{rate y0}) / rate.
    double closed(double tt) const { return closed_form(rate, constant, y0, tt); }

    static double closed_form(double rate, double c, double y0, double tt) {
        // ln(r c t + e^{r y0}) = r y0 + log1p(r c t e^{-r y0})
        return y0 + std::log1p(rate * c * tt * std::exp(-rate * y0)) / rate;
    }
    double max_difference() const {
        double d = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) d = std::max(d, std::abs(y_numeric[i] - y_closed[i]));
        return d;
    }
    /// |y' - constant e^{-rate y}| of the closed form at t.
    double closed_residual(double tt) const {
        const double e = std::exp(-rate * y0);
        const double dy = constant * e / (1.0 + rate * constant * tt * e);
        return std::abs(dy - constant * std::exp(-rate * closed(tt)));
    }
};

inline bool is_critical_b(const Nonlinearity& f, double b) { return std::abs(b * f.lambda() - 1.0) <= 1e-12; }

/// Integrates the reduced law with adaptive Dormand-Prince and evaluates the
/// closed form at the same times: `samples` points geometric in 1 + t.
inline ReducedODEResult reduced_ode(const Nonlinearity& f, const DerivedConstants& dc, double b, double y0,
                                    double t_end, int samples = 200, double tol = 1e-13) {
    require(t_end > 0.0 && samples >= 2, ErrorCode::InvalidArgument, "reduced_ode needs t_end > 0 and samples >= 2");
    const double lam = f.lambda();
    if (b * lam > 1.0 && !is_critical_b(f, b)) {
        fail(ErrorCode::RegimeMismatch, "b lambda > 1: c(b) < 0 and the drift law does not apply");
    }
    ReducedODEResult r;
    r.y0 = y0;
    if (is_critical_b(f, b)) {
        r.c_hat_branch = true;
        r.rate = 3.0 * lam;
        r.constant = require_c_hat(dc);
    } else {
        r.rate = 2.0 * lam;
        r.constant = dc.c_of_b(b);
    }
    for (int j = 0; j < samples; ++j) r.t.push_back(std::expm1(std::log1p(t_end) * j / (samples - 1)));
    r.t.back() = t_end;

    using State = std::array<double, 1>;
    const double rate = r.rate, c = r.constant;
    auto rhs = [rate, c](const State& y, State& dy, double) { dy[0] = c * std::exp(-rate * y[0]); };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_dense_output(tol, tol, ode::runge_kutta_dopri5<State>());
    State y{y0};
    r.y_numeric.reserve(r.t.size());
    ode::integrate_times(stepper, rhs, y, r.t.begin(), r.t.end(), 1e-3,
                         [&](const State& s, double) { r.y_numeric.push_back(s[0]); });
    for (double tt : r.t) r.y_closed.push_back(r.closed(tt));
    return r;
}

// ---------------------------------------------------------------- log law

struct LogLawFit {
    double slope = 0.0;
    double intercept = 0.0;
    double t1 = 0.0, t2 = 0.0;
    double rms = 0.0;
    int points = 0;
    double predicted_slope = 0.0;
    double predicted_intercept = 0.0;
    double slope_rel_dev = 0.0;
    double intercept_residual = 0.0;  // intercept - predicted
};

struct FitOptions {
    double t_min = 0.0;  // restrict the valid window further from the left
    double t_max = std::numeric_limits<double>::infinity();
    double min_decades = 1.0;
};

/// Least squares xi = slope ln t + intercept over the valid window.
inline LogLawFit fit_log_law(const PulseTrajectory& traj, const Nonlinearity& f, const DerivedConstants& dc, double b,
                             const FitOptions& opt = {}) {
    const double lam = f.lambda();
    if (b * lam > 1.0 && !is_critical_b(f, b)) {
        fail(ErrorCode::RegimeMismatch, "b lambda > 1: no logarithmic drift law");
    }
    std::vector<double> X, Y;
    double t1 = 0.0, t2 = 0.0;
    for (const auto& s : traj.window()) {
        if (s.t <= 0.0 || s.t < opt.t_min || s.t > opt.t_max) continue;
        if (X.empty()) t1 = s.t;
        t2 = s.t;
        X.push_back(std::log(s.t));
        Y.push_back(s.xi);
    }
    if (X.size() < 3 || t2 < t1 * std::pow(10.0, opt.min_decades)) {
        fail(ErrorCode::WindowTooShort, "valid window [" + std::to_string(t1) + ", " + std::to_string(t2) +
                                            "] spans less than the required decades in t");
    }
    const auto fit = num::fit_line(X, Y);
    LogLawFit out;
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.t1 = t1;
    out.t2 = t2;
    out.points = static_cast<int>(X.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const double e = Y[i] - (fit.slope * X[i] + fit.intercept);
        ss += e * e;
    }
    out.rms = std::sqrt(ss / static_cast<double>(X.size()));
    if (is_critical_b(f, b)) {
        const double ch = require_c_hat(dc);
        out.predicted_slope = 1.0 / (3.0 * lam);
        out.predicted_intercept = std::log(3.0 * lam * ch) / (3.0 * lam);
    } else {
        out.predicted_slope = 1.0 / (2.0 * lam);
        out.predicted_intercept = std::log(2.0 * lam * dc.c_of_b(b)) / (2.0 * lam);
    }
    out.slope_rel_dev = (out.slope - out.predicted_slope) / out.predicted_slope;
    out.intercept_residual = out.intercept - out.predicted_intercept;
    return out;
}

// ---------------------------------------------------------------- regimes

struct ShiftRegimeReport {
    RegimeLabel label = RegimeLabel::InfiniteShift;
    double b = 0.0;
    std::vector<double> ground_z;
    std::optional<double> terminal_xi;
    std::optional<double> nearest_z;
    std::optional<double> distance;      // |terminal xi - nearest z|
    std::optional<double> rel_distance;  // distance / nearest z
    std::optional<bool> xi_increasing;   // net growth with no drop beyond tol
    std::optional<bool> xi_settling;     // late forward differences below early ones
    std::string note;
};

/// Forward differences of xi: max over the last quarter of the window below
/// the max over the first quarter.
inline std::optional<bool> xi_settles(const PulseTrajectory& traj) {
    const auto w = traj.window();
    if (w.size() < 8) return std::nullopt;
    const std::size_t q = w.size() / 4;
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < q; ++i) first = std::max(first, std::abs(w[i + 1].xi - w[i].xi));
    for (std::size_t i = w.size() - 1 - q; i + 1 < w.size(); ++i) last = std::max(last, std::abs(w[i + 1].xi - w[i].xi));
    return last < first;
}

inline ShiftRegimeReport shift_regime_report(const Nonlinearity& f, double b, const PulseTrajectory& traj,
                                             const ShiftSets& shifts, double tol) {
    ShiftRegimeReport rep;
    const auto reg = regime_partition(f, b);
    rep.label = reg.label;
    rep.b = b;
    for (const auto& g : shifts.ground) rep.ground_z.push_back(g.z);
    const auto w = traj.window();
    if (!w.empty()) {
        rep.terminal_xi = w.back().xi;
        bool mono = true;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i].xi < w[i - 1].xi - tol) mono = false;
        rep.xi_increasing = mono && w.back().xi > w.front().xi;
        rep.xi_settling = xi_settles(traj);
    }
    if (rep.terminal_xi && !rep.ground_z.empty()) {
        double best = rep.ground_z.front();
        for (double z : rep.ground_z)
            if (std::abs(z - *rep.terminal_xi) < std::abs(best - *rep.terminal_xi)) best = z;
        rep.nearest_z = best;
        rep.distance = std::abs(*rep.terminal_xi - best);
        rep.rel_distance = *rep.distance / best;
    }
    switch (rep.label) {
        case RegimeLabel::FiniteShift: rep.note = "xi should approach a point of Z_ground(b)"; break;
        case RegimeLabel::InfiniteShift: rep.note = "Z_ground(b) is empty: xi should grow without bound"; break;
        case RegimeLabel::Mixed: rep.note = "both behaviours are possible; which occurs depends on phi"; break;
    }
    return rep;
}

// ---------------------------------------------------------------- experiment

struct TransitionRun {
    ThresholdResult threshold;
    double sigma = 0.0;  // midpoint of the final bracket
    Outcome outcome;
    PulseTrajectory trajectory;
    std::vector<LogRow> log;
};

/// Bisects sigma, then reruns the midpoint of the final bracket with pulse
/// tracking every `track_every` time units.
inline TransitionRun transition_experiment(const InitialDatum& phi, double b, const SolverConfig& cfg,
                                           const Nonlinearity& f, const BisectOptions& bopt, double track_every = 0.5,
                                           double log_every = 0.0) {
    TransitionRun tr;
    tr.threshold = bisect_sigma(phi, b, cfg, f, bopt);
    tr.sigma = tr.threshold.midpoint();
    PulseTracker tracker(f);
    const Classifier cls(f);
    ClassifyOptions co = bopt.classify;
    co.max_t = co.max_t > 0.0 ? co.max_t : cfg.horizon(f);
    co.extra_hooks.push_back(tracker.hook(track_every));
    std::vector<LogRow> rows;
    if (log_every > 0.0) {
        co.extra_hooks.push_back({log_every, [&](const Field& F) {
                                      const std::size_t am = F.argmax();
                                      rows.push_back({F.t(), F.u[am], F.x(am), energy(F, f), sign_changes_ux(F),
                                                      F.length()});
                                      return false;
                                  }});
    }
    tr.outcome = classify_run(make_field(phi.with_sigma(tr.sigma), b, cfg, f), cfg, f, cls, co);
    tr.trajectory = tracker.trajectory();
    tr.log = std::move(rows);
    return tr;
}

}  // namespace rdrobin
