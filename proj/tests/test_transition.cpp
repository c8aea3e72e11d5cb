#include "rdrobin/transition.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <memory>

using namespace rdrobin;

namespace {

const Nonlinearity& cubic() {
    static const Nonlinearity f = Nonlinearity::cubic(0.25);
    return f;
}

const DerivedConstants& constants() {
    static const DerivedConstants dc = compute_constants(cubic());
    return dc;
}

std::shared_ptr<const SteadyProfile> ground() {
    static const auto V = std::make_shared<const SteadyProfile>(build_ground_state(cubic(), 40.0, 8000));
    return V;
}

const ShiftSets& shifts(double b) {
    static const auto vstar = build_active_state(cubic(), 40.0, 2000);
    static std::map<double, ShiftSets> cache;
    auto it = cache.find(b);
    if (it == cache.end()) it = cache.emplace(b, find_shift_sets(cubic(), *ground(), vstar, b)).first;
    return it->second;
}

// F(s) for the cubic with alpha = 1/4, in long double.
long double F_exact(long double s) { return s * s / 4 - 5.0L * s * s * s / 6 + s * s * s * s / 2; }

PulseTrajectory synthetic(const std::vector<double>& t, const std::function<double(double)>& xi) {
    PulseTrajectory tr;
    for (double tt : t) tr.samples.push_back({tt, xi(tt), 0.5});
    tr.band_lo = 0.3;
    tr.band_hi = 0.7;
    tr.valid_begin = 0;
    tr.valid_end = tr.samples.size();
    return tr;
}

std::vector<double> geometric(double t1, double t2, int n) {
    std::vector<double> t;
    for (int j = 0; j < n; ++j) t.push_back(t1 * std::pow(t2 / t1, double(j) / (n - 1)));
    return t;
}

template <class Fn>
void expect_error(ErrorCode code, Fn&& fn) {
    try {
        fn();
        ADD_FAILURE() << "no error thrown";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code) << e.what();
    }
}

}  // namespace

TEST(Pulse, LocatesManifoldPeak) {
    SolverConfig cfg;
    for (double xi : {3.0, 10.0}) {
        const auto d = manifold_datum(cubic(), ground(), 0.0, xi);
        const auto fld = make_field(d, 0.0, cfg, cubic());
        const auto p = pulse_position(fld, cubic().alpha());
        ASSERT_TRUE(p.has_value());
        // dense sampling of the datum itself
        double best = 0.0, arg = 0.0;
        for (double x = xi - 1.0; x <= xi + 1.0; x += 1e-5)
            if (d(x) > best) best = d(x), arg = x;
        EXPECT_NEAR(p->xi, arg, 1e-3);
        EXPECT_NEAR(p->umax, best, 1e-6);
    }
}

TEST(Pulse, GroundShiftIsStationary) {
    const double b = 3.0;
    const double z = shifts(b).ground.at(0).z;
    const InitialDatum d(GroundShiftDatum{ground(), z});
    PulseTracker tr(cubic());
    RunOptions ro;
    ro.t_end = 20.0;
    ro.hooks.push_back(tr.hook(1.0));
    (void)run(make_field(d, b, SolverConfig{}, cubic()), SolverConfig{}, cubic(), ro);
    const auto traj = tr.trajectory();
    EXPECT_FALSE(traj.lost);
    ASSERT_EQ(traj.window().size(), traj.samples.size());
    for (const auto& s : traj.samples) EXPECT_NEAR(s.xi, z, 0.02);
}

TEST(Pulse, LostBelowAlpha) {
    const auto fld = make_field(InitialDatum::bump(BumpShape::Smooth, 4.0, 0.2), 0.0, SolverConfig{}, cubic());
    EXPECT_FALSE(pulse_position(fld, cubic().alpha()).has_value());
    PulseTracker tr(cubic());
    EXPECT_FALSE(tr.observe(fld));
    EXPECT_TRUE(tr.trajectory().lost);
    EXPECT_FALSE(tr.trajectory().has_window());
}

TEST(Pulse, WindowIsLongestInBandRun) {
    PulseTracker tr(cubic(), 0.3, 0.5);
    Field fld;
    fld.dx = 0.1;
    fld.dt = 0.1;
    const double heights[] = {0.6, 0.4, 0.4, 0.6, 0.4, 0.4, 0.4, 0.2};
    for (double h : heights) {
        fld.u = {0.0, h, 0.0, 0.0};
        ++fld.steps;
        tr.observe(fld);
    }
    const auto traj = tr.trajectory();
    EXPECT_EQ(traj.valid_begin, 4u);
    EXPECT_EQ(traj.valid_end, 7u);
    // the last height is below alpha
    EXPECT_TRUE(traj.lost);
}

TEST(Manifold, DirichletAmplitudeIsV) {
    for (double v : {0.3, 1e-3, 1e-9}) EXPECT_EQ(manifold_B(cubic(), v, 0.0), v);
    const auto p = build_manifold_profile(cubic(), *ground(), 0.0, 5.0, std::vector<double>{0.0, 1.0, 5.0});
    EXPECT_EQ(p.values[0], 0.0);
}

TEST(Manifold, CriticalAmplitudeFreeOfCancellation) {
    // At b lambda = 1 the numerator V + b V' is O(V^2).
    const double b = 2.0;
    for (long double v : {1e-2L, 1e-4L, 1e-6L}) {
        const long double naive = (v - b * std::sqrt(F_exact(v))) / (1 + b * 0.5L);
        const double got = manifold_B(cubic(), static_cast<double>(v), b);
        EXPECT_NEAR(got, static_cast<double>(naive), 1e-9 * std::abs(static_cast<double>(naive)))
            << static_cast<double>(v);
        EXPECT_GT(got, 0.0);
    }
}

TEST(Manifold, BoundaryConditionHolds) {
    const auto& V = *ground();
    for (double b : {0.0, 0.5, 2.0, 3.0}) {
        for (double xi : {0.0, 2.0, 8.0, 16.0}) {
            const auto p = build_manifold_profile(cubic(), V, b, xi, std::vector<double>{0.0, 1.0});
            EXPECT_LE(std::abs(p.boundary_residual()), 1e-10) << b << ' ' << xi;
            // finite-difference route on the unclipped profile
            const double h = 1e-4;
            auto phi = [&](double x) { return V.value(xi - x) - p.B * std::exp(-p.lambda * x); };
            const double fd = (phi(h) - phi(-h)) / (2 * h);
            EXPECT_NEAR(phi(0.0) - b * fd, 0.0, 1e-7) << b << ' ' << xi;
        }
    }
}

TEST(Manifold, PositiveAwayFromBoundary) {
    std::vector<double> grid;
    for (int i = 0; i <= 2000; ++i) grid.push_back(0.02 * i);
    for (double b : {0.0, 1.0, 2.0, 4.0})
        for (double xi : {0.0, 1.0, 6.0, 12.0}) {
            const auto p = build_manifold_profile(cubic(), *ground(), b, xi, grid);
            for (std::size_t i = 1; i < grid.size(); ++i)
                if (ground()->value(xi - grid[i]) > 1e-200) ASSERT_GT(p.values[i], 0.0) << b << ' ' << xi;
        }
    expect_error(ErrorCode::InvalidArgument,
                 [&] { (void)build_manifold_profile(cubic(), *ground(), 0.0, -1.0, grid); });
}

TEST(Manifold, RemainderMatchesResidualOfEquation) {
    // R = Phi'' + f(Phi), since V'' = -f(V) and W'' = lambda^2 W.
    const auto& V = *ground();
    const double h = V.spacing();
    for (double b : {0.0, 1.0}) {
        const double xi = 4.0;
        const auto p = build_manifold_profile(cubic(), V, b, xi, std::vector<double>{0.0});
        auto phi = [&](double x) { return V.value(xi - x) - p.B * std::exp(-p.lambda * x); };
        for (int k : {100, 400, 800, 1200, 2000}) {
            const double x = k * h;
            const double d2 = (phi(x + h) - 2 * phi(x) + phi(x - h)) / (h * h);
            const double fd = d2 + cubic().f(phi(x));
            EXPECT_NEAR(manifold_remainder(cubic(), V, p, x), fd, 2e-4) << b << ' ' << x;
        }
    }
}

TEST(Manifold, RemainderDecayRate) {
    // e^{-2 lambda xi} generically, e^{-3 lambda xi} when b lambda = 1
    std::vector<double> grid;
    for (int i = 0; i <= 6000; ++i) grid.push_back(0.01 * i);
    const auto& V = *ground();
    const double lam = cubic().lambda();
    for (const auto& [b, rate] : {std::pair{0.0, 2.0 * lam}, std::pair{2.0, 3.0 * lam}}) {
        std::vector<double> X, Y;
        for (double xi = 8.0 / lam; xi <= 12.0 / lam + 1e-9; xi += 1.0) {
            X.push_back(xi);
            Y.push_back(std::log(manifold_remainder_sup(cubic(), V, build_manifold_profile(cubic(), V, b, xi, grid))));
        }
        const auto fit = num::fit_line(X, Y);
        EXPECT_NEAR(-fit.slope, rate, 0.02 * rate) << b;
    }
}

TEST(ReducedODE, NumericMatchesClosedForm) {
    for (double b : {0.0, 0.5, 1.0, 2.0}) {
        for (double y0 : {0.0, 3.0}) {
            const auto r = reduced_ode(cubic(), constants(), b, y0, 1e6);
            EXPECT_EQ(r.c_hat_branch, b == 2.0);
            EXPECT_LE(r.max_difference(), 1e-8) << b << ' ' << y0;
            EXPECT_EQ(r.t.front(), 0.0);
            EXPECT_EQ(r.t.back(), 1e6);
            for (double t : {0.0, 1.0, 1e3, 1e6}) {
                EXPECT_LE(r.closed_residual(t), 1e-12 * r.constant * std::exp(-r.rate * r.closed(t)) + 1e-300);
                const long double direct =
                    std::log((long double)r.rate * r.constant * t + std::exp((long double)r.rate * y0)) / r.rate;
                EXPECT_NEAR(r.closed(t), static_cast<double>(direct), 1e-12 * (1.0 + std::abs(r.closed(t))));
            }
        }
    }
}

TEST(ReducedODE, RejectsSupercriticalB) {
    expect_error(ErrorCode::RegimeMismatch, [] { (void)reduced_ode(cubic(), constants(), 3.0, 0.0, 10.0); });
    expect_error(ErrorCode::InvalidArgument, [] { (void)reduced_ode(cubic(), constants(), 0.0, 0.0, 0.0); });
}

TEST(ReducedODE, CriticalBranchNeedsSecondDerivative) {
    const auto f = test_support::mixed_nonlinearity();
    const auto dc = compute_constants(f);
    const double b = 1.0 / f.lambda();
    expect_error(ErrorCode::DerivativeUnavailable, [&] { (void)reduced_ode(f, dc, b, 0.0, 10.0); });
    EXPECT_NO_THROW((void)reduced_ode(f, dc, 0.5 * b, 0.0, 10.0));
}

TEST(LogLaw, RecoversSyntheticClosedForm) {
    // y0 far below zero makes the closed form exactly logarithmic in t.
    for (double b : {0.0, 1.0, 2.0}) {
        const bool crit = b == 2.0;
        const double rate = (crit ? 3.0 : 2.0) * cubic().lambda();
        const double c = crit ? *constants().c_hat : constants().c_of_b(b);
        const auto traj =
            synthetic(geometric(1.0, 1e3, 200), [&](double t) { return ReducedODEResult::closed_form(rate, c, -50.0, t); });
        const auto fit = fit_log_law(traj, cubic(), constants(), b);
        EXPECT_NEAR(fit.slope_rel_dev, 0.0, 1e-10) << b;
        EXPECT_NEAR(fit.intercept_residual, 0.0, 1e-9) << b;
        EXPECT_NEAR(fit.predicted_slope, 1.0 / rate, 1e-15);
        EXPECT_LE(fit.rms, 1e-10);
        EXPECT_EQ(fit.points, 200);
        EXPECT_EQ(fit.t1, 1.0);
    }
}

TEST(LogLaw, WindowLimits) {
    const auto traj = synthetic(geometric(10.0, 50.0, 50), [](double t) { return std::log(t); });
    expect_error(ErrorCode::WindowTooShort, [&] { (void)fit_log_law(traj, cubic(), constants(), 0.0); });
    FitOptions o;
    o.min_decades = 0.5;
    EXPECT_NO_THROW((void)fit_log_law(traj, cubic(), constants(), 0.0, o));
    o.t_min = 30.0;
    expect_error(ErrorCode::WindowTooShort, [&] { (void)fit_log_law(traj, cubic(), constants(), 0.0, o); });
    const auto wide = synthetic(geometric(1.0, 1e3, 50), [](double t) { return std::log(t); });
    expect_error(ErrorCode::RegimeMismatch, [&] { (void)fit_log_law(wide, cubic(), constants(), 3.0); });
}

TEST(Regime, SettlingDetector) {
    std::vector<double> lin;
    for (int j = 0; j < 40; ++j) lin.push_back(1.0 + j);
    EXPECT_EQ(xi_settles(synthetic(lin, [](double t) { return std::log(t); })), true);
    EXPECT_EQ(xi_settles(synthetic(lin, [](double t) { return 0.1 * t * t; })), false);
    EXPECT_FALSE(xi_settles(synthetic({1, 2, 3}, [](double t) { return t; })).has_value());
}

TEST(Regime, ReportAgainstShiftSets) {
    const auto& s3 = shifts(3.0);
    ASSERT_FALSE(s3.ground.empty());
    const double z = s3.ground.front().z;
    std::vector<double> t;
    for (int j = 1; j <= 40; ++j) t.push_back(j);
    const auto settle = synthetic(t, [&](double tt) { return z - std::exp(-0.2 * tt); });
    const auto rep = shift_regime_report(cubic(), 3.0, settle, s3, 1e-9);
    EXPECT_EQ(rep.label, RegimeLabel::FiniteShift);
    ASSERT_TRUE(rep.nearest_z.has_value());
    EXPECT_EQ(*rep.nearest_z, z);
    EXPECT_LT(*rep.distance, 1e-3);
    EXPECT_EQ(rep.xi_increasing, true);
    EXPECT_EQ(rep.xi_settling, true);

    const auto grow = synthetic(geometric(1.0, 1e3, 40), [](double tt) { return std::log(tt); });
    const auto rep0 = shift_regime_report(cubic(), 0.0, grow, shifts(0.0), 1e-9);
    EXPECT_EQ(rep0.label, RegimeLabel::InfiniteShift);
    EXPECT_TRUE(rep0.ground_z.empty());
    EXPECT_FALSE(rep0.nearest_z.has_value());
    EXPECT_EQ(rep0.xi_increasing, true);
}
