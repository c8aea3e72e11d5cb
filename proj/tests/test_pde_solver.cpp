#include "rdrobin/pde_solver.hpp"
#include "rdrobin/steady_states.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <memory>

using namespace rdrobin;

namespace {

const Nonlinearity& cubic() {
    static const Nonlinearity f = Nonlinearity::cubic(0.25);
    return f;
}

std::shared_ptr<const SteadyProfile> ground() {
    static const auto V = std::make_shared<const SteadyProfile>(build_ground_state(cubic(), 40.0, 8000));
    return V;
}

double ground_shift_z(double b) {
    const auto v = build_active_state(cubic(), 40.0, 2000);
    return find_shift_sets(cubic(), *ground(), v, b).ground.at(0).z;
}

SolverConfig config(double dx, double dt) {
    SolverConfig c;
    c.dx = dx;
    c.dt = dt;
    return c;
}

double sup_diff(const Field& a, const Field& b) {
    double d = 0.0;
    for (std::size_t i = 0; i <= std::min(a.n(), b.n()); ++i) d = std::max(d, std::abs(a.u[i] - b.u[i]));
    return d;
}

// Largest increase of the energy between consecutive hook times.
double energy_violation(const InitialDatum& d, double b, const SolverConfig& cfg, double t_end) {
    double prev = std::numeric_limits<double>::infinity(), worst = 0.0;
    RunOptions o;
    o.t_end = t_end;
    o.hooks.push_back({cfg.dt, [&](const Field& F) {
                           const double e = energy(F, cubic());
                           worst = std::max(worst, e - prev);
                           prev = e;
                           return false;
                       }});
    run(make_field(d, b, cfg, cubic()), cfg, cubic(), o);
    return worst;
}

}  // namespace

TEST(Step, ZeroStaysZero) {
    const auto cfg = config(0.02, 0.01);
    for (double b : {0.0, 1.0}) {
        auto fld = make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.0), b, cfg, cubic());
        Stepper s(cubic(), cfg, 0.0);
        for (int k = 0; k < 200; ++k) s.step(fld);
        for (double v : fld.u) ASSERT_EQ(v, 0.0);
        EXPECT_DOUBLE_EQ(fld.t(), 2.0);
    }
}

TEST(Step, GroundShiftIsStationary) {
    const double z = ground_shift_z(3.0);
    const InitialDatum d(GroundShiftDatum{ground(), z});
    double drift[2];
    double h2[2];
    for (int r = 0; r < 2; ++r) {
        const auto cfg = config(0.04 / (1 << r), 0.02 / (1 << r));
        const auto u0 = make_field(d, 3.0, cfg, cubic());
        RunOptions o;
        o.t_end = 10.0;
        drift[r] = sup_diff(run(u0, cfg, cubic(), o).final, u0);
        h2[r] = cfg.dx * cfg.dx + cfg.dt * cfg.dt;
    }
    // C from the coarse run; the fine run must respect the same C.
    const double C = drift[0] / (h2[0] * 10.0);
    EXPECT_LE(drift[1], 1.2 * C * h2[1] * 10.0);
    EXPECT_LT(drift[1], 1e-3);
}

TEST(Step, SmallDataDecayMonotonically) {
    const auto cfg = config(0.02, 0.01);
    auto fld = make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.2), 1.0, cfg, cubic());
    Stepper s(cubic(), cfg, fld.max());
    double prev = fld.max();
    for (int k = 0; k < 500; ++k) {
        s.step(fld);
        const double m = fld.max();
        ASSERT_LT(m, prev) << "step " << k;
        prev = m;
    }
}

TEST(Step, StiffLargeDataStaysBounded) {
    const auto cfg = config(0.02, 0.01);
    for (double sigma : {16.0, 1024.0}) {
        auto fld = make_field(InitialDatum::bump(BumpShape::Triangle, 1.0, sigma), 0.0, cfg, cubic());
        Stepper s(cubic(), cfg, fld.max());
        for (int k = 0; k < 100; ++k) s.step(fld);
        EXPECT_LT(fld.max(), 1.0);
        EXPECT_GT(s.substeps(), 0);
    }
}

TEST(Run, EmptyHooksReturnFinalField) {
    const auto cfg = config(0.02, 0.01);
    RunOptions o;
    o.t_end = 1.0;
    const auto rec = run(make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.5), 0.0, cfg, cubic()), cfg,
                         cubic(), o);
    EXPECT_DOUBLE_EQ(rec.final.t(), 1.0);
    EXPECT_TRUE(rec.log.empty());
    EXPECT_FALSE(rec.stopped_by_hook);
}

TEST(Run, SnapshotCount) {
    const auto cfg = config(0.02, 0.01);
    std::vector<double> times;
    RunOptions o;
    o.t_end = 10.0;
    o.hooks.push_back({1.0, [&](const Field& F) {
                           times.push_back(F.t());
                           return false;
                       }});
    run(make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.5), 0.0, cfg, cubic()), cfg, cubic(), o);
    ASSERT_EQ(times.size(), 11u);
    for (int j = 0; j <= 10; ++j) EXPECT_DOUBLE_EQ(times[j], j);
}

TEST(Run, HookIntervalMustBeMultipleOfDt) {
    const auto cfg = config(0.02, 0.01);
    RunOptions o;
    o.hooks.push_back({0.015, [](const Field&) { return false; }});
    EXPECT_THROW(run(make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.5), 0.0, cfg, cubic()), cfg, cubic(), o),
                 Error);
}

TEST(Run, GrowthIsAppendOnly) {
    auto fld = make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.5), 0.0, config(0.02, 0.01), cubic());
    const auto before = fld.u;
    grow_domain(fld);
    ASSERT_EQ(fld.n(), 2 * (before.size() - 1));
    for (std::size_t i = 0; i < before.size(); ++i) ASSERT_EQ(std::memcmp(&fld.u[i], &before[i], sizeof(double)), 0);
    for (std::size_t i = before.size(); i <= fld.n(); ++i) ASSERT_EQ(fld.u[i], 0.0);

    // A spreading run outgrows a short initial domain and keeps the far field at zero.
    auto cfg = config(0.05, 0.05);
    cfg.growth_margin = 5.0;
    RunOptions o;
    o.t_end = 40.0;
    const auto rec = run(make_field(InitialDatum::bump(BumpShape::Plateau, 20.0, 1.0), 1.0, cfg, cubic()), cfg,
                         cubic(), o);
    EXPECT_GT(rec.growth_events, 0);
    const auto& F = rec.final;
    EXPECT_LE(F.u[F.n() - static_cast<std::size_t>(std::ceil(5.0 / cfg.dx))], cfg.far_field_tol);
}

TEST(Energy, ZeroFieldHasZeroEnergy) {
    for (double b : {0.0, 2.0}) {
        auto fld = make_field(InitialDatum::bump(BumpShape::Smooth, 2.0, 0.0), b, config(0.02, 0.01), cubic());
        EXPECT_EQ(energy(fld, cubic()), 0.0);
    }
}

TEST(Energy, NonincreasingWithShrinkingTolerance) {
    struct Case {
        InitialDatum d;
        double b;
    };
    const std::vector<Case> cases = {
        {InitialDatum::bump(BumpShape::Smooth, 4.0, 0.5), 0.0},
        {InitialDatum::bump(BumpShape::Triangle, 4.0, 3.0), 0.0},
        {InitialDatum::bump(BumpShape::TwoBump, 8.0, 0.8), 1.0},
        {InitialDatum::bump(BumpShape::Plateau, 10.0, 1.0), 4.0},
    };
    // tol(dx, dt) = C (dx^2 + dt^2), C fixed in advance.
    const double C = 1.0;
    for (const auto& c : cases) {
        const auto cfg1 = config(0.04, 0.02);
        const auto cfg2 = config(0.02, 0.01);
        const double v1 = energy_violation(c.d, c.b, cfg1, 20.0);
        const double v2 = energy_violation(c.d, c.b, cfg2, 20.0);
        EXPECT_LE(v1, C * (0.04 * 0.04 + 0.02 * 0.02)) << c.d.name();
        EXPECT_LE(v2, C * (0.02 * 0.02 + 0.01 * 0.01)) << c.d.name();
    }
}

TEST(Energy, GroundShiftEnergyResolutionIndependent) {
    const double z = ground_shift_z(3.0);
    const InitialDatum d(GroundShiftDatum{ground(), z});
    const auto a = make_field(d, 3.0, config(0.004, 0.01), cubic());
    const auto b = make_field(d, 3.0, config(0.002, 0.01), cubic());
    EXPECT_NEAR(energy(a, cubic()), energy(b, cubic()), 1e-6);
}

TEST(SignChanges, ShapesAtRest) {
    const auto cfg = config(0.02, 0.01);
    EXPECT_EQ(sign_changes_ux(make_field(InitialDatum::bump(BumpShape::Smooth, 4.0, 0.5), 0.0, cfg, cubic())), 1);
    EXPECT_EQ(sign_changes_ux(make_field(InitialDatum::bump(BumpShape::TwoBump, 8.0, 0.5), 0.0, cfg, cubic())), 3);
    const InitialDatum decreasing(CustomDatum{"exp", [](double x) { return std::exp(-x); }, 30.0});
    EXPECT_EQ(sign_changes_ux(make_field(decreasing, 1.0, cfg, cubic())), 0);
}

TEST(SignChanges, NonincreasingAlongRun) {
    const auto cfg = config(0.02, 0.01);
    int prev = 1 << 20, first = -1;
    RunOptions o;
    o.t_end = 60.0;
    o.hooks.push_back({cfg.dt, [&](const Field& F) {
                           if (F.steps < 10) return false;
                           const int z = sign_changes_ux(F);
                           if (first < 0) first = z;
                           EXPECT_LE(z, prev) << "t=" << F.t();
                           prev = z;
                           return false;
                       }});
    run(make_field(InitialDatum::bump(BumpShape::TwoBump, 8.0, 0.6), 0.0, cfg, cubic()), cfg, cubic(), o);
    EXPECT_EQ(first, 3);
    EXPECT_EQ(prev, 1);
}

TEST(Decay, GaussianEnvelope) {
    const auto cfg = config(0.02, 0.01);
    const auto d = InitialDatum::bump(BumpShape::Triangle, 1.0, 0.2);
    const auto f0 = make_field(d, 0.0, cfg, cubic());
    EXPECT_TRUE(decay_check(f0, 1.0).bounded);
    // vanishing run: envelope holds at every sampled time
    RunOptions o;
    o.t_end = 8.0;
    int checked = 0;
    o.hooks.push_back({0.5, [&](const Field& F) {
                           if (F.t() == 0.0) return false;
                           const auto r = decay_check(F, 1.0);
                           EXPECT_TRUE(r.bounded) << "t=" << F.t() << " slope=" << r.slope;
                           if (r.applicable && r.points > 0) ++checked;
                           return false;
                       }});
    run(f0, cfg, cubic(), o);
    EXPECT_GT(checked, 10);
}

TEST(Decay, SmallTimeLargeMargin) {
    const auto cfg = config(0.02, 0.01);
    RunOptions o;
    o.t_end = 0.5;
    const auto rec = run(make_field(InitialDatum::bump(BumpShape::Triangle, 1.0, 0.5), 0.0, cfg, cubic()), cfg,
                         cubic(), o);
    const auto r = decay_check(rec.final, 1.0);
    EXPECT_TRUE(r.bounded);
    EXPECT_GT(r.margin, 0.5);
}

TEST(Comparison, SupBoundedByInitialOrOne) {
    const auto cfg = config(0.02, 0.01);
    for (double sigma : {0.5, 2.0, 8.0})
        for (double b : {0.0, 1.0, 4.0}) {
            const auto d = InitialDatum::bump(BumpShape::Triangle, 4.0, sigma);
            const double bound = std::max(1.0, sigma) + 1e-8;
            RunOptions o;
            o.t_end = 30.0;
            o.hooks.push_back({0.1, [&](const Field& F) {
                                   EXPECT_LE(F.max(), bound);
                                   return false;
                               }});
            run(make_field(d, b, cfg, cubic()), cfg, cubic(), o);
        }
}

TEST(Robin, BoundaryResidualSecondOrder) {
    double res[2];
    for (int r = 0; r < 2; ++r) {
        const auto cfg = config(0.04 / (1 << r), 0.02 / (1 << r));
        double worst = 0.0;
        RunOptions o;
        o.t_end = 5.0;
        o.hooks.push_back({0.5, [&](const Field& F) {
                               if (F.t() > 0.0) worst = std::max(worst, robin_residual(F));
                               return false;
                           }});
        run(make_field(InitialDatum::bump(BumpShape::Smooth, 4.0, 0.8), 1.0, cfg, cubic()), cfg, cubic(), o);
        res[r] = worst;
    }
    EXPECT_GT(res[0] / res[1], 3.5);
    EXPECT_LT(res[1], 1e-4);
}

TEST(Accuracy, RichardsonTripletSecondOrder) {
    // u_h - u_{h/2} over u_{h/2} - u_{h/4} at common nodes, t = 2, b = 1.
    std::vector<Field> out;
    for (int r = 0; r < 3; ++r) {
        const auto cfg = config(0.08 / (1 << r), 0.04 / (1 << r));
        RunOptions o;
        o.t_end = 2.0;
        out.push_back(run(make_field(InitialDatum::bump(BumpShape::Smooth, 4.0, 0.8), 1.0, cfg, cubic()), cfg,
                          cubic(), o)
                          .final);
    }
    double d01 = 0.0, d12 = 0.0;
    for (std::size_t i = 0; i <= out[0].n(); ++i) {
        d01 = std::max(d01, std::abs(out[0].u[i] - out[1].u[2 * i]));
        d12 = std::max(d12, std::abs(out[1].u[2 * i] - out[2].u[4 * i]));
    }
    EXPECT_NEAR(d01 / d12, 4.0, 0.5);
}

TEST(Accuracy, GroundShiftErrorSecondOrder) {
    const double z = ground_shift_z(3.0);
    const InitialDatum d(GroundShiftDatum{ground(), z});
    double err[3];
    for (int r = 0; r < 3; ++r) {
        const auto cfg = config(0.08 / (1 << r), 0.04 / (1 << r));
        const auto u0 = make_field(d, 3.0, cfg, cubic());
        RunOptions o;
        o.t_end = 5.0;
        err[r] = sup_diff(run(u0, cfg, cubic(), o).final, u0);
    }
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.6);
    EXPECT_NEAR(err[1] / err[2], 4.0, 0.6);
}

TEST(Datum, ShapesAndSupport) {
    const auto tri = InitialDatum::bump(BumpShape::Triangle, 2.0, 3.0);
    EXPECT_DOUBLE_EQ(tri(1.0), 3.0);
    EXPECT_DOUBLE_EQ(tri(0.5), 1.5);
    EXPECT_EQ(tri(2.5), 0.0);
    const auto sm = InitialDatum::bump(BumpShape::Smooth, 2.0);
    EXPECT_DOUBLE_EQ(sm(1.0), 1.0);
    EXPECT_EQ(sm(0.0), 0.0);
    const auto pl = InitialDatum::bump(BumpShape::Plateau, 10.0);
    EXPECT_DOUBLE_EQ(pl(5.0), 1.0);
    EXPECT_EQ(pl(10.0), 0.0);
    EXPECT_EQ(tri.with_sigma(1.0)(1.0), 1.0);
    EXPECT_THROW(InitialDatum::bump(BumpShape::Smooth, 0.0), Error);

    const InitialDatum cap(CappedGround{ground(), 10.0, 2.0});
    EXPECT_DOUBLE_EQ(cap(10.0), cubic().theta());
    EXPECT_EQ(cap(22.0), 0.0);
    EXPECT_EQ(cap.support(), 22.0);

    const auto off = make_bump_offset(cubic(), cubic().theta() + 0.01, 3.0, 1.0);
    const auto& bo = std::get<BumpOffset>(off.family());
    EXPECT_GT(bo.x_prime, 0.0);
    EXPECT_LT(bo.x_prime, bo.L_m);
    EXPECT_EQ(off(bo.start()), 0.0);
    EXPECT_GT(off(bo.start() + 0.5), 0.0);
}
