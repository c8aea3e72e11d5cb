#include "rdrobin/steady_states.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <sstream>
#include <cmath>

using namespace rdrobin;

namespace {

const Nonlinearity& cubic() {
    static const Nonlinearity f = Nonlinearity::cubic(0.25);
    return f;
}

double max_residual(const SteadyProfile& p, const Nonlinearity& f, double lo, double hi) {
    const auto& v = p.values();
    const double h = p.spacing();
    const auto g = p.grid();
    double worst = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (g[i] <= lo || g[i] >= hi) continue;
        worst = std::max(worst, std::abs((v[i + 1] - 2 * v[i] + v[i - 1]) / (h * h) + f.f(v[i])));
    }
    return worst;
}

}  // namespace

TEST(GroundState, PeakEvenAndMonotone) {
    const auto V = build_ground_state(cubic(), 40.0, 2000);
    EXPECT_EQ(V.value(0.0), cubic().theta());
    const auto& v = V.values();
    const std::size_t n = v.size() / 2;
    for (std::size_t k = 0; k <= n; ++k) EXPECT_EQ(v[n + k], v[n - k]);
    for (std::size_t k = n; k + 1 < v.size(); ++k) EXPECT_LT(v[k + 1], v[k]);
}

TEST(GroundState, ResidualSecondOrderAndFast) {
    const double lam = cubic().lambda();
    const auto t0 = std::chrono::steady_clock::now();
    const auto fine = build_ground_state(cubic(), 20.0 / lam, 4000);  // dx = 0.005/lambda
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto coarse = build_ground_state(cubic(), 20.0 / lam, 2000);
    const double r_fine = max_residual(fine, cubic(), -1e9, 1e9);
    const double r_coarse = max_residual(coarse, cubic(), -1e9, 1e9);
    EXPECT_LE(r_fine, 1e-6);
    EXPECT_NEAR(r_coarse / r_fine, 4.0, 0.4);
    EXPECT_LT(secs, 1.0);
}

TEST(GroundState, FirstIntegral) {
    const auto V = build_ground_state(cubic(), 40.0, 4000);
    for (std::size_t i = 1; i + 1 < V.size(); ++i) {
        const double d = V.derivs()[i];
        EXPECT_LE(std::abs(d * d - cubic().F(V.values()[i])), 1e-8);
    }
}

TEST(GroundState, AgreesWithShootingOracle) {
    const double lam = cubic().lambda();
    const auto V = build_ground_state(cubic(), 20.0 / lam, 4000);
    const auto fine = test_support::shoot_ground(0.25L, 12.0L / lam, 1e-4L);
    const auto half = test_support::shoot_ground(0.25L, 12.0L / lam, 2e-4L);
    for (std::size_t j = 0; j < fine.size(); j += 100) {
        const double z = static_cast<double>(fine[j].first);
        const double vo = static_cast<double>(fine[j].second);
        ASSERT_NEAR(vo, static_cast<double>(half[j / 2].second), 1e-6 * vo);
        EXPECT_NEAR(V.value(z), vo, 1e-6 * vo) << "z=" << z;
    }
}

TEST(GroundState, TailConstant) {
    const double lam = cubic().lambda();
    const double A = compute_constants(cubic()).A;
    const auto orbit = test_support::shoot_ground(0.25L, 12.0L / lam, 1e-4L);
    const double z = static_cast<double>(orbit.back().first);
    const double vo = static_cast<double>(orbit.back().second);
    EXPECT_NEAR(z, 12.0 / lam, 1e-9);
    EXPECT_LE(std::abs(std::exp(lam * z) * vo - A) / A, 1e-3);
    const auto V = build_ground_state(cubic(), 20.0 / lam, 4000);
    EXPECT_LE(std::abs(std::exp(lam * z) * V.value(z) - A) / A, 1e-3);
    // Beyond the grid the analytic tail takes over continuously.
    const double edge = V.x_end();
    EXPECT_NEAR(V.value(edge + 1e-9), V.value(edge), 1e-8 * V.value(edge));
}

TEST(ActiveState, BoundarySlopeAndMonotone) {
    const auto v = build_active_state(cubic(), 25.0, 2500);
    EXPECT_EQ(v.value(0.0), 0.0);
    EXPECT_NEAR(v.derivs()[0], std::sqrt(1.0 / 12.0), 1e-15);
    for (std::size_t i = 0; i + 1 < v.size(); ++i) EXPECT_LT(v.values()[i], v.values()[i + 1]);
    EXPECT_GT(v.values().back(), 1.0 - 1e-6);
    EXPECT_LT(v.values().back(), 1.0);
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        const double d = v.derivs()[i];
        EXPECT_LE(std::abs(d * d - (cubic().F(v.values()[i]) - cubic().F_one())), 1e-8);
    }
    const double r1 = max_residual(v, cubic(), 0, 25);
    const double r2 = max_residual(build_active_state(cubic(), 25.0, 5000), cubic(), 0, 25);
    EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(CompactBump, ShapeAndEndpoints) {
    const double m = 0.7;
    const auto b = build_compact_bump(cubic(), m, 2000);
    const double L = b.half_width();
    EXPECT_NEAR(b.value(L), m, 1e-14);
    EXPECT_EQ(b.value(0.0), 0.0);
    EXPECT_EQ(b.value(2 * L), 0.0);
    EXPECT_EQ(b.value(-1.0), 0.0);
    EXPECT_EQ(b.value(2 * L + 1.0), 0.0);
    EXPECT_NEAR(b.derivs().front(), std::sqrt(-cubic().F(m)), 1e-14);
    EXPECT_NEAR(b.derivs().back(), -std::sqrt(-cubic().F(m)), 1e-14);
    for (std::size_t i = 1; i + 1 < b.size(); ++i) {
        EXPECT_GT(b.values()[i], 0.0);
        EXPECT_LE(b.values()[i], m);
        const double d = b.derivs()[i];
        EXPECT_LE(std::abs(d * d - (cubic().F(b.values()[i]) - cubic().F(m))), 1e-8);
    }
    const double r1 = max_residual(b, cubic(), 0, 2 * L);
    const double r2 = max_residual(build_compact_bump(cubic(), m, 4000), cubic(), 0, 2 * L);
    EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(CompactBump, HalfWidthAgainstOracle) {
    const double th = cubic().theta();
    for (double m : {th + 0.01, th + 0.1, th + 0.3, 0.7, 0.9}) {
        const long double a = test_support::bump_half_width_oracle(0.25L, m, 400);
        const long double c = test_support::bump_half_width_oracle(0.25L, m, 800);
        ASSERT_NEAR(static_cast<double>(a), static_cast<double>(c), 1e-10);
        EXPECT_NEAR(bump_half_width(cubic(), m), static_cast<double>(c), 1e-9) << "m=" << m;
    }
}

TEST(CompactBump, HalfWidthDivergesTowardTheta) {
    const double th = cubic().theta();
    const double a = bump_half_width(cubic(), th + 0.01);
    const double b = bump_half_width(cubic(), th + 0.1);
    const double c = bump_half_width(cubic(), th + 0.3);
    EXPECT_GT(a, b);
    EXPECT_GT(b, c);
    EXPECT_GT(bump_half_width(cubic(), th + 1e-4), bump_half_width(cubic(), th + 1e-3));
}

TEST(CompactBump, RejectsPeakOutsideRange) {
    for (double m : {0.3, cubic().theta(), 1.0, 1.2}) {
        try {
            (void)build_compact_bump(cubic(), m, 100);
            FAIL() << "m=" << m;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidM);
        }
    }
}

TEST(ShiftSets, DirichletHasOnlyActiveShiftZero) {
    const auto V = build_ground_state(cubic(), 40.0, 2000);
    const auto v = build_active_state(cubic(), 40.0, 2000);
    const auto s = find_shift_sets(cubic(), V, v, 0.0);
    EXPECT_TRUE(s.ground.empty());
    ASSERT_EQ(s.active.size(), 1u);
    EXPECT_EQ(s.active[0], 0.0);
}

TEST(ShiftSets, RobinThreeHasOneGroundShift) {
    const auto V = build_ground_state(cubic(), 40.0, 4000);
    const auto v = build_active_state(cubic(), 40.0, 4000);
    const auto s = find_shift_sets(cubic(), V, v, 3.0);
    ASSERT_EQ(s.ground.size(), 1u);
    const auto g = s.ground[0];
    EXPECT_NEAR(g.s0, (7.5 - std::sqrt(33.75)) / 9.0, 1e-10);
    EXPECT_GT(g.z, 0.0);
    const GroundArc arc(cubic());
    const double Vz = V.value(-g.z);
    EXPECT_NEAR(Vz, g.s0, 1e-10);
    EXPECT_LE(std::abs(Vz - 3.0 * arc.slope_of(Vz)), 1e-8);
    EXPECT_LE(std::abs(V.value(-g.z) - 3.0 * V.deriv(-g.z)), 1e-8);
    ASSERT_FALSE(s.active.empty());
    for (double z : s.active) {
        EXPECT_LT(z, 0.0);
        EXPECT_LE(std::abs(v.value(-z) - 3.0 * ActiveArc(cubic()).slope_of(v.value(-z))), 1e-8);
    }
}

TEST(ShiftSets, RobinOneAndHalfHasNoGroundShift) {
    const auto V = build_ground_state(cubic(), 40.0, 2000);
    const auto v = build_active_state(cubic(), 40.0, 2000);
    const auto s = find_shift_sets(cubic(), V, v, 1.5);
    EXPECT_TRUE(s.ground.empty());
    EXPECT_FALSE(s.active.empty());
}

TEST(ShiftSets, ActiveSetNonEmptyForAllB) {
    const auto V = build_ground_state(cubic(), 40.0, 1000);
    const auto v = build_active_state(cubic(), 60.0, 3000);
    for (double b : {0.0, 0.1, 1.0, 2.0, 5.0, 20.0}) {
        EXPECT_FALSE(find_shift_sets(cubic(), V, v, b).active.empty()) << "b=" << b;
    }
}

TEST(Orbits, Classification) {
    const auto& f = cubic();
    EXPECT_EQ(classify_orbit(f, 0.0, 0.0), OrbitType::Trivial);
    EXPECT_EQ(classify_orbit(f, f.theta(), 0.0), OrbitType::Ground);
    EXPECT_EQ(classify_orbit(f, f.alpha(), 0.01), OrbitType::Periodic);
    EXPECT_EQ(classify_orbit(f, 0.7, 0.0), OrbitType::CompactBump);
    EXPECT_EQ(classify_orbit(f, 0.0, std::sqrt(1.0 / 12.0)), OrbitType::Active);
    EXPECT_EQ(classify_orbit(f, 0.0, 1.0), OrbitType::Unbounded);
}

TEST(Profiles, CsvHeader) {
    const auto V = build_ground_state(cubic(), 10.0, 100);
    std::ostringstream os;
    V.write_csv(os);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "z,v,vprime");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(V.size() + 1));
}
