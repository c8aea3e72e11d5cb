#pragma once

// Outcome certificates and the sharp threshold in sigma for data sigma * phi.
// Spreading is certified when u >= m on a window of length 2 L(m) for some m
// in (theta, 1) (u then lies above a shifted compact bump); vanishing when
// sup u < alpha (u then decays below the ODE solution eta' = f(eta)).

#include "rdrobin/error.hpp"
#include "rdrobin/nonlinearity.hpp"
#include "rdrobin/numerics.hpp"
#include "rdrobin/pde_solver.hpp"
#include "rdrobin/steady_states.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace rdrobin {

// ---------------------------------------------------------------- L(m)

/// Length L(m) such that u >= m on an interval of length 2 L(m) forces
/// spreading. For m in (theta, 1) this is the compact-bump half-width L_m;
/// for m = 1 the smallest L_m' over m' in (theta, 1), since u >= 1 >= m'
/// there; for m in (alpha, theta] the comparison constant built from the ODE
/// time T to reach theta + 2 eps and R = L_{theta + eps}.
inline double compute_L_of_m(const Nonlinearity& f, double m) {
    const double th = f.theta();
    if (!(m > f.alpha() && m <= 1.0)) {
        fail(ErrorCode::InvalidM, "L(m) needs m in (alpha, 1], got " + std::to_string(m));
    }
    if (m > th && m < 1.0) return bump_half_width(f, m);
    if (m == 1.0) {
        auto L = [&](double s) { return bump_half_width(f, s); };
        const double lo = th + 1e-3 * (1.0 - th);
        const double hi = 1.0 - 1e-3 * (1.0 - th);
        const auto best = boost::math::tools::brent_find_minima(L, lo, hi, 40);
        return best.second;
    }
    const double eps = (1.0 - th) / 3.0;
    const double T = num::integrate_split([&](double s) { return 1.0 / f.f(s); }, m, th + 2.0 * eps, f.knots());
    const double R = bump_half_width(f, th + eps);
    // grid scan, then Brent refinement around the best sample
    constexpr int kScan = 10000;
    int jbest = 0;
    for (int j = 1; j <= kScan; ++j)
        if (f.fp(double(j) / kScan) > f.fp(double(jbest) / kScan)) jbest = j;
    const auto peak = boost::math::tools::brent_find_minima([&](double s) { return -f.fp(s); },
                                                            std::max(0, jbest - 1) / double(kScan),
                                                            std::min(kScan, jbest + 1) / double(kScan), 52);
    const double fp_max = std::max(f.fp(double(jbest) / kScan), -peak.second);
    const double Q = 2.0 + fp_max;
    return 1.0 + std::sqrt((1.0 + R * R) * std::exp(Q * T) / eps - 1.0);
}

// ---------------------------------------------------------------- outcomes

enum class OutcomeKind { Vanishing, Spreading, Undecided };

constexpr std::string_view to_string(OutcomeKind k) noexcept {
    switch (k) {
        case OutcomeKind::Vanishing: return "Vanishing";
        case OutcomeKind::Spreading: return "Spreading";
        case OutcomeKind::Undecided: return "Undecided";
    }
    return "?";
}

struct SpreadingCertificate {
    double t = 0.0;
    double m = 0.0;
    double L_m = 0.0;
    double r = 0.0;  // u >= m on [r, r + 2 L_m]
};

struct VanishingCertificate {
    double t = 0.0;
    double sup = 0.0;  // < alpha
};

struct Outcome {
    OutcomeKind kind = OutcomeKind::Undecided;
    double t = 0.0;  // certificate time, or time reached when undecided
    std::optional<SpreadingCertificate> spreading;
    std::optional<VanishingCertificate> vanishing;
    bool verified = false;
    std::string verification;
    double final_umax = 0.0;
};

/// Stateless snapshot test against the two certificates.
class Classifier {
public:
    explicit Classifier(const Nonlinearity& f, int m_grid = 19) : f_(&f) {
        const double th = f.theta();
        for (int j = 1; j <= m_grid; ++j) {
            const double m = th + (1.0 - th) * j / (m_grid + 1.0);
            bumps_.push_back({m, bump_half_width(f, m)});
        }
    }

    const std::vector<std::pair<double, double>>& bumps() const noexcept { return bumps_; }

    std::optional<Outcome> check(const Field& fld) const {
        const double sup = fld.max();
        if (sup < f_->alpha()) {
            Outcome o;
            o.kind = OutcomeKind::Vanishing;
            o.t = fld.t();
            o.vanishing = VanishingCertificate{fld.t(), sup};
            o.final_umax = sup;
            return o;
        }
        for (const auto& [m, L] : bumps_) {
            if (sup < m) break;
            // longest run of nodes with u >= m
            std::size_t start = 0, run = 0;
            for (std::size_t i = 0; i <= fld.n(); ++i) {
                if (fld.u[i] >= m) {
                    if (run == 0) start = i;
                    ++run;
                    if (static_cast<double>(run - 1) * fld.dx >= 2.0 * L) {
                        Outcome o;
                        o.kind = OutcomeKind::Spreading;
                        o.t = fld.t();
                        o.spreading = SpreadingCertificate{fld.t(), m, L, fld.x(start)};
                        o.final_umax = sup;
                        return o;
                    }
                } else {
                    run = 0;
                }
            }
        }
        return std::nullopt;
    }

private:
    const Nonlinearity* f_;
    std::vector<std::pair<double, double>> bumps_;  // (m, L_m), m increasing
};

/// Independent check of a spreading certificate: a freshly built compact
/// bump v_m(. - r) lies below u at every node of its support.
inline bool verify_spreading(const Field& fld, const Nonlinearity& f, const SpreadingCertificate& c,
                             std::string* note = nullptr) {
    const auto vm = build_compact_bump(f, c.m, 2000);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= fld.n(); ++i) {
        const double x = fld.x(i) - c.r;
        if (x < 0.0 || x > vm.tail().support_end) continue;
        worst = std::min(worst, fld.u[i] - vm.value(x));
    }
    if (note) *note = "min(u - v_m(. - r)) = " + std::to_string(worst);
    return worst >= 0.0;
}

struct ClassifyOptions {
    double max_t = 0.0;        // 0: cfg.horizon(f)
    double check_every = 0.5;  // classifier interval
    bool verify = true;        // re-verify certificates
    double vanish_follow = 10.0;
    std::vector<Hook> extra_hooks;
};

/// Runs until a certificate fires or max_t. Vanishing certificates are
/// re-verified by continuing vanish_follow time units with sup u decreasing
/// at every check; spreading certificates against a rebuilt compact bump.
inline Outcome classify_run(Field fld, const SolverConfig& cfg, const Nonlinearity& f, const Classifier& cls,
                            const ClassifyOptions& opt = {}, RunRecord* record = nullptr) {
    std::optional<Outcome> found;
    RunOptions ro;
    ro.hooks = opt.extra_hooks;
    ro.t_end = opt.max_t > 0.0 ? opt.max_t : cfg.horizon(f);
    ro.hooks.push_back({opt.check_every, [&](const Field& F) {
                            found = cls.check(F);
                            return found.has_value();
                        }});
    auto rec = run(std::move(fld), cfg, f, ro);
    Outcome out;
    if (!found) {
        out.kind = OutcomeKind::Undecided;
        out.t = rec.final.t();
        out.final_umax = rec.final.max();
    } else {
        out = *found;
        if (opt.verify && out.kind == OutcomeKind::Spreading) {
            out.verified = verify_spreading(rec.final, f, *out.spreading, &out.verification);
        } else if (opt.verify && out.kind == OutcomeKind::Vanishing) {
            double prev = out.vanishing->sup;
            bool ok = true;
            RunOptions follow;
            follow.t_end = rec.final.t() + opt.vanish_follow;
            follow.hooks.push_back({opt.check_every, [&](const Field& F) {
                                        const double s = F.max();
                                        if (F.t() > out.t && !(s < prev || s == 0.0)) ok = false;
                                        prev = s;
                                        return false;
                                    }});
            const auto tail = run(rec.final, cfg, f, follow);
            out.verified = ok;
            out.verification = "sup u after " + std::to_string(opt.vanish_follow) + " = " +
                               std::to_string(tail.final.max());
        }
    }
    if (record) *record = std::move(rec);
    return out;
}

inline Outcome classify_sigma(const InitialDatum& datum, double b, const SolverConfig& cfg,
                              const Nonlinearity& f, const Classifier& cls, const ClassifyOptions& opt = {}) {
    return classify_run(make_field(datum, b, cfg, f), cfg, f, cls, opt);
}

// ---------------------------------------------------------------- bisection

enum class BisectStatus { Converged, MaxIterExceeded, Undecided };

constexpr std::string_view to_string(BisectStatus s) noexcept {
    switch (s) {
        case BisectStatus::Converged: return "Converged";
        case BisectStatus::MaxIterExceeded: return "MaxIterExceeded";
        case BisectStatus::Undecided: return "Undecided";
    }
    return "?";
}

struct BisectOptions {
    double tol_rel = 1e-10;
    int max_iter = 100;
    double start = 1.0;
    double cap = 1073741824.0;  // 2^30; halving stops at 2^-30
    bool heuristic = false;     // resolve undecided midpoints by final sup
    ClassifyOptions classify;
};

struct Evaluation {
    double sigma;
    Outcome outcome;
};

struct ThresholdResult {
    double sigma_lo = 0.0;
    double sigma_hi = 0.0;
    int iterations = 0;  // resolved bisection steps
    Outcome lo_outcome;
    Outcome hi_outcome;
    std::string phi_name;
    std::vector<std::pair<std::string, double>> phi_params;
    double b = 0.0;
    BisectStatus status = BisectStatus::Converged;
    bool heuristic_used = false;
    std::optional<double> undecided_sigma;
    std::vector<Evaluation> evaluations;
    double seconds = 0.0;

    double width() const noexcept { return sigma_hi - sigma_lo; }
    double rel_width() const noexcept { return (sigma_hi - sigma_lo) / sigma_hi; }
    double midpoint() const noexcept { return 0.5 * (sigma_lo + sigma_hi); }
};

/// Bisection on sigma for the datum's shape. The bracket is found by
/// doubling or halving from `start`; outcomes are assumed monotone in sigma.
inline ThresholdResult bisect_sigma(const InitialDatum& phi, double b, const SolverConfig& cfg,
                                    const Nonlinearity& f, const BisectOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    require(opt.tol_rel >= 0.0 && opt.max_iter >= 0, ErrorCode::InvalidArgument, "bad bisection options");
    const Classifier cls(f);
    ThresholdResult res;
    res.b = b;
    res.phi_name = phi.name();
    res.phi_params = phi.parameters();
    const double base_t = opt.classify.max_t > 0.0 ? opt.classify.max_t : cfg.horizon(f);

    // One evaluation with the single 4x retry on Undecided.
    auto evaluate = [&](double sigma) {
        ClassifyOptions co = opt.classify;
        co.max_t = base_t;
        RunRecord rec;
        Outcome o = classify_run(make_field(phi.with_sigma(sigma), b, cfg, f), cfg, f, cls, co, &rec);
        if (o.kind == OutcomeKind::Undecided) {
            co.max_t = 4.0 * base_t;
            o = classify_run(std::move(rec.final), cfg, f, cls, co);
        }
        res.evaluations.push_back({sigma, o});
        return o;
    };

    std::optional<Outcome> lo_o, hi_o;
    double lo = 0.0, hi = 0.0;
    const Outcome first = evaluate(opt.start);
    if (first.kind == OutcomeKind::Spreading) {
        hi = opt.start;
        hi_o = first;
    } else if (first.kind == OutcomeKind::Vanishing) {
        lo = opt.start;
        lo_o = first;
    }
    for (double s = opt.start; !hi_o;) {
        s *= 2.0;
        if (s > opt.cap) {
            fail(ErrorCode::BracketNotFound, "no spreading up to sigma = " + std::to_string(opt.cap) +
                                                 " (f may violate inf f' > -infinity)");
        }
        const Outcome o = evaluate(s);
        if (o.kind == OutcomeKind::Spreading) {
            hi = s;
            hi_o = o;
        } else if (o.kind == OutcomeKind::Vanishing) {
            lo = s;
            lo_o = o;
        }
    }
    for (double s = opt.start; !lo_o;) {
        s *= 0.5;
        if (s < 1.0 / opt.cap) fail(ErrorCode::BracketNotFound, "no vanishing down to sigma = 2^-30");
        const Outcome o = evaluate(s);
        if (o.kind == OutcomeKind::Vanishing) {
            lo = s;
            lo_o = o;
        }
    }
    res.status = BisectStatus::Converged;
    while ((hi - lo) / hi > opt.tol_rel) {
        if (res.iterations >= opt.max_iter) {
            res.status = BisectStatus::MaxIterExceeded;
            break;
        }
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // bracket at double resolution
        const Outcome o = evaluate(mid);
        if (o.kind == OutcomeKind::Spreading) {
            hi = mid;
            hi_o = o;
        } else if (o.kind == OutcomeKind::Vanishing) {
            lo = mid;
            lo_o = o;
        } else if (opt.heuristic) {
            res.heuristic_used = true;
            if (o.final_umax > f.theta()) hi = mid;
            else lo = mid;
        } else {
            res.status = BisectStatus::Undecided;
            res.undecided_sigma = mid;
            break;
        }
        ++res.iterations;
    }
    res.sigma_lo = lo;
    res.sigma_hi = hi;
    res.lo_outcome = *lo_o;
    res.hi_outcome = *hi_o;
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

struct CurveRow {
    double b;
    ThresholdResult result;
};

struct SigmaCurve {
    std::vector<CurveRow> rows;  // in b order
    bool monotone = true;        // sigma*(b) nonincreasing within bracket width
};

/// bisect_sigma over b values on `threads` workers; rows merged by b order.
inline SigmaCurve sigma_star_curve(const InitialDatum& phi, std::vector<double> b_list, const SolverConfig& cfg,
                                   const Nonlinearity& f, const BisectOptions& opt = {}, unsigned threads = 1) {
    std::sort(b_list.begin(), b_list.end());
    SigmaCurve out;
    out.rows.resize(b_list.size());
    std::vector<std::exception_ptr> errors(b_list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t j; (j = next++) < b_list.size();) {
            try {
                out.rows[j] = {b_list[j], bisect_sigma(phi, b_list[j], cfg, f, opt)};
            } catch (...) {
                errors[j] = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(b_list.size())));
    std::vector<std::jthread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    pool.clear();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (std::size_t j = 1; j < out.rows.size(); ++j)
        if (out.rows[j].result.sigma_lo > out.rows[j - 1].result.sigma_hi) out.monotone = false;
    return out;
}

}  // namespace rdrobin
