#include "rdrobin/cli.hpp"

#include "rdrobin/io.hpp"
#include "rdrobin/threshold.hpp"
#include "rdrobin/transition.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace rdrobin::cli {
namespace {

using io::json;
namespace fs = std::filesystem;

constexpr std::array<std::string_view, 6> kSubcommands = {"steady",     "simulate",    "threshold",
                                                         "transition", "reduced-ode", "regime"};

struct Global {
    std::string out_dir = ".";
    unsigned threads = 1;
    std::optional<long long> seed;  // reserved: every path is deterministic
    bool quiet = false;
};

/// Options shared by every subcommand.
struct Common {
    std::string f_config;
    double b = 0.0;
};

struct Grid {
    double dx = 0.02;
    double dt = 0.01;

    SolverConfig config() const {
        SolverConfig c;
        c.dx = dx;
        c.dt = dt;
        return c;
    }
    json to_json() const { return {{"dx", dx}, {"dt", dt}}; }
};

struct SteadyOpts {
    Common c;
    std::string kind = "ground";
    double z_max = 0.0;  // 0: 20 / lambda
    int n = 0;           // 0: spacing 0.0025 / lambda
    double m = 0.0;
    std::string out = "steady.csv";
};

struct SimulateOpts {
    Common c;
    Grid g;
    std::string datum = "triangle:h=1";
    double sigma = 1.0;
    double tmax = 100.0;
    double snap_every = 0.0;
    double log_every = 1.0;
};

struct ThresholdOpts {
    Common c;
    Grid g;
    std::string datum = "triangle:h=1";
    double tol_rel = 1e-10;
    int max_iter = 100;
    double cap = 1073741824.0;
    double max_t = 0.0;
    std::vector<double> b_list;
    std::string out = "threshold.json";
};

struct TransitionOpts {
    Common c;
    Grid g;
    std::string datum = "manifold:xi=3";
    int max_iter = 40;
    double track_every = 0.5;
    double min_decades = 1.0;
    double t_min = 0.0;
    bool gnuplot = true;
};

struct ReducedOpts {
    Common c;
    double y0 = 0.0;
    double t_end = 1e6;
    int samples = 200;
    std::string out = "reduced_ode.csv";
};

struct RegimeOpts {
    Common c;
    int samples = 10000;
};

// ---------------------------------------------------------------- context

/// Loaded nonlinearity plus lazily built profiles.
class Context {
public:
    explicit Context(const std::string& path) : cfg_(io::load_f_config(path)), f_(io::make_nonlinearity(cfg_)) {}

    const Nonlinearity& f() const noexcept { return f_; }
    const io::FConfig& f_config() const noexcept { return cfg_; }
    double z_max() const { return 20.0 / f_.lambda(); }

    std::shared_ptr<const SteadyProfile> ground() {
        if (!ground_) ground_ = std::make_shared<const SteadyProfile>(build_ground_state(f_, z_max(), 8000));
        return ground_;
    }
    const SteadyProfile& active() {
        if (!active_) active_ = std::make_shared<const SteadyProfile>(build_active_state(f_, z_max(), 2000));
        return *active_;
    }
    const DerivedConstants& constants() {
        if (!dc_) dc_ = compute_constants(f_);
        return *dc_;
    }
    const ShiftSets& shifts(double b) {
        auto it = shifts_.find(b);
        if (it == shifts_.end()) it = shifts_.emplace(b, find_shift_sets(f_, *ground(), active(), b)).first;
        return it->second;
    }

private:
    io::FConfig cfg_;
    Nonlinearity f_;
    std::shared_ptr<const SteadyProfile> ground_, active_;
    std::optional<DerivedConstants> dc_;
    std::map<double, ShiftSets> shifts_;
};

// ---------------------------------------------------------------- datum

/// "name" or "name:key=value,key=value".
std::pair<std::string, std::map<std::string, double>> split_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    std::pair<std::string, std::map<std::string, double>> out{spec.substr(0, colon), {}};
    if (colon == std::string::npos) return out;
    std::stringstream ss(spec.substr(colon + 1));
    std::string kv;
    while (std::getline(ss, kv, ',')) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos, ErrorCode::InvalidArgument, "datum parameter '" + kv + "' needs key=value");
        const std::string key = io::trim(kv.substr(0, eq));
        const std::string val = io::trim(kv.substr(eq + 1));
        char* end = nullptr;
        const double v = std::strtod(val.c_str(), &end);
        require(!val.empty() && *end == '\0', ErrorCode::InvalidArgument, "datum parameter '" + key + "' is not a number");
        out.second[key] = v;
    }
    return out;
}

double param(const std::map<std::string, double>& p, const std::string& key, std::optional<double> dflt = {}) {
    if (const auto it = p.find(key); it != p.end()) return it->second;
    require(dflt.has_value(), ErrorCode::InvalidArgument, "datum needs parameter '" + key + "'");
    return *dflt;
}

InitialDatum parse_datum(const std::string& spec, double b, Context& ctx) {
    const auto [name, p] = split_spec(spec);
    if (const auto shape = parse_bump_shape(name)) return InitialDatum::bump(*shape, param(p, "h", 1.0));
    if (name == "capped-ground") {
        return InitialDatum(CappedGround{ctx.ground(), param(p, "z0"), param(p, "rho", 1.0)});
    }
    if (name == "bump-offset") return make_bump_offset(ctx.f(), param(p, "m"), b, param(p, "width", 1.0));
    if (name == "ground-shift") {
        const auto& s = ctx.shifts(b);
        const auto idx = static_cast<std::size_t>(param(p, "index", 0.0));
        require(idx < s.ground.size(), ErrorCode::InvalidArgument,
                "ground shift index " + std::to_string(idx) + " out of range: Z_ground(b) has " +
                    std::to_string(s.ground.size()) + " points");
        return InitialDatum(GroundShiftDatum{ctx.ground(), s.ground[idx].z});
    }
    if (name == "manifold") return manifold_datum(ctx.f(), ctx.ground(), b, param(p, "xi"));
    fail(ErrorCode::InvalidArgument, "unknown datum '" + name +
                                         "' (triangle, smooth, plateau, two-bump, capped-ground, bump-offset, "
                                         "ground-shift, manifold)");
}

json datum_json(const InitialDatum& d, const std::string& spec) {
    json params = json::object();
    for (const auto& [k, v] : d.parameters()) params[k] = v;
    return {{"spec", spec}, {"name", d.name()}, {"sigma", d.sigma()}, {"parameters", params}};
}

// ---------------------------------------------------------------- reports

json outcome_json(const Outcome& o) {
    json j{{"kind", std::string(to_string(o.kind))}, {"t", o.t}, {"verified", o.verified},
           {"verification", o.verification}, {"final_umax", o.final_umax}};
    if (o.spreading) {
        j["spreading"] = {{"t", o.spreading->t}, {"m", o.spreading->m}, {"L_m", o.spreading->L_m},
                          {"r", o.spreading->r}};
    }
    if (o.vanishing) j["vanishing"] = {{"t", o.vanishing->t}, {"sup", o.vanishing->sup}};
    return j;
}

json threshold_json(const ThresholdResult& r) {
    json params = json::object();
    for (const auto& [k, v] : r.phi_params) params[k] = v;
    json evals = json::array();
    for (const auto& e : r.evaluations) {
        evals.push_back({{"sigma", e.sigma}, {"kind", std::string(to_string(e.outcome.kind))}, {"t", e.outcome.t}});
    }
    json j{{"b", r.b},
           {"phi", {{"name", r.phi_name}, {"parameters", params}}},
           {"status", std::string(to_string(r.status))},
           {"sigma_lo", r.sigma_lo},
           {"sigma_hi", r.sigma_hi},
           {"width", r.width()},
           {"rel_width", r.rel_width()},
           {"iterations", r.iterations},
           {"heuristic_used", r.heuristic_used},
           {"lo_certificate", outcome_json(r.lo_outcome)},
           {"hi_certificate", outcome_json(r.hi_outcome)},
           {"evaluations", evals}};
    if (r.undecided_sigma) j["undecided_sigma"] = *r.undecided_sigma;
    return j;
}

json constants_json(const DerivedConstants& dc, double b) {
    json j{{"lambda", dc.lambda}, {"A", dc.A}, {"I_F", dc.I_F}};
    if (b * dc.lambda < 1.0) j["c_b"] = dc.c_of_b(b);
    j["c_hat"] = dc.c_hat ? json(*dc.c_hat) : json(nullptr);
    return j;
}

json f_json(const Nonlinearity& f) {
    return {{"alpha", f.alpha()}, {"theta", f.theta()}, {"lambda", f.lambda()}, {"F_one", f.F_one()}};
}

std::string shift_table(const ShiftSets& s) {
    std::ostringstream os;
    os << "s0,z\n";
    for (const auto& g : s.ground) os << io::fmt17(g.s0) << ',' << io::fmt17(g.z) << '\n';
    return os.str();
}

json shifts_json(const ShiftSets& s) {
    json g = json::array();
    for (const auto& x : s.ground) g.push_back({{"s0", x.s0}, {"z", x.z}});
    return {{"b", s.b}, {"ground", g}, {"active", s.active}, {"scan_samples", s.scan_samples}};
}

// ---------------------------------------------------------------- commands

void start_manifest(io::RunManifest& man, Context& ctx, const Common& c, const Global& g) {
    man.config()["f"] = ctx.f_config().to_json();
    man.config()["f_text"] = ctx.f_config().text;
    man.config()["b"] = c.b;
    man.config()["threads"] = g.threads;
    man.config()["seed"] = g.seed ? json(*g.seed) : json(nullptr);
}

int finish(io::RunManifest& man, const Global& g, std::ostream& out) {
    const auto p = man.write();
    if (!g.quiet) out << "manifest: " << p.string() << '\n';
    return kOk;
}

int run_steady(const SteadyOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto& f = ctx.f();
    const double z_max = o.z_max > 0.0 ? o.z_max : ctx.z_max();
    const int n = o.n > 0 ? o.n : static_cast<int>(std::ceil(z_max * f.lambda() / 0.0025));
    io::RunManifest man("steady", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.config()["kind"] = o.kind;
    man.grid() = {{"z_max", z_max}, {"n", n}};
    std::ostringstream csv;
    if (o.kind == "ground") {
        build_ground_state(f, z_max, n).write_csv(csv);
    } else if (o.kind == "active") {
        build_active_state(f, z_max, n).write_csv(csv);
    } else if (o.kind == "bump") {
        man.config()["m"] = o.m;
        build_compact_bump(f, o.m, n).write_csv(csv);
    } else {
        fail(ErrorCode::InvalidArgument, "--kind must be ground, active or bump");
    }
    man.emit(o.out, csv.str());
    const auto& dc = ctx.constants();
    const auto& s = ctx.shifts(o.c.b);
    const json report{{"f", f_json(f)}, {"constants", constants_json(dc, o.c.b)}, {"shifts", shifts_json(s)}};
    man.emit("steady.json", io::dump17(report));
    if (!g.quiet) out << io::dump17(report);
    return finish(man, g, out);
}

int run_simulate(const SimulateOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto& f = ctx.f();
    const auto d = parse_datum(o.datum, o.c.b, ctx).with_sigma(o.sigma);
    const auto cfg = o.g.config();
    io::RunManifest man("simulate", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.config()["datum"] = datum_json(d, o.datum);
    man.config()["tmax"] = o.tmax;
    man.grid() = o.g.to_json();

    std::vector<std::pair<std::string, std::string>> snaps;
    RunOptions ro;
    ro.t_end = o.tmax;
    ro.log_every = o.log_every;
    auto snapshot = [&](const Field& fld) {
        io::CsvTable t({"x", "u"});
        for (std::size_t i = 0; i <= fld.n(); ++i) t.add({fld.x(i), fld.u[i]});
        char name[64];
        std::snprintf(name, sizeof name, "snap_%06lld.csv", static_cast<long long>(fld.steps));
        snaps.emplace_back(name, t.str());
    };
    if (o.snap_every > 0.0) {
        ro.hooks.push_back({o.snap_every, [&](const Field& fld) {
                                snapshot(fld);
                                return false;
                            }});
    }
    const auto rec = run(make_field(d, o.c.b, cfg, f), cfg, f, ro);
    if (o.snap_every <= 0.0) snapshot(rec.final);
    for (const auto& [name, text] : snaps) man.emit(name, text);
    io::CsvTable log({"t", "umax", "argmax", "energy", "signchanges", "domain_len"});
    for (const auto& r : rec.log) log.add({r.t, r.umax, r.argmax, r.energy, double(r.signchanges), r.domain_len});
    man.emit("log.csv", log.str());
    man.extra() = {{"final_t", rec.final.t()}, {"final_umax", rec.final.max()}, {"clipped", rec.clipped},
                   {"growth_events", rec.growth_events}};
    if (!g.quiet) {
        out << "t=" << io::fmt17(rec.final.t()) << " umax=" << io::fmt17(rec.final.max()) << " snapshots=" << snaps.size()
            << '\n';
    }
    return finish(man, g, out);
}

BisectOptions bisect_options(double tol, int max_iter, double cap, double max_t) {
    BisectOptions b;
    b.tol_rel = tol;
    b.max_iter = max_iter;
    b.cap = cap;
    b.classify.max_t = max_t;
    return b;
}

int run_threshold(const ThresholdOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto& f = ctx.f();
    const auto d = parse_datum(o.datum, o.c.b, ctx);
    const auto cfg = o.g.config();
    const auto bopt = bisect_options(o.tol_rel, o.max_iter, o.cap, o.max_t);
    io::RunManifest man("threshold", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.config()["datum"] = datum_json(d, o.datum);
    man.config()["tol_rel"] = o.tol_rel;
    man.config()["max_iter"] = o.max_iter;
    man.config()["cap"] = o.cap;
    man.grid() = o.g.to_json();
    json result;
    if (o.b_list.empty()) {
        const auto r = bisect_sigma(d, o.c.b, cfg, f, bopt);
        result = threshold_json(r);
        man.extra()["bisection_seconds"] = r.seconds;
        if (!g.quiet) {
            out << "sigma* in [" << io::fmt17(r.sigma_lo) << ", " << io::fmt17(r.sigma_hi) << "] after "
                << r.iterations << " iterations (" << to_string(r.status) << ")\n";
        }
    } else {
        man.config()["b_list"] = o.b_list;
        const auto curve = sigma_star_curve(d, o.b_list, cfg, f, bopt, std::max(1u, g.threads));
        json rows = json::array();
        json secs = json::array();
        for (const auto& row : curve.rows) {
            rows.push_back(threshold_json(row.result));
            secs.push_back(row.result.seconds);
            if (!g.quiet) {
                out << "b=" << io::fmt17(row.b) << " sigma* in [" << io::fmt17(row.result.sigma_lo) << ", "
                    << io::fmt17(row.result.sigma_hi) << "]\n";
            }
        }
        result = {{"rows", rows}, {"monotone", curve.monotone}};
        man.extra()["bisection_seconds"] = secs;
    }
    man.emit(o.out, io::dump17(result));
    return finish(man, g, out);
}

std::string gnuplot_script(const std::string& csv, double slope, double intercept) {
    std::ostringstream os;
    os << "set datafile separator ','\n"
       << "set xlabel 'ln t'\nset ylabel 'xi'\nset key left top\n"
       << "plot '" << csv << "' using (log($1)):2 every ::1 with points title 'xi(t)', \\\n"
       << "     " << io::fmt17(slope) << "*x + " << io::fmt17(intercept) << " title 'fit'\n";
    return os.str();
}

int run_transition(const TransitionOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto& f = ctx.f();
    const auto d = parse_datum(o.datum, o.c.b, ctx);
    const auto cfg = o.g.config();
    io::RunManifest man("transition", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.config()["datum"] = datum_json(d, o.datum);
    man.config()["max_iter"] = o.max_iter;
    man.config()["track_every"] = o.track_every;
    man.grid() = o.g.to_json();

    const auto tr = transition_experiment(d, o.c.b, cfg, f, bisect_options(0.0, o.max_iter, 1073741824.0, 0.0),
                                          o.track_every);
    const auto& traj = tr.trajectory;
    io::CsvTable csv({"t", "xi", "umax", "in_window"});
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
        const auto& s = traj.samples[i];
        csv.add({s.t, s.xi, s.umax, double(i >= traj.valid_begin && i < traj.valid_end)});
    }
    man.emit("trajectory.csv", csv.str());

    json report{{"threshold", threshold_json(tr.threshold)},
                {"sigma", tr.sigma},
                {"outcome", outcome_json(tr.outcome)},
                {"band", {traj.band_lo, traj.band_hi}},
                {"lost", traj.lost}};
    if (traj.has_window()) report["window"] = {traj.t_start(), traj.t_end()};
    const auto& dc = ctx.constants();
    report["constants"] = constants_json(dc, o.c.b);
    std::optional<LogLawFit> fit;
    try {
        FitOptions fo;
        fo.min_decades = o.min_decades;
        fo.t_min = o.t_min;
        fit = fit_log_law(traj, f, dc, o.c.b, fo);
        report["fit"] = {{"slope", fit->slope},
                         {"intercept", fit->intercept},
                         {"t1", fit->t1},
                         {"t2", fit->t2},
                         {"points", fit->points},
                         {"rms", fit->rms},
                         {"predicted_slope", fit->predicted_slope},
                         {"predicted_intercept", fit->predicted_intercept},
                         {"slope_rel_dev", fit->slope_rel_dev},
                         {"intercept_residual", fit->intercept_residual}};
    } catch (const Error& e) {
        report["fit"] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
    if (traj.has_window() && !(o.c.b * f.lambda() > 1.0 && !is_critical_b(f, o.c.b))) {
        // reduced law launched at the window start, compared over the window
        const auto w = traj.window();
        const double ts = w.front().t;
        const double rate = is_critical_b(f, o.c.b) ? 3.0 * f.lambda() : 2.0 * f.lambda();
        const double c = is_critical_b(f, o.c.b) ? require_c_hat(dc) : dc.c_of_b(o.c.b);
        double dev = 0.0;
        for (const auto& s : w) {
            dev = std::max(dev, std::abs(s.xi - ReducedODEResult::closed_form(rate, c, w.front().xi, s.t - ts)));
        }
        report["reduced_ode_max_deviation"] = dev;
    }
    report["regime"] = json{{"label", std::string(to_string(regime_partition(f, o.c.b).label))}};
    if (o.c.b > 0.0) {
        const auto rep = shift_regime_report(f, o.c.b, traj, ctx.shifts(o.c.b), 1e-9);
        if (rep.nearest_z) report["regime"]["nearest_z"] = *rep.nearest_z;
        if (rep.distance) report["regime"]["distance"] = *rep.distance;
    }
    man.emit("fit.json", io::dump17(report));
    if (o.gnuplot && fit) man.emit("xi_vs_lnt.gp", gnuplot_script("trajectory.csv", fit->slope, fit->intercept));
    man.extra()["bisection_seconds"] = tr.threshold.seconds;
    if (!g.quiet) {
        out << "sigma=" << io::fmt17(tr.sigma) << " outcome=" << to_string(tr.outcome.kind);
        if (traj.has_window()) out << " window=[" << traj.t_start() << ", " << traj.t_end() << "]";
        if (fit) out << " slope=" << io::fmt17(fit->slope) << " (predicted " << fit->predicted_slope << ")";
        out << '\n';
    }
    return finish(man, g, out);
}

int run_reduced(const ReducedOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto r = reduced_ode(ctx.f(), ctx.constants(), o.c.b, o.y0, o.t_end, o.samples);
    io::RunManifest man("reduced-ode", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.config()["y0"] = o.y0;
    man.config()["t_end"] = o.t_end;
    man.grid() = {{"samples", o.samples}};
    io::CsvTable csv({"t", "y", "y_closed"});
    for (std::size_t i = 0; i < r.t.size(); ++i) csv.add({r.t[i], r.y_numeric[i], r.y_closed[i]});
    man.emit(o.out, csv.str());
    man.extra() = {{"rate", r.rate}, {"constant", r.constant}, {"c_hat_branch", r.c_hat_branch},
                   {"max_difference", r.max_difference()}};
    if (!g.quiet) out << "max |numeric - closed| = " << io::fmt17(r.max_difference()) << '\n';
    return finish(man, g, out);
}

int run_regime(const RegimeOpts& o, const Global& g, std::ostream& out) {
    Context ctx(o.c.f_config);
    const auto& f = ctx.f();
    const auto rep = regime_partition(f, o.c.b, o.samples);
    const auto& s = ctx.shifts(o.c.b);
    io::RunManifest man("regime", g.out_dir);
    start_manifest(man, ctx, o.c, g);
    man.grid() = {{"samples", o.samples}};
    const json report{{"label", std::string(to_string(rep.label))}, {"b", o.c.b},
                      {"roots", rep.roots},  {"min_ratio", rep.min_ratio},
                      {"flagged", rep.flagged}, {"note", rep.note},
                      {"shifts", shifts_json(s)}};
    man.emit("regime.json", io::dump17(report));
    man.emit("shifts.csv", shift_table(s));
    // printed regardless of --quiet: this is the command's answer
    out << to_string(rep.label) << '\n' << shift_table(s);
    return finish(man, g, out);
}

// ---------------------------------------------------------------- parsing

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--f-config", c.f_config, "TOML file describing f")->required();
    sub->add_option("--b", c.b, "Robin parameter b >= 0");
}

void add_grid(CLI::App* sub, Grid& g) {
    sub->add_option("--dx", g.dx, "space step");
    sub->add_option("--dt", g.dt, "time step");
}

std::string usage() {
    std::string u = "usage: rdrobin [--out-dir DIR] [--threads N] [--seed S] [--quiet] <subcommand> --f-config FILE "
                    "[options]\nsubcommands:";
    for (auto s : kSubcommands) u += " " + std::string(s);
    return u + "\nrun 'rdrobin <subcommand> --help' for the options of one subcommand\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bistable reaction-diffusion on the half line with a Robin boundary", "rdrobin"};
    Global g;
    app.add_option("--out-dir", g.out_dir, "directory for outputs and manifest");
    app.add_option("--threads", g.threads, "worker threads for threshold curves");
    app.add_option("--seed", g.seed, "reserved; recorded in the manifest");
    app.add_flag("--quiet", g.quiet, "suppress progress output");
    app.require_subcommand(1, 1);
    // global flags are also accepted after the subcommand name
    app.fallthrough();

    SteadyOpts st;
    auto* s_st = app.add_subcommand("steady", "tabulate a steady state and report constants and shift sets");
    add_common(s_st, st.c);
    s_st->add_option("--kind", st.kind, "ground, active or bump");
    s_st->add_option("--z-max", st.z_max, "half-length of the table");
    s_st->add_option("--n", st.n, "table intervals");
    s_st->add_option("--m", st.m, "peak of the compact bump");
    s_st->add_option("--out", st.out, "CSV file (z,v,vprime) under --out-dir");

    SimulateOpts sim;
    auto* s_sim = app.add_subcommand("simulate", "run the PDE from sigma * phi");
    add_common(s_sim, sim.c);
    add_grid(s_sim, sim.g);
    s_sim->add_option("--datum", sim.datum, "datum spec such as triangle:h=4 or manifold:xi=3");
    s_sim->add_option("--sigma", sim.sigma, "amplitude");
    s_sim->add_option("--tmax", sim.tmax, "end time");
    s_sim->add_option("--snap-every", sim.snap_every, "snapshot interval (0: final state only)");
    s_sim->add_option("--log-every", sim.log_every, "run-log interval");

    ThresholdOpts th;
    auto* s_th = app.add_subcommand("threshold", "bisect the sharp threshold sigma*");
    add_common(s_th, th.c);
    add_grid(s_th, th.g);
    s_th->add_option("--datum", th.datum, "datum spec");
    s_th->add_option("--tol-rel", th.tol_rel, "relative bracket width");
    s_th->add_option("--max-iter", th.max_iter, "bisection iterations");
    s_th->add_option("--cap", th.cap, "largest sigma tried while bracketing");
    s_th->add_option("--max-t", th.max_t, "classification horizon (0: default)");
    s_th->add_option("--b-list", th.b_list, "comma-separated b values for a sigma*(b) curve")->delimiter(',');
    s_th->add_option("--out", th.out, "result JSON under --out-dir");

    TransitionOpts tr;
    auto* s_tr = app.add_subcommand("transition", "near-threshold run with pulse tracking and log-law fit");
    add_common(s_tr, tr.c);
    add_grid(s_tr, tr.g);
    s_tr->add_option("--datum", tr.datum, "datum spec");
    s_tr->add_option("--max-iter", tr.max_iter, "bisection iterations before the tracked run");
    s_tr->add_option("--track-every", tr.track_every, "pulse sampling interval");
    s_tr->add_option("--min-decades", tr.min_decades, "shortest fit window in decades of t");
    s_tr->add_option("--t-min", tr.t_min, "drop window samples before this time");
    s_tr->add_flag("!--no-gnuplot", tr.gnuplot, "skip the gnuplot script");

    ReducedOpts ro;
    auto* s_ro = app.add_subcommand("reduced-ode", "integrate the reduced drift law");
    add_common(s_ro, ro.c);
    s_ro->add_option("--y0", ro.y0, "initial position");
    s_ro->add_option("--t-end", ro.t_end, "end time");
    s_ro->add_option("--samples", ro.samples, "output times");
    s_ro->add_option("--out", ro.out, "CSV (t,y,y_closed) under --out-dir");

    RegimeOpts rg;
    auto* s_rg = app.add_subcommand("regime", "classify the shift regime for b");
    add_common(s_rg, rg.c);
    s_rg->add_option("--samples", rg.samples, "scan density");

    // the first non-flag argument that is not an option value names the subcommand
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--out-dir" || a == "--threads" || a == "--seed") {
            ++i;
            continue;
        }
        if (a.rfind("-", 0) == 0) continue;
        if (std::find(kSubcommands.begin(), kSubcommands.end(), a) == kSubcommands.end()) {
            err << "UnknownSubcommand: '" << a << "'\n" << usage();
            return kValidation;
        }
        break;
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        for (auto* sub : app.get_subcommands()) err << sub->help();
        if (app.get_subcommands().empty()) err << usage();
        return kValidation;
    }

    try {
        fs::create_directories(g.out_dir);
        if (*s_st) return run_steady(st, g, out);
        if (*s_sim) return run_simulate(sim, g, out);
        if (*s_th) return run_threshold(th, g, out);
        if (*s_tr) return run_transition(tr, g, out);
        if (*s_ro) return run_reduced(ro, g, out);
        if (*s_rg) return run_regime(rg, g, out);
    } catch (const Error& e) {
        err << e.what() << '\n';
        return is_validation_error(e.code()) ? kValidation : kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    }
    err << usage();
    return kValidation;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args, out, err);
}

}  // namespace rdrobin::cli
