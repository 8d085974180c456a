// End-to-end acceptance gate: one PASS/FAIL line per shipped claim, with the
// measured value next to its pinned tolerance. Exits with the failure count.
#include <nls/io.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace nls;
namespace fs = std::filesystem;

namespace {

struct Gate {
    int failed = 0;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void line(int k, bool ok, const std::string& what) {
        const double s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s  criterion %d: %s  [%.1fs]\n", ok ? "PASS" : "FAIL", k, what.c_str(),
                    s);
        std::fflush(stdout);
        failed += !ok;
        t0 = std::chrono::steady_clock::now();
    }
};

template <class F>
void criterion(Gate& g, int k, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        g.line(k, false, std::string("exception: ") + e.what());
    }
}

std::string num(double x) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", x);
    return b;
}

// small least squares slope of ln y against ln x, for short windows where
// fit_exponent's sample-count guard does not apply
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = (int)x.size();
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) mx += std::log(x[i]), my += std::log(y[i]);
    mx /= n, my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    }
    return sxy / sxx;
}

SweepResult run_sweep(int N, double q, double lo, double hi, int n) {
    Params P;
    P.N = N;
    P.q = q;
    P.lambda = 1.0;
    P.crit = true;
    return sweep(P, geom_grid(lo, hi, n), {}, 1);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NLS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// everything a run may emit, with the wall-time stats stripped
std::map<std::string, std::string> payload(const fs::path& outdir) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(outdir)) {
        if (e.path().filename() == "envelope.json") {
            auto j = io::json::parse(slurp(e.path()));
            j.erase("stats");
            m["envelope.json"] = j.dump();
        } else {
            m[e.path().filename().string()] = slurp(e.path());
        }
    }
    return m;
}

} // namespace

int main() {
    Gate g;
    const double lvl = bubble_level(3);
    const fs::path work = fs::temp_directory_path() / "nls_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // 1: closed-form solutions reproduce and the Sobolev constant cross-checks
    criterion(g, 1, [&] {
        const Certificate cb = energy(bubble_profile(3, 1.0));
        const double bub = std::max(cb.rel_nehari(), cb.rel_pohozaev());
        const double gap = std::abs(cb.level_gap) / lvl;

        Params Ps;
        Ps.N = 3;
        Ps.q = 4.0;
        Ps.t = 1.0;
        Ps.lambda = 1.0;
        Ps.crit = false;
        double sol = 1.0;
        for (const auto& r : find_positive_solutions(Ps).records)
            if (r.branch == Branch::ground_state)
                sol = std::max(r.cert.rel_nehari(), r.cert.rel_pohozaev());

        const double sob =
            std::abs(sobolev_constant(3) - sobolev_constant_reference(3)) /
            sobolev_constant_reference(3);
        g.line(1,
               bub < 1e-8 && gap < 1e-8 && sol < 1e-8 && sob < 1e-6,
               "bubble " + num(bub) + ", level gap " + num(gap) + ", soliton " + num(sol) +
                   " (all < 1e-8); Sobolev cross-check " + num(sob) + " (< 1e-6)");
    });

    // 2: two certified solutions at strong coupling, none below the bubble at weak
    criterion(g, 2, [&] {
        bool ok = true;
        std::string msg;
        for (double q : {2.5, 3.0, 3.5}) {
            Params P;
            P.N = 3;
            P.q = q;
            P.lambda = 1.0;
            P.crit = true;
            for (double t : {1e3, 1e4}) {
                P.t = t;
                const auto n = find_positive_solutions(P).records.size();
                ok = ok && n >= 2;
                msg += "q=" + num(q) + ",t=" + num(t) + ":" + std::to_string(n) + " ";
            }
            P.t = 1e-2;
            for (const auto& r : find_positive_solutions(P).records)
                ok = ok && !(r.cert.energy < lvl - sub_bubble_margin(1e-5));
        }
        g.line(2, ok, "solutions " + msg + "(each >= 2); none below the bubble at t=0.01");
    });

    // 3: branch growth and decay exponents over t in [1e3, 1e5]
    SweepResult sw25; // kept for criterion 7
    criterion(g, 3, [&] {
        bool ok = true;
        std::string msg;
        for (double q : {2.5, 3.0, 3.5}) {
            const SweepResult sw = run_sweep(3, q, 1e3, 1e5, 13);
            if (q == 2.5) sw25 = sw;
            std::vector<double> ts, s1, s2;
            for (const auto& s : sw.samples)
                if (s.n_solutions >= 2 && s.sup2 > 0.0) {
                    ts.push_back(s.t);
                    s1.push_back(s.sup1);
                    s2.push_back(s.sup2);
                }
            ok = ok && ts.size() >= 6;
            const double e1 = fit_exponent(ts, s1, 1e3, 1e5).exponent;
            const double want1 = expected_sup1_exponent(sw.base);
            ok = ok && std::abs(e1 / want1 - 1.0) < 0.10;
            msg += "q=" + num(q) + ": branch1 " + num(e1) + " (want " + num(want1) + "), ";
            if (q == 3.0) {
                const double rms_pow = power_fit_rms(ts, s2, 1e3, 1e5);
                const double rms_log = fit_t_log_t(ts, s2, 1e3, 1e5).rms_rel;
                ok = ok && rms_log < rms_pow;
                msg += "branch2 t*log(t) rms " + num(rms_log) + " < power rms " +
                       num(rms_pow) + "; ";
            } else {
                const double e2 = fit_exponent(ts, s2, 1e3, 1e5).exponent;
                const double want2 = expected_sup2_exponent(sw.base);
                ok = ok && std::abs(e2 / want2 - 1.0) < 0.10;
                msg += "branch2 " + num(e2) + " (want " + num(want2) + "); ";
            }
        }
        g.line(3, ok, msg + "all within 10%");
    });

    // 4: a positive finite onset threshold with the level pinned on both sides
    criterion(g, 4, [&] {
        bool ok = true;
        std::string msg;
        for (double q : {2.5, 3.0, 3.5, 4.0}) {
            Params P;
            P.N = 3;
            P.q = q;
            P.lambda = 1.0;
            P.crit = true;
            const SweepResult sw = sweep(P, geom_grid(0.01, 100.0, 5), {}, 1);
            for (const auto& s : sw.samples) {
                if (s.below_bubble)
                    ok = ok && s.m < lvl - sub_bubble_margin(1e-5);
                else
                    ok = ok && std::abs(s.m - lvl) <= 10.0 * 1e-5 * lvl;
            }
            for (const auto& v : sw.violations) ok = ok && v.what != "m increased";
            ThresholdBracket br = refine_t_star(P, sw.t_star, 10);
            ok = ok && br.found() && br.lo > 0.0 && br.lo < br.hi;
            msg += "q=" + num(q) + ": t* in (" + num(br.lo) + ", " + num(br.hi) + "); ";
        }
        g.line(4, ok, msg + "sub side at the bubble level, super side below, m nonincreasing");
    });

    // 5: the level's derivative identity closes and tightens under refinement
    criterion(g, 5, [&] {
        const double w1 = derivative_identity_check(run_sweep(3, 3.0, 10.0, 1e4, 65));
        const double w2 = derivative_identity_check(run_sweep(3, 3.0, 10.0, 1e4, 129));
        g.line(5, w1 < 0.05 && w2 < 0.55 * w1,
               "worst m'(t) violation " + num(w1) + " (< 5%) at 65 nodes, " + num(w2) +
                   " at 129 (halved)");
    });

    // 6: the normalized reduction returns solutions below the curve supremum
    // and certified nonexistence above it
    criterion(g, 6, [&] {
        Params base;
        base.N = 3;
        base.q = 2.5;
        base.lambda = 1.0;
        base.crit = true;
        const double a = 1.0;
        std::map<double, std::optional<SolutionRecord>> memo;
        const GroundProvider provider = [&](const Params& Pt) {
            auto it = memo.find(Pt.t);
            if (it != memo.end()) return it->second;
            std::optional<SolutionRecord> got;
            for (auto& r : find_positive_solutions(Pt).records)
                if (r.branch == Branch::ground_state) got = std::move(r);
            return memo.emplace(Pt.t, std::move(got)).first->second;
        };
        ReductionCurve curve;
        curve.base = base;
        curve.a = a;
        for (double tt : geom_grid(1.0, 1e4, 25)) {
            Params Pt = base;
            Pt.t = tt;
            if (auto rec = provider(Pt))
                curve.points.push_back(make_reduction_point(*rec, a));
            else
                curve.t_failed.push_back(tt);
        }
        const CurveSupremum sup = mu_supremum(curve, provider);
        bool ok = sup.mu > 0.0 && std::isfinite(sup.mu);

        const auto sols = solve_normalized(curve, 0.1 * sup.mu, provider);
        ok = ok && !sols.empty();
        double worst_mass = 0.0;
        for (const auto& s : sols) worst_mass = std::max(worst_mass, s.mass_res);
        ok = ok && worst_mass < 1e-5;

        const auto none = solve_normalized(curve, 2.0 * sup.mu, provider);
        ok = ok && none.empty();
        g.line(6, ok,
               "sup mu_t " + num(sup.mu) + " finite; " + std::to_string(sols.size()) +
                   " solutions at 10% of it (worst mass residual " + num(worst_mass) +
                   " < 1e-5); none at 200%");
    });

    // 7: large-coupling decay of the level and of the subcritical norm
    criterion(g, 7, [&] {
        bool ok = true;
        std::string msg;
        const SweepResult sw43 = run_sweep(4, 3.0, 1e3, 1e5, 9);
        const std::array<const SweepResult*, 2> sweeps{&sw25, &sw43};
        for (const SweepResult* sw : sweeps) {
            std::vector<double> ts, ms, vqs;
            for (const auto& s : sw->samples)
                if (s.below_bubble) {
                    ts.push_back(s.t);
                    ms.push_back(s.m);
                    vqs.push_back(s.vq);
                }
            ok = ok && ts.size() >= 6;
            const double em = loglog_slope(ts, ms), ev = loglog_slope(ts, vqs);
            const double wm = expected_m_exponent(sw->base);
            const double wv = expected_vq_exponent(sw->base);
            ok = ok && std::abs(em / wm - 1.0) < 0.15 && std::abs(ev / wv - 1.0) < 0.15;
            msg += "N=" + std::to_string(sw->base.N) + ",q=" + num(sw->base.q) + ": m " +
                   num(em) + " (want " + num(wm) + "), vq " + num(ev) + " (want " + num(wv) +
                   "); ";
        }
        g.line(7, ok, msg + "within 15%");
    });

    // 8: the partially confined family converges to the free soliton, sheds its
    // trap energy, and carries the predicted small-mass scaling
    criterion(g, 8, [&] {
        const double p = 4.0;
        Params Pf;
        Pf.N = 3;
        Pf.q = p;
        Pf.t = 1.0;
        Pf.lambda = 1.0;
        Pf.crit = false;
        std::optional<SolutionRecord> free_rec;
        for (auto& r : find_positive_solutions(Pf).records)
            if (r.branch == Branch::ground_state) free_rec = std::move(r);
        if (!free_rec) throw SolverError("no free soliton for p = 4");
        confined::SolveOptions so;
        so.free_profile = &free_rec->profile;

        const confined::Sweep big = confined::sweep(p, geom_grid(10.0, 1e3, 7), so);
        if (big.points.size() < 7) throw SolverError("confined sweep lost points");
        const auto& last = big.points.back(); // t = 1e3
        bool ok = last.h1_vs_free < 0.02 && last.pot_t2 < 1e-4;
        std::string msg = "h1 gap to the soliton " + num(last.h1_vs_free) +
                          " (< 2%), trap share " + num(last.pot_t2) + " (< 1e-4) at t=1e3; ";

        // multiplier against the normalized radius on the small-r end
        std::vector<double> rs, ls;
        for (auto it = big.points.rbegin(); it != big.points.rend() && rs.size() < 4; ++it)
            if (it->r_t > 0.0) {
                rs.push_back(it->r_t);
                ls.push_back(it->t);
            }
        const double slope = loglog_slope(rs, ls);
        ok = ok && std::abs(slope / -4.0 - 1.0) < 0.10;
        msg += "lambda(r) slope " + num(slope) + " (want -4); ";

        for (std::size_t i = 0; i < 3 && i < rs.size(); ++i) {
            const auto& pt = big.points[big.points.size() - 1 - i];
            ok = ok && pt.stat_res < 1e-3 && pt.d2_at_1 < 0.0;
        }
        msg += "fibering T'(1) < 1e-3 and T''(1) < 0 on the three smallest r; ";

        const confined::Sweep small = confined::sweep(p, geom_grid(0.02, 0.2, 7), so);
        if (small.points.size() < 6) throw SolverError("small-t confined sweep lost points");
        std::vector<double> ts, mss;
        for (const auto& pt : small.points) {
            ts.push_back(pt.t);
            mss.push_back(pt.mass);
        }
        const double me = loglog_slope(ts, mss);
        ok = ok && std::abs(me / 0.5 - 1.0) < 0.15;
        msg += "small-t mass exponent " + num(me) + " (want 0.5)";
        g.line(8, ok, msg);
    });

    // 9: every command's payload is byte-stable across repeated runs
    criterion(g, 9, [&] {
        const std::string cache = " --cache-dir " + (work / "cache").string();
        const std::vector<std::pair<std::string, std::string>> cmds = {
            {"ground-state", "ground-state --q 3 --t 30"},
            {"scan", "scan --q 3 --t 30"},
            {"sweep", "sweep --q 3 --t-min 10 --t-max 100 --points 5"},
            {"reduce", "reduce --q 2.5 --a 1 --t-min 10 --t-max 1000 --points 7"},
            {"confine", "confine --p 4 --t 5 --ns 128 --nz 256"},
            {"verify", "verify"},
        };
        bool ok = true;
        std::string msg;
        for (const auto& [name, args] : cmds) {
            const fs::path out = work / ("det_" + name);
            const std::string cmd = args + " --outdir " + out.string() + cache;
            const int c1 = run_cli(cmd);
            const auto p1 = payload(out);
            const int c2 = run_cli(cmd);
            const auto p2 = payload(out);
            const bool same = c1 == 0 && c2 == 0 && !p1.empty() && p1 == p2;
            ok = ok && same;
            msg += name + (same ? " ok (" : " DIFFERS (") + std::to_string(p1.size()) +
                   " files); ";
        }
        g.line(9, ok, msg);
    });

    fs::remove_all(work);
    std::printf("%s: %d criterion(s) failed\n", g.failed ? "FAIL" : "PASS", g.failed);
    return g.failed;
}
