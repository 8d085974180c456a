#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nls/functionals.hpp"
#include "nls/parallel.hpp"
#include "nls/shooting.hpp"

namespace nls {

// Coupling sweeps of the fixed-frequency family: the ground-state level m(t),
// its norms, the onset threshold where m drops below the bubble level, and
// least-squares fits of the predicted growth and decay exponents.

inline std::vector<double> geom_grid(double lo, double hi, int n) {
    if (!(0.0 < lo && lo < hi) || n < 2) throw std::invalid_argument("geom_grid: bad range");
    std::vector<double> g(n);
    const double lr = std::log(hi / lo);
    for (int i = 0; i < n; ++i) g[i] = lo * std::exp(lr * i / (n - 1.0));
    return g;
}

struct SweepSample {
    double t = 0.0;
    double m = 0.0;          // least certified energy; bubble level when none below it
    bool below_bubble = false;
    int n_solutions = 0;
    double vq = 0.0;         // ||v_t||_q^q of the ground state
    double sup1 = 0.0;       // sup norm of the ground state
    double sup2 = 0.0;       // sup norm of the highest branch (0 when absent)
    double energy2 = 0.0;    // its energy
    double d_ground = 0.0;
};

struct SweepViolation {
    std::string what;
    double t = 0.0;
    double amount = 0.0;
};

struct ThresholdBracket {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool found() const { return std::isfinite(hi); }
};

struct SweepResult {
    Params base;
    std::vector<SweepSample> samples;     // ascending t
    std::vector<std::string> failures;    // per-point solver failures, skipped
    ThresholdBracket t_star;
    std::vector<SweepViolation> violations;
};

// The detector margin: the level must drop strictly below the bubble by a few
// certificate widths before we call the ground state real.
inline double sub_bubble_margin(double ctol) { return 3.0 * ctol; }

// Invariant audit, separated from the sweep so synthetic data can exercise
// it: m nonincreasing, m at or below the bubble level, and m t^{N/(q gamma_q)}
// nondecreasing where the ground state exists.
inline void check_sweep_invariants(SweepResult& sw, double ctol = 1e-5) {
    const double lvl = bubble_level(sw.base.N);
    const double k = sw.base.N / (sw.base.q * sw.base.gamma_q());
    const SweepSample* prev = nullptr;
    for (const auto& s : sw.samples) {
        if (s.m > lvl * (1.0 + 10.0 * ctol))
            sw.violations.push_back({"m above bubble level", s.t, (s.m - lvl) / lvl});
        if (prev && s.m > prev->m * (1.0 + 10.0 * ctol))
            sw.violations.push_back({"m increased", s.t, (s.m - prev->m) / prev->m});
        if (prev && prev->below_bubble && s.below_bubble) {
            const double p0 = prev->m * std::pow(prev->t, k);
            const double p1 = s.m * std::pow(s.t, k);
            if (p1 < p0 * (1.0 - 0.02))
                sw.violations.push_back({"m t^{N/(q gamma_q)} decreased", s.t, (p0 - p1) / p0});
        }
        prev = &s;
    }
}

inline SweepResult sweep(const Params& base, const std::vector<double>& t_grid,
                         const ScanOptions& scan = {}, int workers = 1) {
    base.validate();
    SweepResult sw;
    sw.base = base;
    const double lvl = bubble_level(base.N);
    const double margin = sub_bubble_margin(scan.ground.ctol);

    struct PointResult {
        SweepSample s;
        std::string error; // nonempty when the point failed
        bool ok = false;
    };
    auto results = par::map<PointResult>(t_grid.size(), workers, [&](std::size_t i) {
        PointResult pr;
        Params P = base;
        P.t = t_grid[i];
        pr.s.t = P.t;
        try {
            auto res = find_positive_solutions(P, scan);
            pr.s.n_solutions = (int)res.records.size();
            const SolutionRecord* ground = nullptr;
            for (const auto& r : res.records)
                if (r.branch == Branch::ground_state) ground = &r;
            if (ground && ground->cert.energy < lvl - margin) {
                pr.s.below_bubble = true;
                pr.s.m = ground->cert.energy;
                pr.s.vq = ground->profile.quad.qnorm;
                pr.s.sup1 = ground->profile.sup_norm();
                pr.s.d_ground = ground->d;
            } else {
                pr.s.m = lvl;
            }
            if (res.records.size() >= 2) {
                const auto& top = res.records.back();
                pr.s.sup2 = top.profile.sup_norm();
                pr.s.energy2 = top.cert.energy;
            }
            pr.ok = true;
        } catch (const std::exception& e) {
            pr.error = "t=" + std::to_string(P.t) + ": " + e.what();
        }
        return pr;
    });
    for (auto& pr : results) {
        if (pr.ok)
            sw.samples.push_back(pr.s);
        else
            sw.failures.push_back(pr.error);
    }

    // threshold bracket: last marker before the first sub-bubble sample
    for (const auto& s : sw.samples) {
        if (s.below_bubble) {
            sw.t_star.hi = s.t;
            break;
        }
        sw.t_star.lo = s.t;
    }
    if (!sw.samples.empty() && sw.samples.front().below_bubble) sw.t_star.lo = 0.0;

    check_sweep_invariants(sw, scan.ground.ctol);
    return sw;
}

// Tighten the onset bracket by bisecting the sub-bubble detector.
inline ThresholdBracket refine_t_star(const Params& base, ThresholdBracket br, int iters,
                                      const ScanOptions& scan = {}) {
    if (!br.found() || !(br.lo > 0.0)) return br;
    const double lvl = bubble_level(base.N);
    const double margin = sub_bubble_margin(scan.ground.ctol);
    for (int i = 0; i < iters; ++i) {
        const double mid = std::sqrt(br.lo * br.hi);
        Params P = base;
        P.t = mid;
        bool below = false;
        auto res = find_positive_solutions(P, scan);
        for (const auto& r : res.records)
            if (r.branch == Branch::ground_state && r.cert.energy < lvl - margin) below = true;
        (below ? br.hi : br.lo) = mid;
    }
    return br;
}

// Ordinary least squares of log y against log t on a window.
struct ExponentFit {
    double exponent = 0.0;
    double stderr_ = 0.0;
    int n = 0;
    double t_lo = 0.0, t_hi = 0.0;
};

inline ExponentFit fit_exponent(const std::vector<double>& t, const std::vector<double>& y,
                                double t_lo, double t_hi) {
    if (t.size() != y.size()) throw std::invalid_argument("fit_exponent: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(y[i] > 0.0)) throw std::invalid_argument("fit_exponent: nonpositive sample in window");
        xs.push_back(std::log(t[i]));
        ys.push_back(std::log(y[i]));
    }
    const int n = (int)xs.size();
    if (n < 6) throw std::invalid_argument("fit_exponent: need at least 6 samples in window");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) mx += xs[i], my += ys[i];
    mx /= n, my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    ExponentFit f;
    f.exponent = sxy / sxx;
    double rss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = ys[i] - my - f.exponent * (xs[i] - mx);
        rss += r * r;
    }
    f.stderr_ = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
    f.n = n;
    f.t_lo = t_lo;
    f.t_hi = t_hi;
    return f;
}

// The q=3 branch grows like t log t, not a pure power: fit y = t (a + b log t)
// and report the residual alongside, to compare against the power model.
struct LogLinearFit {
    double a = 0.0, b = 0.0;
    double rms_rel = 0.0; // rms of (y - fit)/y over the window
    int n = 0;
};

inline LogLinearFit fit_t_log_t(const std::vector<double>& t, const std::vector<double>& y,
                                double t_lo, double t_hi) {
    if (t.size() != y.size()) throw std::invalid_argument("fit_t_log_t: size mismatch");
    std::vector<double> xs, zs, ts;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(y[i] > 0.0)) throw std::invalid_argument("fit_t_log_t: nonpositive sample");
        xs.push_back(std::log(t[i]));
        zs.push_back(y[i] / t[i]);
        ts.push_back(t[i]);
    }
    const int n = (int)xs.size();
    if (n < 6) throw std::invalid_argument("fit_t_log_t: need at least 6 samples in window");
    double mx = 0, mz = 0;
    for (int i = 0; i < n; ++i) mx += xs[i], mz += zs[i];
    mx /= n, mz /= n;
    double sxx = 0, sxz = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxz += (xs[i] - mx) * (zs[i] - mz);
    }
    LogLinearFit f;
    f.b = sxz / sxx;
    f.a = mz - f.b * mx;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        const double fit = ts[i] * (f.a + f.b * xs[i]);
        const double rel = (ts[i] * zs[i] - fit) / (ts[i] * zs[i]);
        ss += rel * rel;
    }
    f.rms_rel = std::sqrt(ss / n);
    f.n = n;
    return f;
}

// Relative rms of a pure power fit on the same window, for model comparison.
inline double power_fit_rms(const std::vector<double>& t, const std::vector<double>& y,
                            double t_lo, double t_hi) {
    auto f = fit_exponent(t, y, t_lo, t_hi);
    double lc = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        lc += std::log(y[i]) - f.exponent * std::log(t[i]);
        ++n;
    }
    lc /= n;
    double ss = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        const double fit = std::exp(lc + f.exponent * std::log(t[i]));
        const double rel = (y[i] - fit) / y[i];
        ss += rel * rel;
    }
    return std::sqrt(ss / n);
}

// Max relative violation of m'(t) = -||v_t||_q^q / q over interior nodes,
// using the nonuniform three-point stencil (exact on quadratics).
inline double derivative_identity_check(const SweepResult& sw) {
    double worst = 0.0;
    const auto& s = sw.samples;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (!(s[i - 1].below_bubble && s[i].below_bubble && s[i + 1].below_bubble)) continue;
        const double hm = s[i].t - s[i - 1].t, hp = s[i + 1].t - s[i].t;
        const double dm = -hp / (hm * (hm + hp)) * s[i - 1].m +
                          (hp - hm) / (hm * hp) * s[i].m +
                          hm / (hp * (hm + hp)) * s[i + 1].m;
        const double rhs = -s[i].vq / sw.base.q;
        if (rhs == 0.0) continue;
        worst = std::max(worst, std::abs(dm - rhs) / std::abs(rhs));
    }
    return worst;
}

// Behaviour of ||v_t||_q^q as t approaches the onset from above: bounded
// ratio over two decades of t - t*. Only meaningful for 2 < q <= 4 in
// dimension 3, where the onset is positive.
struct NormReport {
    bool applicable = false;
    double t_star = 0.0;
    double vq_min = 0.0, vq_max = 0.0;
    double ratio = 0.0;
    bool bounded = false;
    std::vector<std::pair<double, double>> samples; // (t - t*, vq)
};

template <class VqFn>
NormReport near_threshold_norms(const Params& base, double t_star, VqFn&& vq_at,
                                double delta_lo = 1e-2, double delta_hi = 1.0,
                                int n = 9) {
    NormReport rep;
    if (base.N == 3 && base.q > 4.0) return rep; // onset barrier absent in this regime
    rep.applicable = true;
    rep.t_star = t_star;
    rep.vq_min = std::numeric_limits<double>::infinity();
    const double lr = std::log(delta_hi / delta_lo);
    for (int i = 0; i < n; ++i) {
        const double delta = delta_lo * std::exp(lr * i / (n - 1.0));
        const double vq = vq_at(t_star * (1.0 + delta));
        rep.samples.push_back({t_star * delta, vq});
        rep.vq_min = std::min(rep.vq_min, vq);
        rep.vq_max = std::max(rep.vq_max, vq);
    }
    rep.ratio = rep.vq_max / rep.vq_min;
    rep.bounded = rep.ratio <= 10.0;
    return rep;
}

// Expected asymptotic exponents; measured fits are compared against these.
inline double expected_m_exponent(const Params& P) { return -P.N / (P.q * P.gamma_q()); }
inline double expected_vq_exponent(const Params& P) { return expected_m_exponent(P) - 1.0; }
inline double expected_sup1_exponent(const Params& P) { return -1.0 / (P.q - 2.0); }
// Branch-2 growth; q=3 is the t log t case and has no pure power.
inline double expected_sup2_exponent(const Params& P) {
    if (P.N != 3) throw std::invalid_argument("expected_sup2_exponent: stated for N=3");
    if (P.q > 3.0 && P.q < 4.0) return 1.0 / (4.0 - P.q);
    if (P.q > 2.0 && P.q < 3.0) return 1.0 / (P.q - 2.0);
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace nls
