#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nls/functionals.hpp"
#include "nls/profile.hpp"
#include "nls/shooting.hpp"

namespace nls {

// Scaling dictionary between the fixed-frequency family
//   -Δv + v = t |v|^{q-2}v + |v|^{2*-2}v
// and the mass-constrained family
//   -Δu + λu = μ |u|^{q-2}u + |u|^{2*-2}u,  ||u||_2^2 = a^2,
// via u(x) = λ^{(N-2)/4} v(λ^{1/2} x) and t = μ λ^{β/2}. The exponent
// β = (Nq - 2N - 2q)/2 is negative on the subcritical range and degenerates
// at both ends, where the dictionary loses meaning.

inline double beta_exponent(int N, double q) { return 0.5 * (N * q - 2.0 * N - 2.0 * q); }

inline void require_nondegenerate(const Params& P) {
    P.validate();
    if (P.q - 2.0 < 1e-3 || P.two_star() - P.q < 1e-3)
        throw std::domain_error("reduction: q too close to 2 or 2N/(N-2)");
}

// μ such that the fixed-frequency solution v_t with ||v_t||_q^q = vq generates
// a normalized solution of mass a^2. Closed form from the Pohozaev mass
// identity λ a^2 = (1-γ_q) μ ||u||_q^q combined with the scaling of t.
inline double mu_of_t(double t, double vq, double a, const Params& P) {
    require_nondegenerate(P);
    if (!(t > 0.0 && vq > 0.0 && a > 0.0))
        throw std::invalid_argument("mu_of_t: need t, vq, a > 0");
    const double b = beta_exponent(P.N, P.q);
    return std::pow(a, b) * std::pow((1.0 - P.gamma_q()) * vq, -0.5 * b) *
           std::pow(t, 0.5 * (2.0 - b));
}

// Frequency recovered from the coupling pair, λ_μ = (t/μ)^{2/β}.
inline double lambda_of(double t, double mu, const Params& P) {
    require_nondegenerate(P);
    if (!(t > 0.0 && mu > 0.0)) throw std::invalid_argument("lambda_of: need t, mu > 0");
    return std::pow(t / mu, 2.0 / beta_exponent(P.N, P.q));
}

// Scalar reduction residual; zero exactly when (t, μ) lies on the curve.
inline double reduction_residual(double t, double mu, double vq, double a, const Params& P) {
    require_nondegenerate(P);
    const double b = beta_exponent(P.N, P.q);
    const double lead = std::pow(t, (2.0 - b) / b);
    return (lead - (1.0 - P.gamma_q()) * std::pow(a, -2.0) * std::pow(mu, 2.0 / b) * vq) / lead;
}

namespace detail {

// Rescale grid, slopes, tail and quadratures of a profile under
// x -> s x, u -> c u (radial form). Tail amplitude follows from
// c (r/s)^{-(N-1)/2} e^{-kappa r / s}.
inline RadialProfile scaled_profile(const RadialProfile& p, double s, double c) {
    RadialProfile out = p;
    out.d = c * p.d;
    for (auto& r : out.r) r *= s;
    for (std::size_t i = 0; i < out.u.size(); ++i) {
        out.u[i] *= c;
        out.du[i] *= c / s;
    }
    if (p.tail.valid) {
        out.tail.kappa = p.tail.kappa / s;
        out.tail.r_start = p.tail.r_start * s;
        out.tail.A = c * p.tail.A * std::pow(s, 0.5 * (p.params.N - 1));
    }
    const double sN = std::pow(s, (double)p.params.N);
    out.quad.mass = c * c * sN * p.quad.mass;
    out.quad.grad = c * c * sN / (s * s) * p.quad.grad;
    out.quad.qnorm = std::pow(c, p.params.q) * sN * p.quad.qnorm;
    out.quad.crit = std::pow(c, p.params.two_star()) * sN * p.quad.crit;
    return out;
}

} // namespace detail

// v(x) = λ^{-(N-2)/4} u(x/√λ): fixed-frequency profile of a normalized
// solution. Reads μ and λ from the profile's own parameters.
inline RadialProfile to_unit_frequency(const RadialProfile& u) {
    require_nondegenerate(u.params);
    const double lam = u.params.lambda;
    if (!(lam > 0.0)) throw std::invalid_argument("to_unit_frequency: need lambda > 0");
    const double mu = u.params.t;
    RadialProfile v = detail::scaled_profile(u, std::sqrt(lam),
                                             std::pow(lam, -0.25 * (u.params.N - 2)));
    v.params.lambda = 1.0;
    v.params.t = mu * std::pow(lam, 0.5 * beta_exponent(u.params.N, u.params.q));
    return v;
}

// u(x) = λ^{(N-2)/4} v(√λ x) with λ = (t/μ)^{2/β}: normalized-side profile
// generated by a fixed-frequency solution at coupling μ.
inline RadialProfile from_unit_frequency(const RadialProfile& v, double mu) {
    require_nondegenerate(v.params);
    if (std::abs(v.params.lambda - 1.0) > 1e-12)
        throw std::invalid_argument("from_unit_frequency: profile is not at unit frequency");
    const double lam = lambda_of(v.params.t, mu, v.params);
    RadialProfile u = detail::scaled_profile(v, 1.0 / std::sqrt(lam),
                                             std::pow(lam, 0.25 * (v.params.N - 2)));
    u.params.lambda = lam;
    u.params.t = mu;
    return u;
}

// w = t^{1/(q-2)} v turns the subcritical coefficient into 1 and shrinks the
// critical one to t^{-(2*-2)/(q-2)}; the natural frame for blow-up branches.
struct UnitScaled {
    RadialProfile w;
    double crit_coeff = 1.0;
    double nehari_res = 0.0, pohozaev_res = 0.0; // residuals of the w-equation
};

inline UnitScaled rescale_unit_coefficient(const RadialProfile& v) {
    require_nondegenerate(v.params);
    const Params& P = v.params;
    const double t = P.t;
    if (!(t > 0.0)) throw std::invalid_argument("rescale_unit_coefficient: need t > 0");
    const double s = std::pow(t, 1.0 / (P.q - 2.0));
    UnitScaled out;
    out.w = detail::scaled_profile(v, 1.0, s);
    out.w.params.t = 1.0;
    out.crit_coeff = std::pow(t, -(P.two_star() - 2.0) / (P.q - 2.0));
    const auto& n = out.w.quad;
    const double lam_m = P.lambda > 0.0 ? P.lambda * n.mass : 0.0;
    const double C = P.crit ? out.crit_coeff * n.crit : 0.0;
    out.nehari_res = n.grad + lam_m - n.qnorm - C;
    out.pohozaev_res = n.grad - P.gamma_q() * n.qnorm - C;
    return out;
}

// One sample of the μ_t curve: the fixed-frequency ground state at coupling t
// and the normalized data it generates at mass a^2.
struct ReductionPoint {
    double t = 0.0;
    double mu = 0.0;
    double lambda = 0.0; // recovered frequency
    double a = 1.0;
    double vq = 0.0;     // ||v_t||_q^q
    double F = 0.0;      // reduction residual at (t, μ_t); ~0 by construction
    double energy = 0.0; // fixed-frequency level m(t)
    double d = 0.0;      // shooting height of v_t
};

// Ground-state solver injected into curve building; returns nothing when the
// coupling admits no certified decaying solution.
using GroundProvider = std::function<std::optional<SolutionRecord>(const Params&)>;

inline GroundProvider default_ground_provider(ScanOptions opts = {}) {
    return [opts](const Params& P) -> std::optional<SolutionRecord> {
        auto res = find_positive_solutions(P, opts);
        for (auto& rec : res.records)
            if (rec.branch == Branch::ground_state) return std::move(rec);
        return std::nullopt;
    };
}

struct ReductionCurve {
    Params base;                       // λ=1 family; the t field is ignored
    double a = 1.0;
    std::vector<ReductionPoint> points; // ascending in t, existing solutions only
    std::vector<double> t_failed;       // samples with no certified solution
};

inline ReductionPoint make_reduction_point(const SolutionRecord& rec, double a) {
    const Params& P = rec.profile.params;
    ReductionPoint pt;
    pt.t = P.t;
    pt.a = a;
    pt.vq = rec.profile.quad.qnorm;
    pt.mu = mu_of_t(pt.t, pt.vq, a, P);
    pt.lambda = lambda_of(pt.t, pt.mu, P);
    pt.F = reduction_residual(pt.t, pt.mu, pt.vq, a, P);
    pt.energy = rec.cert.energy;
    pt.d = rec.d;
    return pt;
}

inline ReductionCurve build_reduction_curve(const Params& base, double a, double t_lo,
                                            double t_hi, int n,
                                            const GroundProvider& provider) {
    require_nondegenerate(base);
    if (!(0.0 < t_lo && t_lo < t_hi) || n < 2)
        throw std::invalid_argument("build_reduction_curve: bad t range");
    if (!(a > 0.0)) throw std::invalid_argument("build_reduction_curve: need a > 0");
    ReductionCurve curve;
    curve.base = base;
    curve.a = a;
    const double lr = std::log(t_hi / t_lo);
    for (int i = 0; i < n; ++i) {
        Params P = base;
        P.lambda = 1.0;
        P.t = t_lo * std::exp(lr * i / (n - 1.0));
        if (auto rec = provider(P))
            curve.points.push_back(make_reduction_point(*rec, a));
        else
            curve.t_failed.push_back(P.t);
    }
    return curve;
}

namespace detail {

// Bracketed roots of mu(t) = target on a sampled curve, refined with fresh
// evaluations (never interpolation: vq errors would leak into λ through a
// large power). mu_fresh must be the same map that produced the samples.
inline std::vector<double> find_curve_roots(const std::vector<double>& t,
                                            const std::vector<double>& mu, double target,
                                            const std::function<double(double)>& mu_fresh,
                                            double rel_tol = 1e-10) {
    if (t.size() != mu.size()) throw std::invalid_argument("find_curve_roots: size mismatch");
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double g0 = mu[i] - target, g1 = mu[i + 1] - target;
        if (g0 == 0.0) roots.push_back(t[i]);
        if (!(g0 * g1 < 0.0)) continue;
        double lo = t[i], hi = t[i + 1];
        double glo = g0;
        for (int it = 0; it < 200 && (hi - lo) > rel_tol * hi; ++it) {
            const double mid = std::sqrt(lo * hi);
            const double gm = mu_fresh(mid) - target;
            if (gm == 0.0) {
                lo = hi = mid;
                break;
            }
            if (gm * glo < 0.0)
                hi = mid;
            else {
                lo = mid;
                glo = gm;
            }
        }
        roots.push_back(0.5 * (lo + hi));
    }
    if (mu.size() && mu.back() == target) roots.push_back(t.back());
    // refinements from neighbouring brackets can meet at a sample point
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double x, double y) { return std::abs(x - y) < 1e-9 * y; }),
                roots.end());
    return roots;
}

} // namespace detail

// A normalized solution recovered from the curve: the back-transformed
// profile, its multiplier, and the certificates of both frames.
struct NormalizedSolution {
    RadialProfile u;       // params carry (μ, λ_μ)
    double t = 0.0;        // generating fixed-frequency coupling
    double mu = 0.0;
    double lambda = 0.0;
    double a = 1.0;
    double action = 0.0;   // 𝒜_μ(u) = ℰ(u) - λ a²/2
    double mass_res = 0.0; // | ||u||² - a² | / a²
    Certificate cert;      // residuals of the (μ, λ_μ) equation
};

inline NormalizedSolution back_transform(const SolutionRecord& rec, double a) {
    const Params& P = rec.profile.params;
    NormalizedSolution out;
    out.t = P.t;
    out.a = a;
    out.mu = mu_of_t(P.t, rec.profile.quad.qnorm, a, P);
    out.lambda = lambda_of(P.t, out.mu, P);
    out.u = from_unit_frequency(rec.profile, out.mu);
    out.cert = energy(out.u);
    out.action = out.cert.energy - 0.5 * out.lambda * a * a;
    out.mass_res = std::abs(out.u.quad.mass - a * a) / (a * a);
    return out;
}

// All normalized solutions at coupling μ and mass a^2 that the sampled curve
// reaches: bracket μ_t = μ, refine each bracket with fresh ground-state
// solves, back-transform. Empty when μ exceeds the curve supremum.
inline std::vector<NormalizedSolution> solve_normalized(const ReductionCurve& curve, double mu,
                                                        const GroundProvider& provider) {
    require_nondegenerate(curve.base);
    if (!(mu > 0.0)) throw std::invalid_argument("solve_normalized: need mu > 0");
    std::vector<double> ts, mus;
    for (const auto& pt : curve.points) {
        ts.push_back(pt.t);
        mus.push_back(pt.mu);
    }
    auto solve_at = [&](double t) -> std::optional<SolutionRecord> {
        Params P = curve.base;
        P.lambda = 1.0;
        P.t = t;
        return provider(P);
    };
    auto mu_fresh = [&](double t) {
        auto rec = solve_at(t);
        if (!rec)
            throw SolverError("solve_normalized: curve too coarse, no solution at t=" +
                              std::to_string(t));
        return mu_of_t(t, rec->profile.quad.qnorm, curve.a, rec->profile.params);
    };
    std::vector<NormalizedSolution> out;
    for (double t_root : detail::find_curve_roots(ts, mus, mu, mu_fresh)) {
        auto rec = solve_at(t_root);
        if (!rec) continue;
        NormalizedSolution sol = back_transform(*rec, curve.a);
        // land exactly on the requested coupling: μ(t_root) differs from μ by
        // the root tolerance, so rebuild the transform at the requested μ
        sol.mu = mu;
        sol.lambda = lambda_of(sol.t, mu, rec->profile.params);
        sol.u = from_unit_frequency(rec->profile, mu);
        sol.cert = energy(sol.u);
        sol.action = sol.cert.energy - 0.5 * sol.lambda * curve.a * curve.a;
        sol.mass_res = std::abs(sol.u.quad.mass - curve.a * curve.a) / (curve.a * curve.a);
        out.push_back(std::move(sol));
    }
    return out;
}

// Supremum of the sampled μ_t curve with a parabolic refinement in log t and
// an error bar from the refinement step.
struct CurveSupremum {
    double mu = 0.0, t = 0.0, err = 0.0;
};

inline CurveSupremum mu_supremum(const ReductionCurve& curve,
                                 const GroundProvider& provider) {
    if (curve.points.empty()) throw std::invalid_argument("mu_supremum: empty curve");
    std::size_t k = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i)
        if (curve.points[i].mu > curve.points[k].mu) k = i;
    CurveSupremum s{curve.points[k].mu, curve.points[k].t, 0.0};
    if (k == 0 || k + 1 == curve.points.size()) {
        // supremum at the boundary of the sampled window; flag with a large bar
        s.err = s.mu;
        return s;
    }
    const double x0 = std::log(curve.points[k - 1].t), y0 = curve.points[k - 1].mu;
    const double x1 = std::log(curve.points[k].t), y1 = curve.points[k].mu;
    const double x2 = std::log(curve.points[k + 1].t), y2 = curve.points[k + 1].mu;
    const double d1 = (y1 - y0) / (x1 - x0), d2 = (y2 - y1) / (x2 - x1);
    const double curv = (d2 - d1) / (0.5 * (x2 - x0));
    if (curv < 0.0) {
        const double xv = 0.5 * (x0 + x1) - d1 / curv;
        const double tv = std::exp(std::min(std::max(xv, x0), x2));
        Params P = curve.base;
        P.lambda = 1.0;
        P.t = tv;
        if (auto rec = provider(P)) {
            const double mv = mu_of_t(tv, rec->profile.quad.qnorm, curve.a, P);
            if (mv > s.mu) s = {mv, tv, 0.0};
            s.err = std::abs(mv - curve.points[k].mu);
            return s;
        }
    }
    s.err = std::max(std::abs(y1 - y0), std::abs(y2 - y1));
    return s;
}

} // namespace nls
