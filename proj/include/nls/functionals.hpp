#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>

#include "nls/params.hpp"
#include "nls/profile.hpp"
#include "nls/quadrature.hpp"

namespace nls {

// Variational certificate of a radial candidate: energy level plus the two
// integral identities every solution must satisfy (tested relative to ||∇v||²).
//   nehari:    ||∇v||² + λ||v||² - t||v||_q^q - ||v||_{2*}^{2*}
//   pohozaev:  ||∇v||² - γ_q t||v||_q^q - ||v||_{2*}^{2*}   (λ-free form)
struct Certificate {
    double energy = 0.0;
    double nehari_res = 0.0;
    double pohozaev_res = 0.0;
    double level_gap = 0.0; // energy - S^{N/2}/N
    QuadratureSums norms;

    double rel_nehari() const { return std::abs(nehari_res) / norms.grad; }
    double rel_pohozaev() const { return std::abs(pohozaev_res) / norms.grad; }
    bool accepted(double tol = 1e-5) const {
        return std::max(rel_nehari(), rel_pohozaev()) < tol;
    }
};

namespace detail {

// ∫_0^∞ of the closed-form bubble integrands, angular factor included
template <class F>
double bubble_integral(F&& f) {
    return quad::composite(f, 0.0, 1.0, 32) + quad::to_infinity(f, 1.0, 96);
}

} // namespace detail

// Aubin-Talenti instanton U_eps, the extremal of the Sobolev quotient:
// -ΔU = U^{2*-1}, U_eps(x) = [N(N-2)]^{(N-2)/4} (eps/(eps²+|x|²))^{(N-2)/2}
inline double aubin_talenti(int N, double eps, double r) {
    const double c = std::pow(N * (N - 2.0), 0.25 * (N - 2.0));
    return c * std::pow(eps / (eps * eps + r * r), 0.5 * (N - 2.0));
}

inline double aubin_talenti_slope(int N, double eps, double r) {
    const double c = std::pow(N * (N - 2.0), 0.25 * (N - 2.0));
    return c * std::pow(eps, 0.5 * (N - 2.0)) * (-(N - 2.0) * r) *
           std::pow(eps * eps + r * r, -0.5 * N);
}

// Best Sobolev constant by quadrature of the instanton: S^{N/2} = ||∇U_1||².
// Cached per dimension; the Γ-function closed form below is the cross-check.
inline double sobolev_constant(int N) {
    static std::map<int, double> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(N);
    if (it != cache.end()) return it->second;
    const double sig = sphere_area(N);
    auto integrand = [&](double r) {
        const double s = aubin_talenti_slope(N, 1.0, r);
        return sig * s * s * std::pow(r, N - 1.0);
    };
    const double SN2 = detail::bubble_integral(integrand);
    const double S = std::pow(SN2, 2.0 / N);
    cache[N] = S;
    return S;
}

// closed form via Beta integrals, used only to cross-check the quadrature
inline double sobolev_constant_reference(int N) {
    const double I = std::tgamma(0.5 * (N + 2)) * std::tgamma(0.5 * (N - 2)) /
                     (2.0 * std::tgamma((double)N));
    const double SN2 = sphere_area(N) * std::pow(N * (N - 2.0), 0.5 * (N - 2)) *
                       (N - 2.0) * (N - 2.0) * I;
    return std::pow(SN2, 2.0 / N);
}

// ground-state energy ceiling S^{N/2}/N
inline double bubble_level(int N) {
    return std::pow(sobolev_constant(N), 0.5 * N) / N;
}

// Analytic instanton as a RadialProfile (λ=0, t=0). Quadratures are complete
// closed-form integrals; mass is infinite for N ≤ 4.
inline RadialProfile bubble_profile(int N, double eps, double r_max = 50.0,
                                    int n_pts = 4000) {
    RadialProfile p;
    p.params = Params{N, 0.5 * (2.0 + 2.0 * N / (N - 2.0)), 0.0, 0.0, true};
    p.d = aubin_talenti(N, eps, 0.0);
    p.r.reserve(n_pts);
    for (int i = 0; i < n_pts; ++i) {
        const double rr = r_max * std::pow((i + 1.0) / n_pts, 2.0); // clustered near 0
        p.r.push_back(rr);
        p.u.push_back(aubin_talenti(N, eps, rr));
        p.du.push_back(aubin_talenti_slope(N, eps, rr));
    }
    const double sig = sphere_area(N);
    auto pw = [&](double r) { return std::pow(r, N - 1.0); };
    p.quad.grad = detail::bubble_integral([&](double r) {
        const double s = aubin_talenti_slope(N, eps, r);
        return sig * s * s * pw(r);
    });
    p.quad.crit = detail::bubble_integral([&](double r) {
        return sig * std::pow(aubin_talenti(N, eps, r), 2.0 * N / (N - 2.0)) * pw(r);
    });
    const double q = p.params.q;
    p.quad.qnorm = (q * (N - 2.0) > N)
                       ? detail::bubble_integral([&](double r) {
                             return sig * std::pow(aubin_talenti(N, eps, r), q) * pw(r);
                         })
                       : std::numeric_limits<double>::infinity();
    p.quad.mass = (N >= 5) ? detail::bubble_integral([&](double r) {
        const double u = aubin_talenti(N, eps, r);
        return sig * u * u * pw(r);
    })
                           : std::numeric_limits<double>::infinity();
    p.quad.tail_included = true;
    p.tail.valid = false; // polynomial far field, no exponential model
    return p;
}

// Energy and identity residuals of a complete profile.
inline Certificate energy(const RadialProfile& p) {
    if (!p.quad.tail_included)
        throw std::invalid_argument("energy: quadrature incomplete (tail missing)");
    const Params& P = p.params;
    P.validate();
    const double G = p.quad.grad, m = p.quad.mass, Q = p.quad.qnorm, C = p.quad.crit;
    const double crit_term = P.crit ? C : 0.0;
    Certificate c;
    c.norms = p.quad;
    // λ=0 drops the (possibly infinite) mass term
    const double mass_term = P.lambda > 0.0 ? P.lambda * m : 0.0;
    c.energy = 0.5 * (G + mass_term) - P.t / P.q * Q - (P.crit ? C / P.two_star() : 0.0);
    c.nehari_res = G + mass_term - P.t * Q - crit_term;
    c.pohozaev_res = G - P.gamma_q() * P.t * Q - crit_term;
    c.level_gap = c.energy - bubble_level(P.N);
    return c;
}

// Fibering map of the λ-frequency functional along s ↦ E(sv):
//   E(s) = s²/2 (||∇v||² + λ||v||²) - t s^q/q ||v||_q^q - s^{2*}/2* ||v||_{2*}^{2*}
struct Fibering {
    double E = 0.0, dE = 0.0, d2E = 0.0;
};

inline Fibering fibering(const RadialProfile& p, double s) {
    const Params& P = p.params;
    const double A = p.quad.grad + (P.lambda > 0.0 ? P.lambda * p.quad.mass : 0.0);
    const double Q = p.quad.qnorm, C = P.crit ? p.quad.crit : 0.0;
    const double ts = P.two_star();
    Fibering f;
    f.E = 0.5 * s * s * A - P.t / P.q * std::pow(s, P.q) * Q - std::pow(s, ts) / ts * C;
    f.dE = s * A - P.t * std::pow(s, P.q - 1) * Q - std::pow(s, ts - 1) * C;
    f.d2E = A - P.t * (P.q - 1) * std::pow(s, P.q - 2) * Q - (ts - 1) * std::pow(s, ts - 2) * C;
    return f;
}

// Unique maximiser of the fibering map. g(s) = A - t s^{q-2} Q - s^{2*-2} C is
// strictly decreasing, so the zero of E' is simple; log-bisection then Newton.
inline double fibering_max(const RadialProfile& p) {
    const Params& P = p.params;
    const double A = p.quad.grad + (P.lambda > 0.0 ? P.lambda * p.quad.mass : 0.0);
    const double Q = p.quad.qnorm, C = P.crit ? p.quad.crit : 0.0;
    if (!(A > 0.0) || (P.t * Q <= 0.0 && C <= 0.0))
        throw std::invalid_argument("fibering_max: degenerate profile");
    auto g = [&](double s) {
        return A - P.t * std::pow(s, P.q - 2) * Q - (C > 0 ? std::pow(s, P.two_star() - 2) * C : 0.0);
    };
    double lo = 1.0, hi = 1.0;
    while (g(lo) < 0.0) lo *= 0.5;
    while (g(hi) > 0.0) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace nls
