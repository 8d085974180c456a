#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nls/params.hpp"

namespace nls {

// far-field model  u(r) ≈ A r^{-(N-1)/2} e^{-kappa r}  attached past the grid
struct TailModel {
    double A = 0.0;
    double kappa = 0.0;
    double r_start = 0.0;   // grid radius the model was matched at
    double fit_rms = 0.0;   // rms residual of the log-linear fit
    bool valid = false;

    double value(int N, double r) const {
        return A * std::pow(r, -0.5 * (N - 1)) * std::exp(-kappa * r);
    }
    double slope(int N, double r) const {
        return -value(N, r) * (kappa + 0.5 * (N - 1) / r);
    }
};

// full R^N integrals (angular factor included), grid part + tail part
struct QuadratureSums {
    double mass = 0.0;  // ∫ u²
    double grad = 0.0;  // ∫ |∇u|²
    double qnorm = 0.0; // ∫ u^q
    double crit = 0.0;  // ∫ u^{2*}
    bool tail_included = false;
};

// Radial solution candidate: dense (r, u, u') samples plus accumulated
// quadratures. Grids are strictly increasing; u' is the ODE state, not a
// finite difference.
struct RadialProfile {
    Params params;
    double d = 0.0; // shooting height u(0)
    std::vector<double> r, u, du;
    TailModel tail;
    QuadratureSums quad;

    bool empty() const { return r.empty(); }
    double r_end() const { return r.empty() ? 0.0 : r.back(); }

    // pointwise evaluation: Hermite on the grid, tail model beyond
    double value(double rr) const {
        if (empty()) return 0.0;
        if (rr <= r.front()) return u.front();
        if (rr >= r.back())
            return tail.valid ? tail.value(params.N, rr) : 0.0;
        auto it = std::upper_bound(r.begin(), r.end(), rr);
        const std::size_t i = it - r.begin() - 1;
        const double h = r[i + 1] - r[i], th = (rr - r[i]) / h;
        const double h00 = (2 * th - 3) * th * th + 1, h10 = ((th - 2) * th + 1) * th;
        const double h01 = (3 - 2 * th) * th * th, h11 = (th - 1) * th * th;
        return h00 * u[i] + h * h10 * du[i] + h01 * u[i + 1] + h * h11 * du[i + 1];
    }

    double sup_norm() const {
        // the grid may start past the centre (core-matched shots); u(0) = d
        double s = d;
        for (double v : u) s = std::max(s, v);
        return s;
    }
};

} // namespace nls
