#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace nls {

// Solver failures that callers are expected to handle (bad bracket, tail not
// asymptotic, non-convergence, ...). Precondition violations throw
// std::invalid_argument instead.
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Parameters of  -Δu + λu = t|u|^{q-2}u + |u|^{2*-2}u  on R^N, radial.
// crit toggles the critical term (off reduces to the pure subcritical model).
struct Params {
    int N = 3;
    double q = 3.0;
    double t = 1.0;
    double lambda = 1.0;
    bool crit = true;

    double two_star() const { return 2.0 * N / (N - 2.0); }
    // L²-scaling exponent of the q-term, in (0,1) for 2 < q < 2*
    double gamma_q() const { return N * (q - 2.0) / (2.0 * q); }

    void validate() const {
        if (N < 3) throw std::invalid_argument("params: need N >= 3");
        if (!(q > 2.0) || !(q < two_star()))
            throw std::invalid_argument("params: need 2 < q < 2N/(N-2)");
        if (t < 0.0) throw std::invalid_argument("params: need t >= 0");
        if (lambda < 0.0) throw std::invalid_argument("params: need lambda >= 0");
    }
};

// surface measure of the unit sphere S^{N-1}
inline double sphere_area(int N) {
    return 2.0 * std::pow(M_PI, 0.5 * N) / std::tgamma(0.5 * N);
}

// mass-scaling exponent of the p-term in the N=3 confined problem
inline double gamma_p3(double p) { return 3.0 * (p - 2.0) / (2.0 * p); }

} // namespace nls
