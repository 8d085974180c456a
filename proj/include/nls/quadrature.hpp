#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

namespace nls::quad {

// 16-point Gauss-Legendre rule on [-1,1], positive half; nodes are symmetric.
struct GL16 {
    static constexpr int half = 8;
    static constexpr std::array<std::array<double, 2>, 8> xw = {{
        {9.50125098376374544e-02, 1.89450610455068585e-01},
        {2.81603550779258915e-01, 1.82603415044923612e-01},
        {4.58016777657227370e-01, 1.69156519395002619e-01},
        {6.17876244402643771e-01, 1.49595988816576764e-01},
        {7.55404408355002999e-01, 1.24628971255534030e-01},
        {8.65631202387831755e-01, 9.51585116824925914e-02},
        {9.44575023073232600e-01, 6.22535239386477063e-02},
        {9.89400934991649939e-01, 2.71524594117540374e-02},
    }};
};

template <class F>
double gauss16(F&& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (const auto& [x, w] : GL16::xw) s += w * (f(c - h * x) + f(c + h * x));
    return s * h;
}

// composite rule: n equal panels on [a,b]
template <class F>
double composite(F&& f, double a, double b, int n) {
    double s = 0.0;
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) s += gauss16(f, a + i * h, a + (i + 1) * h);
    return s;
}

// ∫_a^∞ f, for f decaying at least like r^{-2}: map r = a + s/(1-s), s in [0,1)
template <class F>
double to_infinity(F&& f, double a, int n = 64) {
    auto g = [&](double s) {
        const double d = 1.0 - s;
        return f(a + s / d) / (d * d);
    };
    return composite(g, 0.0, 1.0, n);
}

// ∫_a^∞ f for exponentially decaying f with rate kappa: fixed-width panels
// until the contribution is negligible
template <class F>
double exp_tail(F&& f, double a, double kappa, int panels = 80) {
    const double w = 1.0 / kappa;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += gauss16(f, a + i * w, a + (i + 1) * w);
    return s;
}

// trapezoid on sampled data (used as the independent cross-check of
// co-integrated quadrature)
inline double trapz(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i)
        s += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return s;
}

} // namespace nls::quad
