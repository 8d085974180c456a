#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "nls/params.hpp"

namespace nls::ode {

template <std::size_t D>
using State = std::array<double, D>;

template <std::size_t D>
struct Control {
    double rtol = 1e-8;
    std::array<double, D> atol{};          // per-component absolute tolerance
    std::array<bool, D> controlled{};      // include component in the error norm
    double h_init = 1e-4;
    double h_max = 1.0;
    long max_steps = 5'000'000;
};

// Cubic Hermite interpolant over one accepted step, O(h^4) locally.
template <std::size_t D>
struct StepInterp {
    double r0 = 0, h = 0;
    const State<D>*y0 = nullptr, *y1 = nullptr, *f0 = nullptr, *f1 = nullptr;

    State<D> at(double r) const {
        const double th = (r - r0) / h;
        const double h00 = (2 * th - 3) * th * th + 1, h10 = ((th - 2) * th + 1) * th;
        const double h01 = (3 - 2 * th) * th * th, h11 = (th - 1) * th * th;
        State<D> y;
        for (std::size_t i = 0; i < D; ++i)
            y[i] = h00 * (*y0)[i] + h * h10 * (*f0)[i] + h01 * (*y1)[i] + h * h11 * (*f1)[i];
        return y;
    }
};

enum class Action { Continue, Stop };

// Dormand-Prince 5(4) with FSAL. The observer runs after every accepted step
// and may stop the integration (event handling lives in the caller, which can
// refine the event location on the interpolant).
//
//   rhs(r, y) -> State<D>
//   observer(interp) -> Action
//
// Returns the final abscissa; y holds the state there. Throws SolverError on
// step-size underflow or step-count exhaustion.
template <std::size_t D, class RHS, class Obs>
double integrate(RHS&& rhs, double r, State<D>& y, double r_end,
                 const Control<D>& ctrl, Obs&& observer) {
    static constexpr double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
    static constexpr double a21 = 1. / 5;
    static constexpr double a31 = 3. / 40, a32 = 9. / 40;
    static constexpr double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
    static constexpr double a51 = 19372. / 6561, a52 = -25360. / 2187,
                            a53 = 64448. / 6561, a54 = -212. / 729;
    static constexpr double a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247,
                            a64 = 49. / 176, a65 = -5103. / 18656;
    static constexpr double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192,
                            b5 = -2187. / 6784, b6 = 11. / 84;
    static constexpr double e1 = 71. / 57600, e3 = -71. / 16695, e4 = 71. / 1920,
                            e5 = -17253. / 339200, e6 = 22. / 525, e7 = -1. / 40;

    int n_ctrl = 0;
    for (std::size_t i = 0; i < D; ++i) n_ctrl += ctrl.controlled[i];
    if (n_ctrl == 0) throw std::invalid_argument("ode: no controlled components");

    State<D> k1 = rhs(r, y), k2, k3, k4, k5, k6, k7, ynew, tmp;
    double h = std::min(ctrl.h_init, r_end - r);
    for (long step = 0; step < ctrl.max_steps; ++step) {
        if (r >= r_end) return r;
        h = std::min(h, r_end - r);
        // underflow means the increment is lost to rounding, whatever the scale
        if (!(r + h > r))
            throw SolverError("ode: step size underflow at r=" + std::to_string(r));

        for (std::size_t i = 0; i < D; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        k2 = rhs(r + c2 * h, tmp);
        for (std::size_t i = 0; i < D; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        k3 = rhs(r + c3 * h, tmp);
        for (std::size_t i = 0; i < D; ++i)
            tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        k4 = rhs(r + c4 * h, tmp);
        for (std::size_t i = 0; i < D; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        k5 = rhs(r + c5 * h, tmp);
        for (std::size_t i = 0; i < D; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        k6 = rhs(r + h, tmp);
        for (std::size_t i = 0; i < D; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        k7 = rhs(r + h, ynew);

        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < D; ++i) {
            if (!std::isfinite(ynew[i])) finite = false;
            if (!ctrl.controlled[i]) continue;
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                  e6 * k6[i] + e7 * k7[i]);
            const double sc = ctrl.atol[i] + ctrl.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / n_ctrl);

        if (!finite) err = 10.0; // force rejection; underflow guard aborts if hopeless
        if (err <= 1.0) {
            StepInterp<D> interp{r, h, &y, &ynew, &k1, &k7};
            const double r_new = r + h;
            const Action act = observer(interp);
            r = r_new;
            y = ynew;
            k1 = k7; // FSAL
            if (act == Action::Stop) return r;
            h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err + 1e-300, -0.2)));
            h = std::min(h, ctrl.h_max);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    throw SolverError("ode: max step count exceeded");
}

template <std::size_t D, class RHS>
double integrate(RHS&& rhs, double r, State<D>& y, double r_end, const Control<D>& ctrl) {
    return integrate<D>(static_cast<RHS&&>(rhs), r, y, r_end, ctrl,
                        [](const StepInterp<D>&) { return Action::Continue; });
}

} // namespace nls::ode
