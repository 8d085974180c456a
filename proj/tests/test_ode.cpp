#include <catch2/catch_amalgamated.hpp>

#include <nls/ode.hpp>
#include <nls/quadrature.hpp>

#include <cmath>
#include <vector>

using namespace nls;
using namespace nls::ode;

TEST_CASE("dp54 reproduces exponential decay", "[ode]") {
    State<1> y{1.0};
    Control<1> ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = {1e-12};
    ctrl.controlled = {true};
    integrate<1>([](double, const State<1>& s) { return State<1>{-s[0]}; },
                 0.0, y, 5.0, ctrl);
    CHECK(std::abs(y[0] - std::exp(-5.0)) < 1e-11);
}

TEST_CASE("dp54 round trip on the harmonic oscillator", "[ode]") {
    State<2> y{1.0, 0.0};
    Control<2> ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = {1e-12, 1e-12};
    ctrl.controlled = {true, true};
    const double T = 20.0 * M_PI;
    integrate<2>([](double, const State<2>& s) { return State<2>{s[1], -s[0]}; },
                 0.0, y, T, ctrl);
    CHECK(std::abs(y[0] - 1.0) < 1e-7);
    CHECK(std::abs(y[1]) < 1e-7);
}

TEST_CASE("uncontrolled components ride along without steering the step size", "[ode]") {
    // y0 drives the error control; y1 accumulates a quadrature.
    State<2> y{1.0, 0.0};
    Control<2> ctrl;
    ctrl.rtol = 1e-10;
    ctrl.atol = {1e-12, 1e-12};
    ctrl.controlled = {true, false};
    integrate<2>([](double r, const State<2>& s) { return State<2>{-s[0], std::cos(r)}; },
                 0.0, y, 3.0, ctrl);
    CHECK(std::abs(y[1] - std::sin(3.0)) < 1e-9);
}

TEST_CASE("dense interpolant is accurate inside accepted steps", "[ode]") {
    State<1> y{1.0};
    Control<1> ctrl;
    ctrl.rtol = 1e-9;
    ctrl.atol = {1e-11};
    ctrl.controlled = {true};
    double worst = 0.0;
    integrate<1>([](double, const State<1>& s) { return State<1>{-s[0]}; },
                 0.0, y, 4.0, ctrl,
                 [&](const StepInterp<1>& in) {
                     for (int k = 1; k <= 8; ++k) {
                         const double r = in.r0 + k * in.h / 9.0;
                         worst = std::max(worst, std::abs(in.at(r)[0] - std::exp(-r)));
                     }
                     return Action::Continue;
                 });
    // The interpolant is one order below the integrator, so it dominates here.
    CHECK(worst < 1e-7);
}

TEST_CASE("observer can stop the integration mid-stream", "[ode]") {
    State<1> y{0.0};
    Control<1> ctrl;
    ctrl.rtol = 1e-8;
    ctrl.atol = {1e-10};
    ctrl.controlled = {true};
    const double stopped_at =
        integrate<1>([](double, const State<1>&) { return State<1>{1.0}; },
                     0.0, y, 100.0, ctrl,
                     [](const StepInterp<1>& in) {
                         return in.r0 + in.h >= 7.0 ? Action::Stop : Action::Continue;
                     });
    CHECK(stopped_at >= 7.0);
    CHECK(stopped_at < 100.0);
}

TEST_CASE("step underflow near a blow-up raises SolverError", "[ode]") {
    State<1> y{1.0};
    Control<1> ctrl;
    ctrl.rtol = 1e-8;
    ctrl.atol = {1e-10};
    ctrl.controlled = {true};
    // y' = y^2 from y(0)=1 blows up at r=1.
    const auto rhs = [](double, const State<1>& s) { return State<1>{s[0] * s[0]}; };
    CHECK_THROWS_AS(integrate<1>(rhs, 0.0, y, 2.0, ctrl), SolverError);
}

TEST_CASE("gauss nodes integrate smooth functions to machine precision", "[quadrature]") {
    const double v = quad::gauss16([](double x) { return std::exp(x); }, 0.0, 1.0);
    CHECK(std::abs(v - (std::exp(1.0) - 1.0)) < 1e-15);
    const double p = quad::composite([](double x) { return std::sin(x); }, 0.0, M_PI, 8);
    CHECK(std::abs(p - 2.0) < 1e-14);
}

TEST_CASE("semi-infinite quadrature handles algebraic and exponential tails", "[quadrature]") {
    // int_0^inf r^4 / (1+r^2)^3 dr = 3 pi / 16
    const double a = quad::to_infinity([](double r) {
        const double s = 1.0 + r * r;
        return r * r * r * r / (s * s * s);
    }, 0.0, 96);
    CHECK(std::abs(a - 3.0 * M_PI / 16.0) < 1e-12);

    // int_2^inf e^{-3r} dr = e^{-6}/3
    const double b = quad::exp_tail([](double r) { return std::exp(-3.0 * r); }, 2.0, 3.0);
    CHECK(std::abs(b - std::exp(-6.0) / 3.0) < 1e-18);
}

TEST_CASE("trapezoid rule matches closed form on a dense grid", "[quadrature]") {
    std::vector<double> x, f;
    for (int i = 0; i <= 2000; ++i) {
        const double r = 2.0 * i / 2000.0;
        x.push_back(r);
        f.push_back(r * std::exp(-r));
    }
    const double exact = 1.0 - 3.0 * std::exp(-2.0);
    CHECK(std::abs(quad::trapz(x, f) - exact) < 1e-6);
}
