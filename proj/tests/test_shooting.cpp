#include <catch2/catch_amalgamated.hpp>

#include <nls/functionals.hpp>
#include <nls/shooting.hpp>

#include <support/oracles.hpp>

#include <cmath>

using namespace nls;

namespace {

Params soliton_params() {
    Params p;
    p.N = 3;
    p.q = 4.0;
    p.t = 1.0;
    p.lambda = 1.0;
    p.crit = false;
    return p;
}

} // namespace

TEST_CASE("trajectory classification matches an independent integrator", "[shooting]") {
    const Params p = soliton_params();
    ShotOptions o;

    // Heights below the threshold overshoot the equilibrium and turn back up;
    // heights above it cross zero. Both verified against fixed-step RK4.
    CHECK(integrate_radial(p, 0.1, o).outcome == Outcome::blows_up);
    CHECK(integrate_radial(p, 10.0, o).outcome == Outcome::crosses_zero);

    oracle::RadialOde ode{p.N, p.q, p.t, p.lambda, p.crit};
    CHECK(oracle::classify_rk4(ode, 0.1, 30.0, 2e-4) == -1);
    CHECK(oracle::classify_rk4(ode, 10.0, 30.0, 2e-4) == +1);
}

TEST_CASE("equilibrium height solves the algebraic balance", "[shooting]") {
    Params p = soliton_params();
    CHECK(std::abs(equilibrium_height(p) - 1.0) < 1e-12);

    p.crit = true; // u^2 + u^4 = 1 at the equilibrium
    const double golden = std::sqrt((std::sqrt(5.0) - 1.0) / 2.0);
    CHECK(std::abs(equilibrium_height(p) - golden) < 1e-12);
}

TEST_CASE("ground state of the cubic model equation", "[shooting]") {
    const Params p = soliton_params();
    GroundOptions opts;
    auto rec = shoot_ground_state(p, 2.0, 10.0, opts);

    CHECK(std::abs(rec.d - oracle::soliton_center_n3_q4) < 1e-7);
    CHECK(rec.d_error < 1e-6);
    CHECK(rec.profile.tail.valid);
    CHECK(rec.cert.accepted(1e-8));

    // Independent live bisection with RK4 lands on the same height.
    oracle::RadialOde ode{p.N, p.q, p.t, p.lambda, p.crit};
    const double ref = oracle::threshold_rk4(ode, 2.0, 10.0, 30.0, 4e-4);
    CHECK(std::abs(rec.d - ref) < 5e-6);
}

TEST_CASE("solution identities tie all norms together", "[shooting]") {
    // For -w'' - 2w'/r + w = w^3: with G = |grad|^2, m = |w|_2^2, Q = |w|_4^4,
    // the boundary terms vanish and G = 3Q/4, m = Q/4, E = Q/4, G = 3E.
    const Params p = soliton_params();
    auto rec = shoot_ground_state(p, 2.0, 10.0, {});
    const auto& n = rec.profile.quad;
    REQUIRE(n.tail_included);
    CHECK(std::abs(n.grad - 0.75 * n.qnorm) < 1e-8 * n.grad);
    CHECK(std::abs(n.mass - 0.25 * n.qnorm) < 1e-8 * n.grad);
    CHECK(std::abs(rec.cert.energy - 0.25 * n.qnorm) < 1e-8 * n.grad);
    CHECK(std::abs(n.grad - 3.0 * rec.cert.energy) < 1e-8 * n.grad);
}

TEST_CASE("frequency scaling moves the center height with exponent 1/(q-2)", "[shooting]") {
    Params p = soliton_params();
    p.lambda = 4.0;
    auto rec = shoot_ground_state(p, 4.0, 20.0, {});
    CHECK(std::abs(rec.d - 2.0 * oracle::soliton_center_n3_q4) < 1e-6);

    // Decay rate follows the frequency.
    REQUIRE(rec.profile.tail.valid);
    CHECK(std::abs(rec.profile.tail.kappa - 2.0) < 1e-2);
}

TEST_CASE("co-integrated quadratures agree with the trapezoid rule", "[shooting]") {
    const Params p = soliton_params();
    ShotOptions o;
    o.record = true;
    auto shot = integrate_radial(p, 10.0, o);
    REQUIRE(shot.outcome == Outcome::crosses_zero);
    REQUIRE(shot.r.size() > 100);

    const double sigma = sphere_area(p.N);
    std::vector<double> f(shot.r.size());
    auto against = [&](auto integrand, double lib) {
        for (std::size_t i = 0; i < shot.r.size(); ++i)
            f[i] = integrand(shot.r[i], shot.u[i], shot.du[i]);
        const double t = quad::trapz(shot.r, f);
        CHECK(std::abs(t - lib) < 1e-6 * std::abs(lib));
    };
    against([&](double r, double u, double) {
        return sigma * u * u * std::pow(r, p.N - 1.0);
    }, shot.quad.mass);
    against([&](double r, double, double du) {
        return sigma * du * du * std::pow(r, p.N - 1.0);
    }, shot.quad.grad);
    against([&](double r, double u, double) {
        const double up = std::max(u, 0.0);
        return sigma * std::pow(up, p.q) * std::pow(r, p.N - 1.0);
    }, shot.quad.qnorm);
}

TEST_CASE("pure critical shot reproduces the standard bubble", "[shooting]") {
    Params p;
    p.N = 3;
    p.q = 4.0;
    p.t = 0.0;
    p.lambda = 0.0;
    p.crit = true;

    ShotOptions o;
    o.record = true;
    o.r_max = 40.0;
    auto shot = integrate_radial(p, oracle::bubble_center_n3, o);
    CHECK(shot.outcome == Outcome::decays);

    RadialProfile prof;
    prof.params = p;
    prof.d = shot.d;
    prof.r = shot.r;
    prof.u = shot.u;
    prof.du = shot.du;
    for (double r : {0.5, 1.0, 5.0, 20.0}) {
        const double exact = aubin_talenti(3, 1.0, r);
        CHECK(std::abs(prof.value(r) - exact) < 1e-6 * exact);
    }
}

TEST_CASE("exponential tail extension from a synthetic profile", "[shooting]") {
    const double A = 2.0, kappa = 1.0;
    RadialProfile prof;
    prof.params.N = 3;
    prof.params.q = 3.0;
    prof.params.t = 1.0;
    prof.params.lambda = 1.0;
    prof.d = 1.0;
    for (int i = 0; i <= 1800; ++i) {
        const double r = 6.0 + 0.01 * i;
        prof.r.push_back(r);
        prof.u.push_back(A * std::exp(-kappa * r) / r);
        prof.du.push_back(-A * std::exp(-kappa * r) * (kappa * r + 1.0) / (r * r));
    }
    prof.quad = {0.0, 0.0, 0.0, 0.0, false};

    extend_tail(prof);
    REQUIRE(prof.tail.valid);
    CHECK(std::abs(prof.tail.A - A) < 1e-6);
    CHECK(std::abs(prof.tail.kappa - kappa) < 1e-8);
    CHECK(prof.quad.tail_included);

    // Each tail contribution against plain Simpson on the same model.
    const double R = prof.r.back();
    const double sigma = sphere_area(3);
    auto model = [&](double r) { return A * std::exp(-kappa * r) / r; };
    auto dmodel = [&](double r) {
        return -A * std::exp(-kappa * r) * (kappa * r + 1.0) / (r * r);
    };
    const double m_ref = oracle::simpson(
        [&](double r) { return sigma * model(r) * model(r) * r * r; }, R, R + 40.0, 40000);
    const double g_ref = oracle::simpson(
        [&](double r) { return sigma * dmodel(r) * dmodel(r) * r * r; }, R, R + 40.0, 40000);
    const double q_ref = oracle::simpson(
        [&](double r) { return sigma * std::pow(model(r), 3.0) * r * r; }, R, R + 40.0, 40000);
    CHECK(std::abs(prof.quad.mass - m_ref) < 1e-6 * m_ref);
    CHECK(std::abs(prof.quad.grad - g_ref) < 1e-4 * g_ref);
    CHECK(std::abs(prof.quad.qnorm - q_ref) < 1e-6 * q_ref);
}

TEST_CASE("tail extension refuses profiles without exponential decay", "[shooting]") {
    // Algebraic decay (the bubble, lambda = 0).
    auto bubble = bubble_profile(3, 1.0);
    bubble.quad.tail_included = false;
    CHECK_THROWS_AS(extend_tail(bubble), SolverError);

    // Exponential but at the wrong rate for the stated frequency.
    RadialProfile wrong;
    wrong.params.N = 3;
    wrong.params.q = 3.0;
    wrong.params.t = 1.0;
    wrong.params.lambda = 1.0; // decay should be e^{-r}, data decays like e^{-2r}
    wrong.d = 1.0;
    for (int i = 0; i <= 1200; ++i) {
        const double r = 6.0 + 0.01 * i;
        wrong.r.push_back(r);
        wrong.u.push_back(std::exp(-2.0 * r) / r);
        wrong.du.push_back(-std::exp(-2.0 * r) * (2.0 * r + 1.0) / (r * r));
    }
    wrong.quad = {0.0, 0.0, 0.0, 0.0, false};
    CHECK_THROWS_AS(extend_tail(wrong), SolverError);
}

TEST_CASE("scan finds the two-branch structure at large coupling", "[shooting][scan]") {
    Params p;
    p.N = 3;
    p.q = 3.0;
    p.t = 50.0;
    p.lambda = 1.0;
    p.crit = true;

    auto res = find_positive_solutions(p, {});
    REQUIRE(res.records.size() >= 2);

    const auto& ground = res.records.front();
    CHECK(ground.branch == Branch::ground_state);
    CHECK(ground.cert.energy < bubble_level(p.N));
    CHECK(ground.cert.accepted(1e-5));

    // Every further solution sits higher in height and in energy.
    for (std::size_t i = 1; i < res.records.size(); ++i) {
        CHECK(res.records[i].d > ground.d);
        CHECK(res.records[i].cert.energy > ground.cert.energy);
        CHECK(res.records[i].cert.accepted(1e-5));
    }

    // Large coupling pushes the ground state small: sup u ~ t^{-1/(q-2)}.
    CHECK(ground.profile.sup_norm() < 5.0 / p.t);
}

TEST_CASE("purely critical problem with mass term admits no radial ground state", "[shooting][scan]") {
    Params p;
    p.N = 3;
    p.q = 3.0;
    p.t = 0.0;
    p.lambda = 1.0;
    p.crit = true;

    auto res = find_positive_solutions(p, {});
    CHECK(res.records.empty());
    for (auto c : res.classes) CHECK(c != Outcome::decays);
}

TEST_CASE("unbracketed endpoints are reported as such", "[shooting]") {
    Params p;
    p.N = 3;
    p.q = 3.0;
    p.t = 0.0;
    p.lambda = 1.0;
    p.crit = true;
    CHECK_THROWS_AS(shoot_ground_state(p, 0.5, 0.9, {}), SolverError);
}

TEST_CASE("core-matched start hands over on the bubble funnel", "[shooting][matched]") {
    Params p;
    p.N = 3;
    p.q = 3.0;
    p.t = 1000.0;
    p.lambda = 1.0;
    p.crit = true;

    // corrections reach into the core for short shots: no handover
    CHECK_FALSE(bubble_matched_start(p, 100.0, default_r_max(p)).valid);

    const double S32 = 3.0 * bubble_level(3); // ∫|∇U|² = ∫U^6 for the bubble
    for (double d : {1e5, 1e7, 1e10}) {
        const auto ms = bubble_matched_start(p, d, default_r_max(p));
        REQUIRE(ms.valid);
        // state sits within the matching band around U_d(r) ~ sqrt(3)/(d r)
        const double funnel = std::sqrt(3.0) / (d * ms.r);
        CHECK(ms.y[0] / funnel == Catch::Approx(1.0).margin(0.02));
        CHECK(-ms.y[1] * ms.r / ms.y[0] == Catch::Approx(1.0).margin(0.03));
        // inherited quadratures carry the full bubble core
        CHECK(ms.y[3] == Catch::Approx(S32).epsilon(1e-5));
        CHECK(ms.y[5] == Catch::Approx(S32).epsilon(1e-5));
    }
}

TEST_CASE("blow-up threshold far beyond direct reach is certified", "[shooting][matched]") {
    // the funnel spans twelve decades here; a plain start cannot classify it
    Params p;
    p.N = 3;
    p.q = 2.5;
    p.t = 1000.0;
    p.lambda = 1.0;
    p.crit = true;

    const auto rec = shoot_ground_state(p, 2e6, 4e6, {});
    CHECK(rec.d == Catch::Approx(3.0669e6).epsilon(1e-3));
    CHECK(rec.cert.accepted(1e-5));
    CHECK(rec.profile.tail.kappa == Catch::Approx(1.0).epsilon(0.01));
    CHECK(rec.profile.sup_norm() == rec.d);
    // the threshold trajectory is the bubble: gradient norm and energy land
    // on the critical levels
    CHECK(rec.cert.norms.grad == Catch::Approx(3.0 * bubble_level(3)).epsilon(1e-6));
    CHECK(rec.cert.energy == Catch::Approx(bubble_level(3)).epsilon(1e-6));
}
