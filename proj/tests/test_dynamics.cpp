#include <cmath>
#include <vector>

#include <doctest.h>

#include "qlt/dynamics.hpp"
#include "qlt/ensemble.hpp"
#include "qlt/errors.hpp"
#include "qlt/oracle.hpp"

using namespace qlt;

namespace {

PhysicalParams bare_params(double gamma, double kT = 2.5) {
    RawParams raw;
    raw.gamma = gamma;
    raw.kT = kT;
    raw.renormalize = false;
    return derived_params(raw);
}

Ensemble small_initial(const PhysicalParams& p, int n = 21, double w = 4.0,
                       bool economy = false, double xi0 = 2.0) {
    const InitialCondition ic = displaced_ground_state(p, xi0 * p.sigma0);
    GridSpec grid;
    grid.n_xi = n;
    grid.n_eta = n;
    grid.w_xi = w;
    grid.w_eta = w;
    grid.economy = economy;
    return init_ensemble(p, ic, grid);
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("quantum potential of the initial Gaussian") {
    const PhysicalParams p = bare_params(0.25);
    const Ensemble e = small_initial(p);
    MwlsSettings mw;
    const auto d = compute_field_derivatives(e, mw, par::Mode::serial);

    // g is an exact quadratic, so the fits are exact: Q = (hbar^2/m) u eta / sigma^4.
    for (int j = 0; j < e.n_eta; ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& pt = e.points[e.idx(i, j)];
            const double u = pt.xi - 2.0 * p.sigma0;
            const double want = p.hbar * p.hbar / p.m * u * pt.eta;
            CHECK(std::abs(d[e.idx(i, j)].q - want) < 1e-8);
        }

    // on the diagonal the potential and its xi gradient vanish exactly
    for (int i = 0; i < e.n_xi; ++i) {
        const std::size_t c = e.idx(i, e.diag_row());
        CHECK(d[c].q == 0.0);
        CHECK(d[c].q_x == 0.0);
        CHECK(d[c].g_e == 0.0);
    }
}

TEST_CASE("quantum potential value off the diagonal") {
    const PhysicalParams p = bare_params(0.25);
    const Ensemble e = small_initial(p);
    MwlsSettings mw;
    const auto d = compute_field_derivatives(e, mw, par::Mode::serial);
    // grid spacing 0.4: pick the node at (xi0 + 1.2 sigma, 1.2 sigma)
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t idx = 0; idx < e.points.size(); ++idx) {
        const auto& pt = e.points[idx];
        const double dxi = pt.xi - (2.0 + 1.2) * p.sigma0;
        const double de = pt.eta - 1.2 * p.sigma0;
        if (dxi * dxi + de * de < bd) {
            bd = dxi * dxi + de * de;
            best = idx;
        }
    }
    REQUIRE(bd < 1e-12);
    CHECK(std::abs(d[best].q - 1.2 * 1.2) < 1e-8);
}

TEST_CASE("acceleration formulas") {
    const PhysicalParams p = bare_params(0.5);
    StepControl ctl;

    TrajectoryPoint origin;
    FieldDerivatives none;
    auto [ax0, ae0] = accelerations(origin, none, p, ctl);
    CHECK(ax0 == 0.0);
    CHECK(ae0 == 0.0);

    TrajectoryPoint pt;
    pt.xi = 1.5;
    pt.eta = -0.7;
    pt.v_xi = 0.2;
    pt.v_eta = -0.1;
    FieldDerivatives d;
    d.q_x = 0.3;
    d.q_e = -0.4;
    auto [ax, ae] = accelerations(pt, d, p, ctl);
    const double w2 = p.omega_eff() * p.omega_eff();
    CHECK(ax == doctest::Approx(-w2 * 1.5 + (-0.4) / p.m -
                                2.0 * p.gamma * 0.2)
                    .epsilon(1e-14));
    CHECK(ae == doctest::Approx(-w2 * (-0.7) + 0.3 / p.m +
                                2.0 * p.gamma * (-0.1))
                    .epsilon(1e-14));

    // alternate sign convention flips only the quantum-force terms
    ctl.quantum_force_sign = -1.0;
    auto [axm, aem] = accelerations(pt, d, p, ctl);
    CHECK(axm == doctest::Approx(ax + 2.0 * 0.4 / p.m).epsilon(1e-12));
    CHECK(aem == doctest::Approx(ae - 2.0 * 0.3 / p.m).epsilon(1e-12));

    // semiclassical zeroes the quantum force
    ctl.quantum_force_sign = 1.0;
    ctl.semiclassical = true;
    auto [axs, aes] = accelerations(pt, d, p, ctl);
    CHECK(axs == doctest::Approx(-w2 * 1.5 - 2.0 * p.gamma * 0.2)
                     .epsilon(1e-14));
    CHECK(aes == doctest::Approx(-w2 * (-0.7) + 2.0 * p.gamma * (-0.1))
                     .epsilon(1e-14));
}

TEST_CASE("g rate") {
    const PhysicalParams p = bare_params(1.0);
    TrajectoryPoint pt;
    FieldDerivatives d;

    pt.eta = 0.0;
    d.div_v = 0.0;
    CHECK(g_rate(pt, d, p) == doctest::Approx(p.gamma).epsilon(1e-14));

    pt.eta = p.lambda / std::sqrt(2.0);
    CHECK(g_rate(pt, d, p) == doctest::Approx(0.0).epsilon(1e-14));

    const PhysicalParams p0 = bare_params(0.0);
    pt.eta = 0.3;
    d.div_v = 0.8;
    CHECK(g_rate(pt, d, p0) == doctest::Approx(-0.4).epsilon(1e-14));
}

TEST_CASE("action rate") {
    const PhysicalParams p = bare_params(0.5);
    TrajectoryPoint pt;
    FieldDerivatives d;

    CHECK(action_rate(pt, d, p) == 0.0);

    pt.v_xi = 1.0;
    pt.v_eta = 0.0;
    pt.eta = 1.0;
    pt.xi = 1.0;
    d.q = 0.0;
    CHECK(action_rate(pt, d, p) == doctest::Approx(2.0).epsilon(1e-14));

    pt.eta = 0.0;
    pt.v_eta = 0.0;
    d.q = 0.0;
    CHECK(action_rate(pt, d, p) == 0.0);
}

TEST_CASE("step guards") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble e = small_initial(p, 11, 3.0);
    StepControl ctl;

    ctl.dt = 0.0;
    const Ensemble same = step(e, ctl);
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        CHECK(same.points[i].xi == e.points[i].xi);
        CHECK(same.points[i].g == e.points[i].g);
    }

    ctl.dt = p.tau / 100.0;
    CHECK_THROWS_AS(step(e, ctl), RangeError);
    ctl.dt = -0.1;
    CHECK_THROWS_AS(step(e, ctl), RangeError);
}

TEST_CASE("harmonic closure with the quantum force off") {
    const PhysicalParams p = bare_params(0.0);
    Ensemble e = small_initial(p, 11, 3.0);
    const Ensemble start = e;
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    ctl.semiclassical = true;
    for (int i = 0; i < 1000; ++i) e = step(e, ctl);
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        CHECK(std::abs(e.points[i].xi - start.points[i].xi) < 1e-4 * p.sigma0);
        CHECK(std::abs(e.points[i].eta - start.points[i].eta) <
              1e-4 * p.sigma0);
    }
}

TEST_CASE("semiclassical critically damped peak matches the closed form") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble e = small_initial(p, 11, 3.0);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    ctl.semiclassical = true;
    for (int i = 0; i < 1000; ++i) e = step(e, ctl);
    const TrajectoryPoint& c = e.points[e.idx(5, e.diag_row())];
    const double want = semiclassical_xi(p, 2.0 * p.sigma0, p.tau);
    CHECK(std::abs(c.xi - want) < 1e-6);
    CHECK(e.t == doctest::Approx(p.tau).epsilon(1e-12));
    CHECK(e.step_count == 1000);
}

TEST_CASE("semiclassical trajectories ignore stencil settings") {
    const PhysicalParams p = bare_params(0.25);
    StepControl ctl;
    ctl.dt = p.tau / 500.0;
    ctl.semiclassical = true;
    MwlsSettings a;
    MwlsSettings b;
    b.degree_g = 4;
    b.stencil_min = 30;
    b.bandwidth_factor = 3.0;
    Ensemble ea = small_initial(p, 11, 3.0);
    Ensemble eb = small_initial(p, 11, 3.0);
    for (int i = 0; i < 20; ++i) {
        ea = step(ea, ctl, a);
        eb = step(eb, ctl, b);
    }
    for (std::size_t i = 0; i < ea.points.size(); ++i) {
        CHECK(ea.points[i].xi == eb.points[i].xi);
        CHECK(ea.points[i].v_eta == eb.points[i].v_eta);
    }
}

TEST_CASE("parity is preserved by quantum stepping") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble e = small_initial(p, 21, 4.0, false);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    ctl.par_mode = par::Mode::serial;
    MwlsSettings mw;
    for (int i = 0; i < 50; ++i) e = step(e, ctl, mw);

    const int half = (e.n_eta - 1) / 2;
    double worst = 0.0;
    for (int j = 0; j < half; ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& lo = e.points[e.idx(i, j)];
            const TrajectoryPoint& hi = e.points[e.idx(i, e.n_eta - 1 - j)];
            if (!lo.alive || !hi.alive) continue;
            worst = std::max(worst, std::abs(lo.g - hi.g));
            worst = std::max(worst, std::abs(lo.xi - hi.xi));
            worst = std::max(worst, std::abs(lo.eta + hi.eta));
            worst = std::max(worst, std::abs(lo.v_xi - hi.v_xi));
            worst = std::max(worst, std::abs(lo.v_eta + hi.v_eta));
            worst = std::max(worst, std::abs(lo.A + hi.A));
            worst = std::max(worst, std::abs(lo.q_pot + hi.q_pot));
        }
    CHECK(worst < 1e-8);

    // the diagonal row never leaves the axis
    for (int i = 0; i < e.n_xi; ++i) {
        const TrajectoryPoint& pt = e.points[e.idx(i, half)];
        CHECK(pt.eta == 0.0);
        CHECK(pt.v_eta == 0.0);
        CHECK(pt.A == 0.0);
    }
}

TEST_CASE("quantum potential oddness before the first remesh") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble e = small_initial(p, 21, 4.0, false);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    for (int i = 0; i < 20; ++i) e = step(e, ctl);
    const int half = (e.n_eta - 1) / 2;
    double acc = 0.0;
    long n = 0;
    for (int j = 0; j < half; ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& lo = e.points[e.idx(i, j)];
            const TrajectoryPoint& hi = e.points[e.idx(i, e.n_eta - 1 - j)];
            if (!lo.alive || !hi.alive) continue;
            acc += std::abs(lo.q_pot + hi.q_pot);
            ++n;
        }
    CHECK(acc / n < 1e-8);
}

TEST_CASE("non-crossing of diagonal trajectories") {
    const PhysicalParams p = bare_params(0.25);
    Ensemble e = small_initial(p, 21, 4.0, true);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    for (int s = 0; s < 60; ++s) {
        e = step(e, ctl);
        double prev = -1e300;
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& pt = e.points[e.idx(i, e.diag_row())];
            CHECK(pt.xi > prev);
            prev = pt.xi;
        }
    }
}

TEST_CASE("gradient of the quantum potential matches finite differences") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = small_initial(p, 21, 3.0, false);
    // quartic perturbation so the fields are not exactly polynomial-closed
    for (auto& pt : e.points) {
        const double u = pt.xi - 2.0 * p.sigma0;
        pt.g += 0.02 * u * u * pt.eta * pt.eta;
    }
    MwlsSettings mw;
    const auto d = compute_field_derivatives(e, mw, par::Mode::serial);

    const double h = e.dxi;
    double worst = 0.0, scale = 0.0;
    for (int j = 2; j < e.n_eta - 2; ++j)
        for (int i = 2; i < e.n_xi - 2; ++i) {
            const double fd_x =
                (d[e.idx(i + 1, j)].q - d[e.idx(i - 1, j)].q) / (2.0 * h);
            const double fd_e =
                (d[e.idx(i, j + 1)].q - d[e.idx(i, j - 1)].q) / (2.0 * e.deta);
            worst = std::max(worst, std::abs(fd_x - d[e.idx(i, j)].q_x));
            worst = std::max(worst, std::abs(fd_e - d[e.idx(i, j)].q_e));
            scale = std::max({scale, std::abs(fd_x), std::abs(fd_e)});
        }
    CHECK(worst < 0.05 * scale + 1e-8);
}

TEST_CASE("single-stage gradient agrees with the two-stage default") {
    const PhysicalParams p = bare_params(0.5);
    const Ensemble e = small_initial(p, 21, 3.0, false);
    MwlsSettings two;
    MwlsSettings one;
    one.single_stage_grad_q = true;
    one.degree_g = 4;
    const auto d2 = compute_field_derivatives(e, two, par::Mode::serial);
    const auto d1 = compute_field_derivatives(e, one, par::Mode::serial);
    // initial Gaussian: Q is an exact quadratic, both routes are exact
    for (std::size_t i = 0; i < d1.size(); ++i) {
        CHECK(std::abs(d1[i].q_x - d2[i].q_x) < 1e-7);
        CHECK(std::abs(d1[i].q_e - d2[i].q_e) < 1e-7);
    }
}

TEST_CASE("heun and rk4 converge to the same dynamics") {
    const PhysicalParams p = bare_params(1.0);
    auto scheme_gap = [&](double dt, int n_steps) {
        StepControl rk;
        rk.dt = dt;
        StepControl heun = rk;
        heun.scheme = Scheme::HEUN;
        Ensemble er = small_initial(p, 21, 4.0, true);
        Ensemble eh = er;
        for (int i = 0; i < n_steps; ++i) {
            er = step(er, rk);
            eh = step(eh, heun);
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < er.points.size(); ++i)
            worst = std::max(worst, std::abs(er.points[i].g - eh.points[i].g));
        return worst;
    };
    // same final time, halved step: the scheme gap must shrink
    const double coarse = scheme_gap(p.tau / 1000.0, 20);
    const double fine = scheme_gap(p.tau / 2000.0, 40);
    CHECK(coarse < 0.05);
    CHECK(fine < 0.6 * coarse);
}

TEST_CASE("frozen snapshots evaluate their local models at offsets") {
    FieldDerivatives d;
    d.q = 7.0;
    d.q_x = -1.0;
    d.q_e = 2.0;
    d.div_v = 0.5;

    // without models the center values extrapolate unchanged
    const FieldDerivatives c = d.at(3.0, -2.0);
    CHECK(c.q == 7.0);
    CHECK(c.q_x == -1.0);
    CHECK(c.q_e == 2.0);
    CHECK(c.div_v == 0.5);

    // Q = 1 + 2 dx - de + 0.5 dx^2 - dx de + 3 de^2, div = 4 - dx + 2 de^3
    d.x0 = 1.0;
    d.e0 = -1.0;
    d.q_poly = {1.0, 2.0, -1.0, 0.5, -1.0, 3.0, 0.0, 0.0, 0.0, 0.0};
    d.div_poly = {4.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0};
    d.has_poly = true;
    const double dx = 0.3, de = -0.2;
    const FieldDerivatives m = d.at(d.x0 + dx, d.e0 + de);
    CHECK(m.q == doctest::Approx(1.0 + 2.0 * dx - de + 0.5 * dx * dx -
                                 dx * de + 3.0 * de * de).epsilon(1e-14));
    CHECK(m.q_x == doctest::Approx(2.0 + dx - de).epsilon(1e-14));
    CHECK(m.q_e == doctest::Approx(-1.0 - dx + 6.0 * de).epsilon(1e-14));
    CHECK(m.div_v ==
          doctest::Approx(4.0 - dx + 2.0 * de * de * de).epsilon(1e-14));
    // g derivatives are center-only values and pass through
    CHECK(m.g_x == d.g_x);
    // at the center the models reproduce the stored values
    const FieldDerivatives z = d.at(d.x0, d.e0);
    CHECK(z.q == 1.0);
    CHECK(z.div_v == 4.0);
}

TEST_CASE("fits stay regular on a strongly anisotropic adapted mesh") {
    // The kT=2.5 equilibrium shape: the eta box contracted five-fold.
    const PhysicalParams p = bare_params(1.0);
    const InitialCondition ic = displaced_ground_state(p, 0.0);
    GridSpec grid;
    grid.n_xi = 41;
    grid.n_eta = 41;
    grid.w_xi = 9.0;
    grid.w_eta = 1.8;
    grid.economy = true;
    Ensemble e = init_ensemble(p, ic, grid);
    for (auto& pt : e.points) {
        const double sx2 = 5.066, se2 = 0.1974;
        pt.g = -0.25 * std::log(M_PI * M_PI * sx2 * se2) -
               pt.xi * pt.xi / (2.0 * sx2) - pt.eta * pt.eta / (2.0 * se2);
        pt.v_eta = 2.0 * p.gamma * pt.eta;
    }
    MwlsSettings mw;
    int singular = -1;
    std::vector<char> mask;
    const auto d =
        compute_field_derivatives(e, mw, par::Mode::serial, &singular, &mask);
    CHECK(singular == 0);
    REQUIRE(mask.size() == e.points.size());
    for (char f : mask) CHECK(f == 0);

    // and a step at default settings keeps every point alive
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    const Ensemble e1 = step(e, ctl, mw);
    CHECK(e1.alive_count() == e.alive_count());
}

TEST_CASE("unsalvageable fits mark their points dead for the step") {
    const PhysicalParams p = bare_params(0.25);
    const Ensemble e = small_initial(p);
    MwlsSettings mw;
    mw.cond_threshold = 0.5;  // condition ratio is always >= 1
    int singular = 0;
    std::vector<char> mask;
    compute_field_derivatives(e, mw, par::Mode::serial, &singular, &mask);
    CHECK(singular == static_cast<int>(e.alive_count()));
    long flagged = 0;
    for (char f : mask) flagged += f;
    CHECK(flagged == e.alive_count());

    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    CHECK_THROWS_AS(step(e, ctl, mw), StencilCollapse);
}

}  // TEST_SUITE
