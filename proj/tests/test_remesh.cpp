#include <cmath>
#include <vector>

#include <doctest.h>

#include "qlt/dynamics.hpp"
#include "qlt/ensemble.hpp"
#include "qlt/errors.hpp"
#include "qlt/observables.hpp"
#include "qlt/remesh.hpp"

using namespace qlt;

namespace {

PhysicalParams bare_params(double gamma, double kT = 2.5) {
    RawParams raw;
    raw.gamma = gamma;
    raw.kT = kT;
    raw.renormalize = false;
    return derived_params(raw);
}

Ensemble make_grid(const PhysicalParams& p, int n, double w, bool economy) {
    const InitialCondition ic = displaced_ground_state(p, 2.0 * p.sigma0);
    GridSpec grid;
    grid.n_xi = n;
    grid.n_eta = n;
    grid.w_xi = w;
    grid.w_eta = w;
    grid.economy = economy;
    return init_ensemble(p, ic, grid);
}

bool same_points(const Ensemble& a, const Ensemble& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const TrajectoryPoint& x = a.points[i];
        const TrajectoryPoint& y = b.points[i];
        if (x.xi != y.xi || x.eta != y.eta || x.g != y.g || x.A != y.A ||
            x.v_xi != y.v_xi || x.v_eta != y.v_eta || x.q_pot != y.q_pot ||
            x.alive != y.alive)
            return false;
    }
    return true;
}

}  // namespace

TEST_SUITE("remesh") {

TEST_CASE("remesh trigger conditions") {
    const PhysicalParams p = bare_params(0.25);
    RemeshPolicy policy;
    policy.half_w_xi = 4.0;
    policy.half_w_eta = 4.0;

    Ensemble e = make_grid(p, 21, 4.0, false);
    CHECK_FALSE(should_remesh(e, policy));

    e.step_count = 40;
    CHECK(should_remesh(e, policy));
    e.step_count = 19;
    CHECK_FALSE(should_remesh(e, policy));

    // more than 5% of points swept out
    Ensemble dead = e;
    for (int i = 0; i < 23; ++i) dead.points[i].alive = false;
    CHECK(should_remesh(dead, policy));
    Ensemble few = e;
    for (int i = 0; i < 20; ++i) few.points[i].alive = false;
    CHECK_FALSE(should_remesh(few, policy));

    // a point drifting away from all its logical neighbors
    Ensemble torn = e;
    torn.points[torn.idx(10, 10)].xi += 3.0 * torn.dxi;
    torn.points[torn.idx(10, 10)].eta += 3.0 * torn.deta;
    CHECK(should_remesh(torn, policy));
    Ensemble nudged = e;
    nudged.points[nudged.idx(10, 10)].xi += 0.3 * nudged.dxi;
    CHECK_FALSE(should_remesh(nudged, policy));
}

TEST_CASE("parity projection symmetrizes and is idempotent") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 21, 4.0, false);
    for (int j = 0; j < e.n_eta; ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            TrajectoryPoint& pt = e.points[e.idx(i, j)];
            pt.g += 1e-3 * std::sin(1.7 * i + 0.3 * j);
            pt.A += 1e-3 * std::cos(2.1 * i - 0.5 * j);
            pt.v_xi += 1e-4 * std::sin(1.0 + i * j);
            pt.v_eta += 1e-4 * std::cos(i + 2.0 * j);
            pt.q_pot += 1e-4 * std::sin(3.0 * i - j);
        }

    const Ensemble p1 = enforce_parity(e);
    const int half = (e.n_eta - 1) / 2;
    for (int j = 0; j < half; ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& lo = p1.points[p1.idx(i, j)];
            const TrajectoryPoint& hi = p1.points[p1.idx(i, e.n_eta - 1 - j)];
            CHECK(lo.g == hi.g);
            CHECK(lo.v_xi == hi.v_xi);
            CHECK(lo.eta == -hi.eta);
            CHECK(lo.A == -hi.A);
            CHECK(lo.v_eta == -hi.v_eta);
            CHECK(lo.q_pot == -hi.q_pot);
            // even projection is the mirror average of the input
            const TrajectoryPoint& a = e.points[e.idx(i, j)];
            const TrajectoryPoint& b = e.points[e.idx(i, e.n_eta - 1 - j)];
            CHECK(hi.g == 0.5 * (a.g + b.g));
        }
    for (int i = 0; i < e.n_xi; ++i) {
        const TrajectoryPoint& pt = p1.points[p1.idx(i, half)];
        CHECK(pt.eta == 0.0);
        CHECK(pt.A == 0.0);
        CHECK(pt.v_eta == 0.0);
        CHECK(pt.q_pot == 0.0);
    }

    const Ensemble p2 = enforce_parity(p1);
    CHECK(same_points(p1, p2));
}

TEST_CASE("parity projection needs a mirror-symmetric grid") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 11, 3.0, false);
    e.points[e.idx(3, 2)].xi += 0.5 * e.dxi;
    CHECK_THROWS_AS(enforce_parity(e), NoMirror);
}

TEST_CASE("parity projection pins the economy axis row") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 11, 3.0, true);
    for (int i = 0; i < e.n_xi; ++i) {
        TrajectoryPoint& pt = e.points[e.idx(i, 0)];
        pt.A = 0.1;
        pt.v_eta = -0.2;
        pt.q_pot = 0.05;
    }
    const Ensemble out = enforce_parity(e);
    for (int i = 0; i < e.n_xi; ++i) {
        const TrajectoryPoint& pt = out.points[out.idx(i, 0)];
        CHECK(pt.A == 0.0);
        CHECK(pt.v_eta == 0.0);
        CHECK(pt.q_pot == 0.0);
    }
    // off-axis rows untouched
    for (int j = 1; j < e.stored_rows(); ++j)
        for (int i = 0; i < e.n_xi; ++i)
            CHECK(out.points[out.idx(i, j)].g == e.points[e.idx(i, j)].g);
}

TEST_CASE("remesh of the initial state reproduces the analytic fields") {
    const PhysicalParams p = bare_params(0.25);
    RemeshPolicy policy;
    policy.half_w_xi = 4.0;
    policy.half_w_eta = 4.0;

    for (const bool economy : {false, true}) {
        for (const bool adapt : {false, true}) {
            Ensemble e = make_grid(p, 21, 4.0, economy);
            RemeshPolicy pol = policy;
            pol.adapt_domain = adapt;
            const Ensemble r = remesh(e, pol, {}, par::Mode::serial);
            CHECK(r.remesh_count == e.remesh_count + 1);
            CHECK(r.t == e.t);

            const Ensemble full = expand_full(r);
            const double g0 = displaced_ground_state(p, 2.0 * p.sigma0).g0;
            double worst = 0.0;
            for (const auto& pt : full.points) {
                const double u = pt.xi - 2.0 * p.sigma0;
                const double g_ref =
                    g0 - (u * u + pt.eta * pt.eta) /
                             (2.0 * p.sigma0 * p.sigma0);
                worst = std::max(worst, std::abs(pt.g - g_ref));
                worst = std::max(worst, std::abs(pt.v_xi));
                worst = std::max(
                    worst, std::abs(pt.v_eta - 2.0 * p.gamma * pt.eta));
                worst = std::max(worst, std::abs(pt.A));
            }
            CHECK(worst < 1e-8);
            CHECK(std::abs(trace(full) - trace(expand_full(e))) < 1e-6);
        }
    }
}

TEST_CASE("parity-respecting polynomial fields survive a remesh exactly") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 21, 4.0, false);
    auto fill = [](TrajectoryPoint& pt) {
        const double u = pt.xi - 2.0;
        const double n = pt.eta;
        pt.g = 0.1 + 0.03 * u - 0.05 * u * u - 0.2 * n * n;
        pt.v_xi = 0.2 + 0.1 * u - 0.05 * n * n + 0.01 * u * u * u;
        pt.v_eta = 0.3 * n + 0.02 * u * n - 0.01 * n * n * n;
        pt.A = 0.05 * n + 0.04 * u * n;
        pt.q_pot = -0.02 * n;
    };
    for (auto& pt : e.points) fill(pt);

    RemeshPolicy pol;
    pol.half_w_xi = 3.0;
    pol.half_w_eta = 3.0;
    pol.adapt_domain = false;
    const Ensemble r = remesh(e, pol, {}, par::Mode::serial);

    // the new box is re-centered on the fitted peak of g
    CHECK(r.xi_center == doctest::Approx(2.3).epsilon(1e-10));
    CHECK(r.dxi == doctest::Approx(0.3).epsilon(1e-12));

    double worst = 0.0;
    for (const auto& pt : r.points) {
        TrajectoryPoint want = pt;
        fill(want);
        worst = std::max(worst, std::abs(pt.g - want.g));
        worst = std::max(worst, std::abs(pt.v_xi - want.v_xi));
        worst = std::max(worst, std::abs(pt.v_eta - want.v_eta));
        worst = std::max(worst, std::abs(pt.A - want.A));
        worst = std::max(worst, std::abs(pt.q_pot - want.q_pot));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("domain adaptation tracks the fitted widths") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 21, 4.0, false);
    // squeeze the packet in eta: sigma_eta = 0.25 sigma0
    const double g0 = displaced_ground_state(p, 2.0 * p.sigma0).g0;
    for (auto& pt : e.points) {
        const double u = pt.xi - 2.0;
        pt.g = g0 - 0.5 * u * u - 8.0 * pt.eta * pt.eta;
    }
    RemeshPolicy pol;
    pol.half_w_xi = 4.0;
    pol.half_w_eta = 4.0;
    const Ensemble r = remesh(e, pol, {}, par::Mode::serial);
    // 4*sigma_eta = 1, clamped to at least 0.2*half_w = 0.8
    CHECK(r.half_w_eta == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.half_w_xi == doctest::Approx(4.0).epsilon(1e-6));
    // never below the clamp floor even for a collapsed fit
    for (auto& pt : e.points) {
        const double u = pt.xi - 2.0;
        pt.g = g0 - 0.5 * u * u - 800.0 * pt.eta * pt.eta;
    }
    const Ensemble r2 = remesh(e, pol, {}, par::Mode::serial);
    CHECK(r2.half_w_eta >= 0.2 * 4.0 - 1e-12);
}

TEST_CASE("trace and purity survive a mid-run remesh") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble e = make_grid(p, 41, 5.0, true);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    ctl.par_mode = par::Mode::serial;
    for (int i = 0; i < 20; ++i) e = step(e, ctl);

    const double tr0 = trace(e);
    const double pu0 = purity(e);
    RemeshPolicy pol;
    const Ensemble r = remesh(e, pol, {}, par::Mode::serial);
    CHECK(std::abs(trace(r) - tr0) < 1e-3 * tr0);
    CHECK(std::abs(purity(r) - pu0) < 1e-2);
}

TEST_CASE("economy and full storage agree through steps and remeshes") {
    const PhysicalParams p = bare_params(1.0);
    Ensemble eco = make_grid(p, 21, 4.0, true);
    Ensemble full = make_grid(p, 21, 4.0, false);
    StepControl ctl;
    ctl.dt = p.tau / 1000.0;
    ctl.par_mode = par::Mode::serial;
    RemeshPolicy pol;
    pol.half_w_xi = 4.0;
    pol.half_w_eta = 4.0;
    for (int i = 0; i < 100; ++i) {
        eco = step(eco, ctl);
        full = step(full, ctl);
        if (should_remesh(eco, pol)) eco = remesh(eco, pol, {}, par::Mode::serial);
        if (should_remesh(full, pol)) full = remesh(full, pol, {}, par::Mode::serial);
    }
    CHECK(eco.remesh_count == full.remesh_count);
    CHECK(eco.remesh_count == 5);

    const Ensemble ex = expand_full(eco);
    REQUIRE(ex.points.size() == full.points.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ex.points.size(); ++i) {
        if (!ex.points[i].alive || !full.points[i].alive) continue;
        worst = std::max(worst, std::abs(ex.points[i].xi - full.points[i].xi));
        worst = std::max(worst, std::abs(ex.points[i].eta - full.points[i].eta));
        worst = std::max(worst, std::abs(ex.points[i].g - full.points[i].g));
        worst = std::max(worst,
                         std::abs(ex.points[i].v_eta - full.points[i].v_eta));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("remesh refuses a nearly empty ensemble") {
    const PhysicalParams p = bare_params(0.5);
    Ensemble e = make_grid(p, 11, 3.0, false);
    for (std::size_t i = 10; i < e.points.size(); ++i)
        e.points[i].alive = false;
    RemeshPolicy pol;
    CHECK_THROWS_AS(remesh(e, pol, {}, par::Mode::serial), InsufficientPoints);
}

}  // TEST_SUITE
