#include "qlt/dynamics.hpp"

#include <atomic>
#include <cmath>

namespace qlt {

int MwlsSettings::stencil_size() const {
    const int bg = static_cast<int>(basis_monomials(degree_g, ParityClass::NONE).size());
    const int bv = static_cast<int>(basis_monomials(degree_v, ParityClass::NONE).size());
    const int b = bg > bv ? bg : bv;
    return std::max(2 * b, stencil_min);
}

namespace {

// Dense graded-lex slot of dx^a de^b, or -1 beyond total degree 3.
int poly_slot(int a, int b) {
    static const int base[4] = {0, 1, 3, 6};
    const int d = a + b;
    return d <= 3 ? base[d] + b : -1;
}

double poly_eval(const std::array<double, 10>& c, double x, double e) {
    return c[0] + c[1] * x + c[2] * e + x * (c[3] * x + c[4] * e) +
           c[5] * e * e + x * x * (c[6] * x + c[7] * e) +
           e * e * (c[8] * x + c[9] * e);
}

double poly_eval_dx(const std::array<double, 10>& c, double x, double e) {
    return c[1] + 2.0 * c[3] * x + c[4] * e + 3.0 * c[6] * x * x +
           2.0 * c[7] * x * e + c[8] * e * e;
}

double poly_eval_de(const std::array<double, 10>& c, double x, double e) {
    return c[2] + c[4] * x + 2.0 * c[5] * e + c[7] * x * x +
           2.0 * c[8] * x * e + 3.0 * c[9] * e * e;
}

// Accumulate the divergence of the fitted velocity field: d/dxi of the
// v_xi fit plus d/deta of the v_eta fit, as a polynomial about the shared
// fit center. Terms beyond total degree 3 are dropped.
void add_divergence(const LocalFit& fx, const LocalFit& fe,
                    std::array<double, 10>& out) {
    for (std::size_t k = 0; k < fx.monomials.size(); ++k) {
        const Monomial& m = fx.monomials[k];
        if (m.a < 1) continue;
        const int s = poly_slot(m.a - 1, m.b);
        if (s >= 0) out[static_cast<std::size_t>(s)] += m.a * fx.coeffs[k];
    }
    for (std::size_t k = 0; k < fe.monomials.size(); ++k) {
        const Monomial& m = fe.monomials[k];
        if (m.b < 1) continue;
        const int s = poly_slot(m.a, m.b - 1);
        if (s >= 0) out[static_cast<std::size_t>(s)] += m.b * fe.coeffs[k];
    }
}

void copy_fit_poly(const LocalFit& f, std::array<double, 10>& out) {
    for (std::size_t k = 0; k < f.monomials.size(); ++k) {
        const int s = poly_slot(f.monomials[k].a, f.monomials[k].b);
        if (s >= 0) out[static_cast<std::size_t>(s)] = f.coeffs[k];
    }
}

}  // namespace

FieldDerivatives FieldDerivatives::at(double xi, double eta) const {
    FieldDerivatives d = *this;
    if (!has_poly) return d;
    const double dx = xi - x0;
    const double de = eta - e0;
    d.q = poly_eval(q_poly, dx, de);
    d.q_x = poly_eval_dx(q_poly, dx, de);
    d.q_e = poly_eval_de(q_poly, dx, de);
    d.div_v = poly_eval(div_poly, dx, de);
    return d;
}

double quantum_potential(const LocalFit& g_fit, const PhysicalParams& p) {
    const double g_x = g_fit.derivative(1, 0);
    const double g_e = g_fit.derivative(0, 1);
    const double g_xe = g_fit.derivative(1, 1);
    return p.hbar * p.hbar / p.m * (g_xe + g_x * g_e);
}

std::pair<double, double> accelerations(const TrajectoryPoint& pt,
                                        const FieldDerivatives& d,
                                        const PhysicalParams& p,
                                        const StepControl& ctl) {
    const double w2 = p.k / p.m;
    const double s = ctl.quantum_force_sign;
    const double qx = ctl.semiclassical ? 0.0 : d.q_x;
    const double qe = ctl.semiclassical ? 0.0 : d.q_e;
    const double a_xi = -w2 * pt.xi + s * qe / p.m - 2.0 * p.gamma * pt.v_xi;
    const double a_eta = -w2 * pt.eta + s * qx / p.m + 2.0 * p.gamma * pt.v_eta;
    return {a_xi, a_eta};
}

double g_rate(const TrajectoryPoint& pt, const FieldDerivatives& d,
              const PhysicalParams& p) {
    const double l2 = p.lambda * p.lambda;
    return -0.5 * d.div_v + p.gamma - 2.0 * p.gamma / l2 * pt.eta * pt.eta;
}

double action_rate(const TrajectoryPoint& pt, const FieldDerivatives& d,
                   const PhysicalParams& p) {
    return -p.m * pt.v_xi * pt.v_eta + 2.0 * p.m * p.gamma * pt.v_xi * pt.eta +
           p.k * pt.xi * pt.eta - d.q;
}

namespace {

struct PointWork {
    std::vector<StencilEntry> stencil;
    double bandwidth = 0.0;
    bool on_axis = false;
    bool singular = false;
};

// Alive stencil candidates, counting economy-mode mirror images.
long candidate_count(const Ensemble& e) {
    long n = 0;
    for (const auto& pt : e.points) {
        if (!pt.alive) continue;
        ++n;
        if (e.economy && pt.eta > 0.0) ++n;
    }
    return n;
}

}  // namespace

std::vector<FieldDerivatives> compute_field_derivatives(
    const Ensemble& e, const MwlsSettings& s, par::Mode mode,
    int* singular_count, std::vector<char>* singular_mask) {
    if (s.single_stage_grad_q && s.degree_g < 3)
        throw RangeError("single-stage grad Q requires mwls.degree_g >= 3");

    const std::size_t n = e.points.size();
    const long candidates = candidate_count(e);
    const int base_n = s.stencil_size();
    if (candidates < base_n)
        throw InsufficientPoints("ensemble has " + std::to_string(candidates) +
                                 " alive stencil candidates, fits need " +
                                 std::to_string(base_n));

    std::vector<FieldDerivatives> out(n);
    std::vector<PointWork> work(n);
    std::vector<double> q_val(n, 0.0);
    const double hbar2_m = e.params.hbar * e.params.hbar / e.params.m;
    const double hx = e.dxi > 0.0 ? e.dxi : 1.0;
    const double he = e.deta > 0.0 ? e.deta : 1.0;

    // Pass 1: fit g and velocities, evaluate Q pointwise.
    par::for_index(n, mode, [&](std::size_t i) {
        const TrajectoryPoint& pt = e.points[i];
        if (!pt.alive) return;
        thread_local StencilScratch scratch;
        thread_local std::vector<double> xs, es;
        thread_local Eigen::VectorXd fg, fvx, fve;
        thread_local MwlsSolver sol_g, sol_v, sol_vo;

        PointWork& wk = work[i];
        wk.on_axis = (pt.eta == 0.0);
        const ParityClass par_g =
            wk.on_axis ? ParityClass::EVEN_IN_ETA : ParityClass::NONE;
        const ParityClass par_ve =
            wk.on_axis ? ParityClass::ODD_IN_ETA : ParityClass::NONE;

        int want = base_n;
        bool ok = false;
        for (int attempt = 0;; ++attempt) {
            if (want > candidates) want = static_cast<int>(candidates);
            select_stencil_at(e, pt.xi, pt.eta, want, scratch, wk.stencil);
            wk.bandwidth = local_bandwidth(wk.stencil, s.bandwidth_factor);

            const std::size_t m = wk.stencil.size();
            xs.resize(m);
            es.resize(m);
            fg.resize(static_cast<Eigen::Index>(m));
            fvx.resize(static_cast<Eigen::Index>(m));
            fve.resize(static_cast<Eigen::Index>(m));
            for (std::size_t r = 0; r < m; ++r) {
                const StencilEntry& st = wk.stencil[r];
                const TrajectoryPoint& sp = e.points[st.index];
                xs[r] = sp.xi;
                es[r] = st.mirror ? -sp.eta : sp.eta;
                fg[static_cast<Eigen::Index>(r)] = sp.g;
                fvx[static_cast<Eigen::Index>(r)] = sp.v_xi;
                fve[static_cast<Eigen::Index>(r)] =
                    st.mirror ? -sp.v_eta : sp.v_eta;
            }

            const FitStatus st_g = sol_g.setup(xs, es, pt.xi, pt.eta, s.degree_g,
                                               par_g, wk.bandwidth,
                                               s.cond_threshold, hx, he);
            const FitStatus st_v = sol_v.setup(xs, es, pt.xi, pt.eta, s.degree_v,
                                               par_g, wk.bandwidth,
                                               s.cond_threshold, hx, he);
            FitStatus st_vo = FitStatus::ok;
            if (wk.on_axis)
                st_vo = sol_vo.setup(xs, es, pt.xi, pt.eta, s.degree_v, par_ve,
                                     wk.bandwidth, s.cond_threshold, hx, he);
            ok = st_g == FitStatus::ok && st_v == FitStatus::ok &&
                 st_vo == FitStatus::ok;
            if (ok || attempt >= s.max_enlarge ||
                static_cast<long>(want) >= candidates)
                break;
            want += s.enlarge_step;
        }
        wk.singular = !ok;

        const LocalFit fit_g = sol_g.solve(fg);
        const LocalFit fit_vx = sol_v.solve(fvx);
        const LocalFit fit_ve = wk.on_axis ? sol_vo.solve(fve) : sol_v.solve(fve);

        FieldDerivatives d;
        d.x0 = pt.xi;
        d.e0 = pt.eta;
        d.g_x = fit_g.derivative(1, 0);
        d.g_e = fit_g.derivative(0, 1);
        d.g_xe = fit_g.derivative(1, 1);
        d.q = hbar2_m * (d.g_xe + d.g_x * d.g_e);
        d.div_v = fit_vx.derivative(1, 0) + fit_ve.derivative(0, 1);
        add_divergence(fit_vx, fit_ve, d.div_poly);
        if (s.single_stage_grad_q) {
            const double g_xx = fit_g.derivative(2, 0);
            const double g_ee = fit_g.derivative(0, 2);
            const double g_xxe = fit_g.derivative(2, 1);
            const double g_xee = fit_g.derivative(1, 2);
            d.q_x = hbar2_m * (g_xxe + g_xx * d.g_e + d.g_x * d.g_xe);
            d.q_e = hbar2_m * (g_xee + d.g_xe * d.g_e + d.g_x * g_ee);
            // Linear model of Q; this route has no fitted Q field to expand.
            d.q_poly[0] = d.q;
            d.q_poly[1] = d.q_x;
            d.q_poly[2] = d.q_e;
            d.has_poly = true;
        }
        q_val[i] = d.q;
        out[i] = d;
    });

    // Pass 2: fit the Q field on the saved stencils for its gradient.
    if (!s.single_stage_grad_q) {
        par::for_index(n, mode, [&](std::size_t i) {
            const TrajectoryPoint& pt = e.points[i];
            if (!pt.alive) return;
            thread_local std::vector<double> xs, es;
            thread_local Eigen::VectorXd fq;
            thread_local MwlsSolver sol_q;

            PointWork& wk = work[i];
            const std::size_t m = wk.stencil.size();
            xs.resize(m);
            es.resize(m);
            fq.resize(static_cast<Eigen::Index>(m));
            for (std::size_t r = 0; r < m; ++r) {
                const StencilEntry& st = wk.stencil[r];
                const TrajectoryPoint& sp = e.points[st.index];
                xs[r] = sp.xi;
                es[r] = st.mirror ? -sp.eta : sp.eta;
                fq[static_cast<Eigen::Index>(r)] =
                    st.mirror ? -q_val[st.index] : q_val[st.index];
            }
            const ParityClass par_q =
                wk.on_axis ? ParityClass::ODD_IN_ETA : ParityClass::NONE;
            const FitStatus st_q = sol_q.setup(xs, es, pt.xi, pt.eta, 2, par_q,
                                               wk.bandwidth, s.cond_threshold,
                                               hx, he);
            if (st_q != FitStatus::ok) wk.singular = true;
            const LocalFit fit_q = sol_q.solve(fq);
            out[i].q_x = fit_q.derivative(1, 0);
            out[i].q_e = fit_q.derivative(0, 1);
            copy_fit_poly(fit_q, out[i].q_poly);
            // Keep the pointwise Q from pass 1; the fitted constant smooths
            // over the stencil instead of interpolating.
            out[i].q_poly[0] += q_val[i] - fit_q.value();
            out[i].has_poly = true;
        });
    }

    if (singular_count) {
        int bad = 0;
        for (const auto& wk : work)
            if (wk.singular) ++bad;
        *singular_count = bad;
    }
    if (singular_mask) {
        singular_mask->assign(n, 0);
        for (std::size_t i = 0; i < n; ++i)
            if (work[i].singular) (*singular_mask)[i] = 1;
    }
    return out;
}

namespace {

struct State {
    double xi, eta, v_xi, v_eta, g, A;
};

State state_of(const TrajectoryPoint& pt) {
    return {pt.xi, pt.eta, pt.v_xi, pt.v_eta, pt.g, pt.A};
}

State rates(const State& y, const FieldDerivatives& d0, const PhysicalParams& p,
            const StepControl& ctl) {
    TrajectoryPoint tmp;
    tmp.xi = y.xi;
    tmp.eta = y.eta;
    tmp.v_xi = y.v_xi;
    tmp.v_eta = y.v_eta;
    const FieldDerivatives d = d0.at(y.xi, y.eta);
    const auto [a_xi, a_eta] = accelerations(tmp, d, p, ctl);
    State f{y.v_xi, y.v_eta, a_xi, a_eta, 0.0, 0.0};
    if (!ctl.semiclassical) {
        f.g = g_rate(tmp, d, p);
        f.A = action_rate(tmp, d, p);
    }
    return f;
}

State axpy(const State& y, double h, const State& f) {
    return {y.xi + h * f.xi,     y.eta + h * f.eta, y.v_xi + h * f.v_xi,
            y.v_eta + h * f.v_eta, y.g + h * f.g,   y.A + h * f.A};
}

void check_collapse(int singular, long alive) {
    if (singular > 0.10 * alive)
        throw StencilCollapse(std::to_string(singular) + " of " +
                              std::to_string(alive) +
                              " points have singular fits; remesh required");
}

}  // namespace

Ensemble step(const Ensemble& e, const StepControl& ctl, const MwlsSettings& s) {
    if (!(ctl.dt >= 0.0)) throw RangeError("dt must be non-negative");
    if (ctl.dt > e.params.tau / 200.0 * (1.0 + 1e-12))
        throw RangeError("dt exceeds the tau/200 step guard");
    if (ctl.dt == 0.0) return e;

    const PhysicalParams& p = e.params;
    const std::size_t n = e.points.size();
    const long alive = e.alive_count();

    std::vector<FieldDerivatives> d0(n);
    std::vector<char> sing0;
    if (!ctl.semiclassical) {
        int singular = 0;
        d0 = compute_field_derivatives(e, s, ctl.par_mode, &singular, &sing0);
        check_collapse(singular, alive);
    }

    Ensemble out = e;
    const double dt = ctl.dt;
    std::atomic<int> bad{0};
    auto drop = [&](std::size_t i) {
        const bool gone = !sing0.empty() && sing0[i];
        if (gone) out.points[i].alive = false;
        return gone;
    };

    if (ctl.scheme == Scheme::RK4_FROZEN_FIELDS) {
        par::for_index(n, ctl.par_mode, [&](std::size_t i) {
            if (!e.points[i].alive || drop(i)) return;
            const FieldDerivatives& d = d0[i];
            const State y0 = state_of(e.points[i]);
            const State k1 = rates(y0, d, p, ctl);
            const State k2 = rates(axpy(y0, 0.5 * dt, k1), d, p, ctl);
            const State k3 = rates(axpy(y0, 0.5 * dt, k2), d, p, ctl);
            const State k4 = rates(axpy(y0, dt, k3), d, p, ctl);
            State y = y0;
            y.xi += dt / 6.0 * (k1.xi + 2.0 * k2.xi + 2.0 * k3.xi + k4.xi);
            y.eta += dt / 6.0 * (k1.eta + 2.0 * k2.eta + 2.0 * k3.eta + k4.eta);
            y.v_xi +=
                dt / 6.0 * (k1.v_xi + 2.0 * k2.v_xi + 2.0 * k3.v_xi + k4.v_xi);
            y.v_eta += dt / 6.0 *
                       (k1.v_eta + 2.0 * k2.v_eta + 2.0 * k3.v_eta + k4.v_eta);
            y.g += dt / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g);
            y.A += dt / 6.0 * (k1.A + 2.0 * k2.A + 2.0 * k3.A + k4.A);

            TrajectoryPoint& pt = out.points[i];
            pt.xi = y.xi;
            pt.eta = y.eta;
            pt.v_xi = y.v_xi;
            pt.v_eta = y.v_eta;
            pt.g = y.g;
            pt.A = y.A;
            pt.q_pot = ctl.semiclassical ? 0.0 : d.q;
            if (!(std::isfinite(y.xi) && std::isfinite(y.eta) &&
                  std::isfinite(y.v_xi) && std::isfinite(y.v_eta) &&
                  std::isfinite(y.g)))
                bad.fetch_add(1, std::memory_order_relaxed);
        });
    } else {  // Heun with a field refit at the predictor state
        std::vector<State> k1(n);
        Ensemble pred = e;
        par::for_index(n, ctl.par_mode, [&](std::size_t i) {
            if (!e.points[i].alive) return;
            if (!sing0.empty() && sing0[i]) {
                pred.points[i].alive = false;
                return;
            }
            const State y0 = state_of(e.points[i]);
            k1[i] = rates(y0, d0[i], p, ctl);
            const State y1 = axpy(y0, dt, k1[i]);
            TrajectoryPoint& pt = pred.points[i];
            pt.xi = y1.xi;
            pt.eta = y1.eta;
            pt.v_xi = y1.v_xi;
            pt.v_eta = y1.v_eta;
            pt.g = y1.g;
            pt.A = y1.A;
        });
        std::vector<FieldDerivatives> d1(n);
        std::vector<char> sing1;
        if (!ctl.semiclassical) {
            int singular = 0;
            d1 = compute_field_derivatives(pred, s, ctl.par_mode, &singular,
                                           &sing1);
            check_collapse(singular, alive);
        }
        par::for_index(n, ctl.par_mode, [&](std::size_t i) {
            if (!e.points[i].alive || drop(i)) return;
            if (!sing1.empty() && sing1[i]) {
                out.points[i].alive = false;
                return;
            }
            const State y0 = state_of(e.points[i]);
            const State k2 = rates(state_of(pred.points[i]), d1[i], p, ctl);
            State y = y0;
            y.xi += dt * 0.5 * (k1[i].xi + k2.xi);
            y.eta += dt * 0.5 * (k1[i].eta + k2.eta);
            y.v_xi += dt * 0.5 * (k1[i].v_xi + k2.v_xi);
            y.v_eta += dt * 0.5 * (k1[i].v_eta + k2.v_eta);
            y.g += dt * 0.5 * (k1[i].g + k2.g);
            y.A += dt * 0.5 * (k1[i].A + k2.A);
            TrajectoryPoint& pt = out.points[i];
            pt.xi = y.xi;
            pt.eta = y.eta;
            pt.v_xi = y.v_xi;
            pt.v_eta = y.v_eta;
            pt.g = y.g;
            pt.A = y.A;
            pt.q_pot = ctl.semiclassical ? 0.0 : d1[i].q;
            if (!(std::isfinite(y.xi) && std::isfinite(y.eta) &&
                  std::isfinite(y.v_xi) && std::isfinite(y.v_eta) &&
                  std::isfinite(y.g)))
                bad.fetch_add(1, std::memory_order_relaxed);
        });
    }

    if (bad.load() > 0)
        throw NumericError("non-finite trajectory state after step " +
                           std::to_string(e.step_count + 1));

    // Domain guard: far off-diagonal points carry negligible weight and
    // otherwise run away; drop them.
    const double eta_limit = 3.0 * out.half_w_eta;
    for (auto& pt : out.points)
        if (pt.alive && std::abs(pt.eta) > eta_limit) pt.alive = false;

    out.t = e.t + dt;
    out.step_count = e.step_count + 1;
    return out;
}

}  // namespace qlt
