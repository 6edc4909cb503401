#include "qlt/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qlt/errors.hpp"
#include "qlt/observables.hpp"

namespace qlt {

namespace {

// Distance to the nearest alive logical neighbor, in mesh units so stretch
// along a finely spaced axis counts the same as along a coarse one; +inf
// when all neighbors are dead.
double neighbor_distance(const Ensemble& e, int i, int j) {
    const TrajectoryPoint& pt = e.points[e.idx(i, j)];
    const double ix = e.dxi > 0.0 ? 1.0 / e.dxi : 1.0;
    const double ie = e.deta > 0.0 ? 1.0 / e.deta : 1.0;
    double best = std::numeric_limits<double>::infinity();
    const int di[4] = {-1, 1, 0, 0};
    const int dj[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
        const int ii = i + di[k];
        const int jj = j + dj[k];
        if (ii < 0 || ii >= e.n_xi || jj < 0 || jj >= e.stored_rows()) continue;
        const TrajectoryPoint& nb = e.points[e.idx(ii, jj)];
        if (!nb.alive) continue;
        const double dx = (nb.xi - pt.xi) * ix;
        const double de = (nb.eta - pt.eta) * ie;
        best = std::min(best, std::hypot(dx, de));
    }
    return best;
}

}  // namespace

bool should_remesh(const Ensemble& e, const RemeshPolicy& policy) {
    if (policy.interval_steps >= 1 && e.step_count > 0 &&
        e.step_count % policy.interval_steps == 0)
        return true;

    const long total = static_cast<long>(e.points.size());
    const long dead = total - e.alive_count();
    if (dead * 20 > total) return true;  // > 5% swept out

    const double limit = policy.distortion_threshold;
    for (int j = 0; j < e.stored_rows(); ++j)
        for (int i = 0; i < e.n_xi; ++i) {
            if (!e.points[e.idx(i, j)].alive) continue;
            if (neighbor_distance(e, i, j) > limit) return true;
        }
    return false;
}

Ensemble enforce_parity(const Ensemble& e) {
    Ensemble out = e;
    if (e.economy) {
        for (int i = 0; i < e.n_xi; ++i) {
            TrajectoryPoint& pt = out.points[out.idx(i, 0)];
            pt.eta = 0.0;
            pt.A = 0.0;
            pt.v_eta = 0.0;
            pt.q_pot = 0.0;
        }
        return out;
    }

    const int half = (e.n_eta - 1) / 2;
    const double tol = 1e-6 * std::max(e.dxi, e.deta);
    for (int j = 0; j < half; ++j) {
        const int jm = e.n_eta - 1 - j;
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& lo = e.points[e.idx(i, j)];
            const TrajectoryPoint& hi = e.points[e.idx(i, jm)];
            if (std::abs(lo.xi - hi.xi) > tol || std::abs(lo.eta + hi.eta) > tol)
                throw NoMirror("rows " + std::to_string(j) + " and " +
                               std::to_string(jm) +
                               " are not eta-mirror images");
            TrajectoryPoint& a = out.points[out.idx(i, jm)];  // eta > 0 side
            TrajectoryPoint& b = out.points[out.idx(i, j)];
            const double xi_s = 0.5 * (lo.xi + hi.xi);
            const double eta_a = 0.5 * (hi.eta - lo.eta);
            const double g_s = 0.5 * (lo.g + hi.g);
            const double vx_s = 0.5 * (lo.v_xi + hi.v_xi);
            const double A_a = 0.5 * (hi.A - lo.A);
            const double ve_a = 0.5 * (hi.v_eta - lo.v_eta);
            const double q_a = 0.5 * (hi.q_pot - lo.q_pot);
            const bool live = lo.alive && hi.alive;
            a.xi = b.xi = xi_s;
            a.eta = eta_a;
            b.eta = -eta_a;
            a.g = b.g = g_s;
            a.v_xi = b.v_xi = vx_s;
            a.A = A_a;
            b.A = -A_a;
            a.v_eta = ve_a;
            b.v_eta = -ve_a;
            a.q_pot = q_a;
            b.q_pot = -q_a;
            a.alive = b.alive = live;
        }
    }
    for (int i = 0; i < e.n_xi; ++i) {
        TrajectoryPoint& pt = out.points[out.idx(i, half)];
        pt.eta = 0.0;
        pt.A = 0.0;
        pt.v_eta = 0.0;
        pt.q_pot = 0.0;
    }
    return out;
}

Ensemble remesh(const Ensemble& e, const RemeshPolicy& policy,
                const MwlsSettings& s, par::Mode mode) {
    // Wide resampling kernel; the stencil must cover it or the tail weights
    // truncate and the filter loses most of its attenuation.
    const double bw_factor = std::max(policy.smooth_bandwidth,
                                      s.bandwidth_factor);
    const int base_n =
        std::max(s.stencil_size(),
                 static_cast<int>(std::lround(4.5 * bw_factor * bw_factor)));
    long candidates = 0;
    for (const auto& pt : e.points) {
        if (!pt.alive) continue;
        ++candidates;
        if (e.economy && pt.eta > 0.0) ++candidates;
    }
    if (candidates < base_n)
        throw InsufficientPoints("remesh needs " + std::to_string(base_n) +
                                 " alive points, found " +
                                 std::to_string(candidates));

    // New box: re-centered on the fitted peak, optionally width-adapted.
    // The box tracks 4 fitted standard deviations per side: the packet spreads
    // along xi toward equilibrium while decoherence contracts it along eta, so
    // the eta extent must be allowed to shrink below the configured width or
    // the surviving density ends up resolved by only a couple of rows.
    const WidthsFit w = gaussian_widths(e);
    double center = std::isfinite(w.xi_peak) ? w.xi_peak : e.xi_center;
    double w_xi = policy.half_w_xi;
    double w_eta = policy.half_w_eta;
    if (policy.adapt_domain) {
        if (std::isfinite(w.sigma_xi) && w.sigma_xi > 0.0)
            w_xi = std::clamp(4.0 * w.sigma_xi, 0.2 * policy.half_w_xi,
                              4.0 * policy.half_w_xi);
        if (std::isfinite(w.sigma_eta) && w.sigma_eta > 0.0)
            w_eta = std::clamp(4.0 * w.sigma_eta, 0.2 * policy.half_w_eta,
                               4.0 * policy.half_w_eta);
    }

    Ensemble out;
    out.n_xi = e.n_xi;
    out.n_eta = e.n_eta;
    out.economy = e.economy;
    out.t = e.t;
    out.step_count = e.step_count;
    out.remesh_count = e.remesh_count + 1;
    out.params = e.params;
    out.xi_center = center;
    out.half_w_xi = w_xi;
    out.half_w_eta = w_eta;
    out.dxi = 2.0 * w_xi / (e.n_xi - 1);
    out.deta = 2.0 * w_eta / (e.n_eta - 1);
    const int rows = out.stored_rows();
    const int half = (e.n_eta - 1) / 2;
    out.points.assign(static_cast<std::size_t>(rows) * e.n_xi, {});
    const double hx = e.dxi > 0.0 ? e.dxi : 1.0;
    const double he = e.deta > 0.0 ? e.deta : 1.0;

    par::for_index(out.points.size(), mode, [&](std::size_t idx) {
        const int i = static_cast<int>(idx) % e.n_xi;
        const int j = static_cast<int>(idx) / e.n_xi;
        const double xi = center - w_xi + i * out.dxi;
        const double eta = out.economy ? j * out.deta : (j - half) * out.deta;
        const bool on_axis = (eta == 0.0);

        thread_local StencilScratch scratch;
        thread_local std::vector<StencilEntry> stencil;
        thread_local std::vector<double> xs, es;
        thread_local Eigen::VectorXd fg, fvx, fve, fa, fq;
        thread_local MwlsSolver sol_g, sol_ve, sol_vo, sol_ao;

        int want = base_n;
        bool ok = false;
        for (int attempt = 0;; ++attempt) {
            if (want > candidates) want = static_cast<int>(candidates);
            select_stencil_at(e, xi, eta, want, scratch, stencil);
            const double bw = local_bandwidth(stencil, bw_factor);
            const std::size_t m = stencil.size();
            xs.resize(m);
            es.resize(m);
            fg.resize(static_cast<Eigen::Index>(m));
            fvx.resize(static_cast<Eigen::Index>(m));
            fve.resize(static_cast<Eigen::Index>(m));
            fa.resize(static_cast<Eigen::Index>(m));
            fq.resize(static_cast<Eigen::Index>(m));
            for (std::size_t r = 0; r < m; ++r) {
                const StencilEntry& st = stencil[r];
                const TrajectoryPoint& sp = e.points[st.index];
                const double sgn = st.mirror ? -1.0 : 1.0;
                const Eigen::Index er = static_cast<Eigen::Index>(r);
                xs[r] = sp.xi;
                es[r] = st.mirror ? -sp.eta : sp.eta;
                fg[er] = sp.g;
                fvx[er] = sp.v_xi;
                fve[er] = sgn * sp.v_eta;
                fa[er] = sgn * sp.A;
                fq[er] = sgn * sp.q_pot;
            }
            const ParityClass pe =
                on_axis ? ParityClass::EVEN_IN_ETA : ParityClass::NONE;
            const ParityClass po =
                on_axis ? ParityClass::ODD_IN_ETA : ParityClass::NONE;
            const FitStatus st_g = sol_g.setup(xs, es, xi, eta, s.degree_g, pe,
                                               bw, s.cond_threshold, hx, he);
            const FitStatus st_ve = sol_ve.setup(xs, es, xi, eta, s.degree_v,
                                                 pe, bw, s.cond_threshold, hx,
                                                 he);
            const FitStatus st_vo = sol_vo.setup(xs, es, xi, eta, s.degree_v,
                                                 po, bw, s.cond_threshold, hx,
                                                 he);
            const FitStatus st_ao = sol_ao.setup(xs, es, xi, eta, 2, po, bw,
                                                 s.cond_threshold, hx, he);
            ok = st_g == FitStatus::ok && st_ve == FitStatus::ok &&
                 st_vo == FitStatus::ok && st_ao == FitStatus::ok;
            if (ok || attempt >= s.max_enlarge ||
                static_cast<long>(want) >= candidates)
                break;
            want += s.enlarge_step;
        }

        TrajectoryPoint& pt = out.points[idx];
        pt.xi = xi;
        pt.eta = eta;
        if (!ok) {
            // No usable interpolation here; a dead node is recoverable,
            // garbage field values are not.
            pt.alive = false;
            return;
        }
        pt.g = sol_g.solve(fg).value();
        pt.v_xi = sol_ve.solve(fvx).value();
        pt.v_eta = sol_vo.solve(fve).value();
        pt.A = sol_ao.solve(fa).value();
        pt.q_pot = sol_ao.solve(fq).value();
        pt.alive = std::isfinite(pt.g) && std::isfinite(pt.v_xi) &&
                   std::isfinite(pt.v_eta) && std::isfinite(pt.A) &&
                   std::isfinite(pt.q_pot);
    });

    return enforce_parity(out);
}

}  // namespace qlt
