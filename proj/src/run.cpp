#include "qlt/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qlt/csv.hpp"
#include "qlt/dynamics.hpp"
#include "qlt/errors.hpp"
#include "qlt/oracle.hpp"
#include "qlt/remesh.hpp"

#ifndef QLT_VERSION
#define QLT_VERSION "0.0.0"
#endif

namespace qlt {

namespace {

InitialCondition make_ic(const RunConfig& cfg, const PhysicalParams& p) {
    return displaced_ground_state(p, cfg.initial.xi0_over_sigma0 * p.sigma0,
                                  cfg.initial.sigma_init_over_sigma0 * p.sigma0);
}

void write_timeseries(const std::string& path,
                      const std::vector<MomentRecord>& series,
                      const PhysicalParams& p) {
    CsvWriter out(path, {"t", "xi_peak", "sigma_xi", "sigma_eta", "trace",
                         "purity"});
    for (const MomentRecord& r : series)
        out.row({r.t / p.tau, r.xi_peak / p.sigma0, r.sigma_xi / p.sigma0,
                 r.sigma_eta / p.sigma0, r.trace, r.purity});
}

void write_snapshot(const std::string& path, const Ensemble& e) {
    const PhysicalParams& p = e.params;
    const Ensemble full = expand_full(e);
    CsvWriter out(path, {"xi", "eta", "g", "A", "v_xi", "v_eta", "q_pot"});
    const double vs = p.tau / p.sigma0;
    for (const TrajectoryPoint& pt : full.points) {
        if (!pt.alive) continue;
        out.row({pt.xi / p.sigma0, pt.eta / p.sigma0, pt.g, pt.A / p.hbar,
                 pt.v_xi * vs, pt.v_eta * vs,
                 pt.q_pot / (p.hbar * p.omega)});
    }
}

// |a - b| relative to the oracle value, floored at 1e-3 sigma0 so near-zero
// crossings of xi_peak do not blow the ratio up.
double rel_diff(double traj, double oracle, double floor_scale) {
    return std::abs(traj - oracle) / std::max(std::abs(oracle), floor_scale);
}

double interp_series(const std::vector<MomentRecord>& s, double t,
                     double MomentRecord::*field) {
    if (s.empty()) return 0.0;
    if (t <= s.front().t) return s.front().*field;
    if (t >= s.back().t) return s.back().*field;
    std::size_t lo = 0, hi = s.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (s[mid].t <= t ? lo : hi) = mid;
    }
    const double span = s[hi].t - s[lo].t;
    const double f = span > 0.0 ? (t - s[lo].t) / span : 0.0;
    return (1.0 - f) * (s[lo].*field) + f * (s[hi].*field);
}

struct TrajectoryLeg {
    std::vector<MomentRecord> series;
    std::vector<DiagonalRow> diagonal;
    long remesh_count = 0;
};

TrajectoryLeg run_trajectory(const RunConfig& cfg, const PhysicalParams& p,
                             const InitialCondition& ic,
                             const std::filesystem::path& dir, bool quiet) {
    GridSpec grid;
    grid.n_xi = cfg.grid.n_xi;
    grid.n_eta = cfg.grid.n_eta;
    grid.w_xi = cfg.grid.half_width_xi_over_sigma0 * p.sigma0;
    grid.w_eta = cfg.grid.half_width_eta_over_sigma0 * p.sigma0;
    grid.economy = cfg.remesh.economy_mode;

    StepControl ctl;
    ctl.dt = cfg.stepping.dt_over_tau * p.tau;
    ctl.scheme = cfg.stepping.scheme;
    ctl.semiclassical = cfg.stepping.semiclassical;
    ctl.quantum_force_sign = cfg.dynamics.quantum_force_sign;
    ctl.par_mode = cfg.run.parallel;

    MwlsSettings mw;
    mw.degree_g = cfg.mwls.degree_g;
    mw.degree_v = cfg.mwls.degree_v;
    mw.stencil_min = cfg.mwls.stencil_min;
    mw.bandwidth_factor = cfg.mwls.bandwidth_factor;
    mw.single_stage_grad_q = cfg.mwls.single_stage_grad_q;
    mw.cond_threshold = cfg.mwls.cond_threshold;

    RemeshPolicy pol;
    pol.interval_steps = cfg.remesh.interval_steps;
    pol.distortion_threshold = cfg.remesh.distortion_threshold;
    pol.half_w_xi = grid.w_xi;
    pol.half_w_eta = grid.w_eta;
    pol.adapt_domain = cfg.remesh.adapt_domain;
    // Frozen-field runs keep their trajectory identities for the whole run.
    const bool remesh_on = cfg.remesh.enabled && !cfg.stepping.semiclassical;

    const long n_steps =
        std::llround(cfg.stepping.t_end_over_tau / cfg.stepping.dt_over_tau);

    Ensemble e = init_ensemble(p, ic, grid);

    TrajectoryLeg leg;
    CsvWriter traj_out((dir / "trajectories.csv").string(),
                       {"traj_id", "t", "xi", "eta", "g", "v_xi", "v_eta"});
    const double vs = p.tau / p.sigma0;
    int snap_index = 0;

    auto record = [&](const Ensemble& snap) {
        const MomentRecord m = measure(snap);
        if (!std::isfinite(m.trace) || !std::isfinite(m.xi_peak) ||
            !std::isfinite(m.sigma_xi) || !std::isfinite(m.sigma_eta))
            throw NumericError("dynamics: non-finite observables at t/tau = " +
                               std::to_string(snap.t / p.tau));
        leg.series.push_back(m);
        for (const DiagonalRow& r : diagonal_rows(snap)) {
            leg.diagonal.push_back(r);
            traj_out.row_id(r.traj_id,
                            {r.t / p.tau, r.xi / p.sigma0, r.eta / p.sigma0,
                             r.g, r.v_xi * vs, r.v_eta * vs});
        }
    };
    auto snapshot = [&](const Ensemble& snap) {
        write_snapshot(
            (dir / ("snapshot_" + std::to_string(snap_index++) + ".csv"))
                .string(),
            snap);
    };

    for (long i = 0; i <= n_steps; ++i) {
        if (i % cfg.output.record_every_steps == 0 || i == n_steps) record(e);
        if ((cfg.output.snapshot_every_steps > 0 &&
             i % cfg.output.snapshot_every_steps == 0) ||
            i == n_steps)
            snapshot(e);
        if (i == n_steps) break;
        try {
            if (remesh_on && should_remesh(e, pol))
                e = remesh(e, pol, mw, ctl.par_mode);
            try {
                e = step(e, ctl, mw);
            } catch (const StencilCollapse&) {
                if (!remesh_on) throw;
                e = remesh(e, pol, mw, ctl.par_mode);
                e = step(e, ctl, mw);
            }
        } catch (const NumericError& err) {
            throw NumericError("dynamics: step " + std::to_string(i + 1) +
                               " (t/tau = " +
                               std::to_string(e.t / p.tau) + "): " +
                               err.what());
        }
        if (!quiet && n_steps >= 10 && (i + 1) % (n_steps / 10) == 0)
            std::fprintf(stderr, "trajectory: step %ld/%ld, %ld remeshes\n",
                         i + 1, n_steps, e.remesh_count);
    }
    leg.remesh_count = e.remesh_count;
    write_timeseries((dir / "timeseries.csv").string(), leg.series, p);
    return leg;
}

struct OracleLeg {
    std::vector<MomentRecord> series;
    double hermiticity = 0.0;
};

OracleLeg run_oracle(const RunConfig& cfg, const PhysicalParams& p,
                     const InitialCondition& ic, bool quiet) {
    OracleGrid g = make_oracle_grid(p, ic, cfg.oracle.nx, cfg.oracle.ny,
                                    cfg.oracle.box_over_sigma0 * p.sigma0,
                                    cfg.oracle.mask_rate_over_omega * p.omega);
    const double t_end = cfg.stepping.t_end_over_tau * p.tau;
    OracleLeg leg;
    leg.series.push_back(oracle_moments(g));
    if (t_end <= 0.0) {
        leg.hermiticity = hermiticity_drift(g);
        return leg;
    }
    const double dt_bound = cfg.oracle.dt_safety * oracle_max_dt(g, p);
    const long n_steps =
        std::max<long>(1, static_cast<long>(std::ceil(t_end / dt_bound)));
    const double dt = t_end / n_steps;
    const double record_dt =
        cfg.output.record_every_steps * cfg.stepping.dt_over_tau * p.tau;
    double next_record = record_dt;

    for (long i = 0; i < n_steps; ++i) {
        try {
            g = oracle_step(g, p, dt, cfg.run.parallel);
        } catch (const NumericError& err) {
            throw NumericError("oracle: step " + std::to_string(i + 1) +
                               " (t/tau = " + std::to_string(g.t / p.tau) +
                               "): " + err.what());
        }
        if (g.t + 0.5 * dt >= next_record || i == n_steps - 1) {
            leg.series.push_back(oracle_moments(g));
            while (next_record <= g.t + 0.5 * dt) next_record += record_dt;
        }
        if (!quiet && n_steps >= 10 && (i + 1) % (n_steps / 10) == 0)
            std::fprintf(stderr, "oracle: step %ld/%ld\n", i + 1, n_steps);
    }
    leg.hermiticity = hermiticity_drift(g);
    return leg;
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const RunSummary& summary) {
    std::ofstream out(dir / "run_manifest.txt");
    if (!out)
        throw RangeError("cannot write manifest under " + dir.string());
    out << "# run manifest; reloadable as a config file\n";
    out << "# version " << QLT_VERSION << "\n";
    out << "# wall_seconds " << fmt_double(summary.wall_seconds) << "\n";
    if (cfg.run.mode != RunMode::trajectory)
        out << "# oracle_hermiticity_drift "
            << fmt_double(summary.hermiticity) << "\n";
    if (cfg.run.mode != RunMode::oracle)
        out << "# remesh_count " << summary.remesh_count << "\n";
    for (const auto& [key, value] : to_key_values(cfg))
        out << key << " = " << value << "\n";
}

}  // namespace

RunSummary run(const RunConfig& cfg, bool quiet) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.run.threads > 0) par::set_threads(cfg.run.threads);

    const PhysicalParams p = make_params(cfg);
    const InitialCondition ic = make_ic(cfg, p);
    std::filesystem::path dir(cfg.output.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw RangeError("cannot create output directory '" + dir.string() +
                         "': " + ec.message());

    RunSummary summary;
    summary.mode = cfg.run.mode;

    const bool want_traj = cfg.run.mode != RunMode::oracle;
    const bool want_oracle = cfg.run.mode == RunMode::oracle ||
                             (cfg.run.mode == RunMode::both &&
                              cfg.oracle.enabled);

    if (want_traj) {
        TrajectoryLeg leg = run_trajectory(cfg, p, ic, dir, quiet);
        summary.trajectory_series = std::move(leg.series);
        summary.diagonal = std::move(leg.diagonal);
        summary.remesh_count = leg.remesh_count;
    }
    if (want_oracle) {
        OracleLeg leg = run_oracle(cfg, p, ic, quiet);
        summary.oracle_series = std::move(leg.series);
        summary.hermiticity = leg.hermiticity;
        write_timeseries((dir / (want_traj ? "oracle_timeseries.csv"
                                           : "timeseries.csv"))
                             .string(),
                         summary.oracle_series, p);
    }

    if (want_traj && want_oracle) {
        CsvWriter cmp((dir / "comparison.csv").string(),
                      {"t", "rel_xi_peak", "rel_sigma_xi", "rel_sigma_eta"});
        const double floor_scale = 1e-3 * p.sigma0;
        for (const MomentRecord& r : summary.trajectory_series) {
            const double oxi =
                interp_series(summary.oracle_series, r.t, &MomentRecord::xi_peak);
            const double osx = interp_series(summary.oracle_series, r.t,
                                             &MomentRecord::sigma_xi);
            const double ose = interp_series(summary.oracle_series, r.t,
                                             &MomentRecord::sigma_eta);
            const double d_xi = rel_diff(r.xi_peak, oxi, floor_scale);
            const double d_sx = rel_diff(r.sigma_xi, osx, floor_scale);
            const double d_se = rel_diff(r.sigma_eta, ose, floor_scale);
            summary.max_rel_xi_peak = std::max(summary.max_rel_xi_peak, d_xi);
            summary.max_rel_sigma_xi = std::max(summary.max_rel_sigma_xi, d_sx);
            summary.max_rel_sigma_eta =
                std::max(summary.max_rel_sigma_eta, d_se);
            cmp.row({r.t / p.tau, d_xi, d_sx, d_se});
        }
    }

    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(dir, cfg, summary);
    if (!quiet) {
        std::fprintf(stderr, "done: mode=%s wall=%.1fs", to_string(cfg.run.mode),
                     summary.wall_seconds);
        const std::vector<MomentRecord>& s = want_traj
                                                 ? summary.trajectory_series
                                                 : summary.oracle_series;
        if (!s.empty())
            std::fprintf(stderr,
                         " final: xi_peak=%.4f sigma_xi=%.4f sigma_eta=%.4f "
                         "trace=%.4f purity=%.4f",
                         s.back().xi_peak / p.sigma0,
                         s.back().sigma_xi / p.sigma0,
                         s.back().sigma_eta / p.sigma0, s.back().trace,
                         s.back().purity);
        std::fprintf(stderr, "\n");
    }
    return summary;
}

}  // namespace qlt
