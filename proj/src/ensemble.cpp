#include "qlt/ensemble.hpp"

#include <cmath>

#include "qlt/errors.hpp"

namespace qlt {

long Ensemble::alive_count() const {
    long n = 0;
    for (const auto& pt : points)
        if (pt.alive) ++n;
    return n;
}

InitialCondition displaced_ground_state(const PhysicalParams& p, double xi0,
                                        double sigma_init) {
    InitialCondition ic;
    ic.xi0 = xi0;
    ic.sigma_init = sigma_init > 0.0 ? sigma_init : p.sigma0;
    ic.g0 = -std::log(std::sqrt(3.141592653589793238462643) * ic.sigma_init);
    return ic;
}

Ensemble init_ensemble(const PhysicalParams& p, const InitialCondition& ic,
                       const GridSpec& grid) {
    if (grid.n_xi < 5 || grid.n_eta < 5)
        throw RangeError("grid dimensions must be at least 5");
    if (grid.n_xi % 2 == 0 || grid.n_eta % 2 == 0)
        throw RangeError("grid dimensions must be odd so the grid contains "
                         "the eta=0 line and the xi0 column");
    if (!(grid.w_xi > 0.0) || !(grid.w_eta > 0.0))
        throw RangeError("grid half-widths must be positive");
    if (!(ic.sigma_init > 0.0)) throw RangeError("sigma_init must be positive");

    Ensemble e;
    e.n_xi = grid.n_xi;
    e.n_eta = grid.n_eta;
    e.economy = grid.economy;
    e.params = p;
    e.xi_center = ic.xi0;
    e.half_w_xi = grid.w_xi;
    e.half_w_eta = grid.w_eta;
    e.dxi = 2.0 * grid.w_xi / (grid.n_xi - 1);
    e.deta = 2.0 * grid.w_eta / (grid.n_eta - 1);

    const double s2 = ic.sigma_init * ic.sigma_init;
    const int rows = e.stored_rows();
    const int half = (grid.n_eta - 1) / 2;
    e.points.resize(static_cast<std::size_t>(rows) * grid.n_xi);
    for (int j = 0; j < rows; ++j) {
        // (j - half)*deta keeps the diagonal row at exactly eta = 0.0
        const double eta = e.economy ? j * e.deta : (j - half) * e.deta;
        for (int i = 0; i < grid.n_xi; ++i) {
            TrajectoryPoint& pt = e.points[e.idx(i, j)];
            pt.xi = ic.xi0 - grid.w_xi + i * e.dxi;
            pt.eta = eta;
            const double u = pt.xi - ic.xi0;
            pt.g = ic.g0 - (u * u + eta * eta) / (2.0 * s2);
            pt.A = 0.0;
            pt.v_xi = 0.0;
            pt.v_eta = 2.0 * p.gamma * eta;  // material velocity at p_eta = 0
            pt.q_pot = p.hbar * p.hbar / p.m * u * eta / (s2 * s2);
            pt.alive = true;
        }
    }
    return e;
}

Ensemble expand_full(const Ensemble& e) {
    if (!e.economy) return e;
    Ensemble full = e;
    full.economy = false;
    full.points.assign(static_cast<std::size_t>(e.n_eta) * e.n_xi, {});
    const int half = (e.n_eta - 1) / 2;  // stored rows above/on the diagonal
    for (int j = 0; j <= half; ++j) {
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& src = e.points[e.idx(i, j)];
            full.points[full.idx(i, half + j)] = src;
            TrajectoryPoint mir = src;
            mir.eta = -src.eta;
            mir.A = -src.A;
            mir.v_eta = -src.v_eta;
            mir.q_pot = -src.q_pot;
            full.points[full.idx(i, half - j)] = mir;
        }
    }
    return full;
}

}  // namespace qlt
