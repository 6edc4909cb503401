#pragma once

#include <cstddef>
#include <vector>

#include "qlt/params.hpp"

namespace qlt {

// One Lagrangian grid point of the density-matrix amplitude rho = exp(g + iA/hbar).
struct TrajectoryPoint {
    double xi = 0.0;
    double eta = 0.0;
    double g = 0.0;      // log-amplitude
    double A = 0.0;      // phase action (diagnostic only, units of hbar)
    double v_xi = 0.0;   // material velocity d(xi)/dt
    double v_eta = 0.0;  // material velocity d(eta)/dt
    double q_pot = 0.0;  // cached quantum potential at this point
    bool alive = true;   // false once swept past the domain guard
};

struct InitialCondition {
    double xi0 = 2.0;         // initial displacement along xi
    double sigma_init = 1.0;  // initial Gaussian width
    double g0 = 0.0;          // log normalization
};

// g0 chosen so that trace = (1/sqrt(2)) * integral exp(g(xi,0)) dxi = 1.
InitialCondition displaced_ground_state(const PhysicalParams& p, double xi0,
                                        double sigma_init = 0.0);

struct GridSpec {
    int n_xi = 41;
    int n_eta = 41;        // logical count, including eta < 0 rows
    double w_xi = 5.0;     // half-width about the xi center
    double w_eta = 5.0;    // half-width about eta = 0
    bool economy = false;  // store only eta >= 0 rows, mirror on demand
};

// Logically rectangular n_xi x n_eta point set. Storage is row-major with
// constant-eta rows: index = j*n_xi + i. In economy mode only the eta >= 0
// rows are stored (row j = 0 is the diagonal); the eta < 0 half is implied
// by the parity rules (g, v_xi even; A, v_eta, q_pot odd).
struct Ensemble {
    std::vector<TrajectoryPoint> points;
    int n_xi = 0;
    int n_eta = 0;
    bool economy = false;
    double t = 0.0;
    long step_count = 0;
    long remesh_count = 0;
    PhysicalParams params;

    // mesh bookkeeping, refreshed at init and remesh
    double xi_center = 0.0;
    double half_w_xi = 0.0;
    double half_w_eta = 0.0;
    double dxi = 0.0;   // spacing of the most recent uniform mesh
    double deta = 0.0;

    int stored_rows() const { return economy ? (n_eta + 1) / 2 : n_eta; }
    int diag_row() const { return economy ? 0 : (n_eta - 1) / 2; }
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(j) * n_xi + i;
    }
    std::size_t size() const { return points.size(); }
    long alive_count() const;
};

// Uniform grid over [xi0 - w_xi, xi0 + w_xi] x [-w_eta, +w_eta] carrying the
// displaced-ground-state fields: g Gaussian, A = 0, v_xi = 0, v_eta = 2*gamma*eta.
// Throws RangeError for even or too-small grid dimensions or sigma_init <= 0.
Ensemble init_ensemble(const PhysicalParams& p, const InitialCondition& ic,
                       const GridSpec& grid);

// Mirror an economy ensemble into an equivalent full-grid one (identity if
// already full). Used for output and for economy-vs-full validation.
Ensemble expand_full(const Ensemble& e);

}  // namespace qlt
