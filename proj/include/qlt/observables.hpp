#pragma once

#include <vector>

#include "qlt/ensemble.hpp"

namespace qlt {

// One sampled row of the observable time series.
struct MomentRecord {
    double t = 0.0;
    double xi_peak = 0.0;
    double sigma_xi = 0.0;
    double sigma_eta = 0.0;
    double trace = 0.0;
    double purity = 0.0;
};

// (1/sqrt(2)) * integral exp(g(xi,0)) dxi, trapezoid over the eta = 0 row
// (the 1/sqrt(2) is the diagonal-line Jacobian). Throws MissingDiagonal when
// the grid carries no eta = 0 row.
double trace(const Ensemble& e);

// Tr rho^2 = 2-D quadrature of exp(2g) (unit rotation Jacobian). Cell areas
// come from logical-space position differences, which reduces to the plain
// trapezoid rule on an undeformed mesh and stays consistent once the
// Lagrangian grid has deformed.
double purity(const Ensemble& e);

struct WidthsFit {
    double xi_peak = 0.0;
    double sigma_xi = 0.0;
    double sigma_eta = 0.0;
    double residual = 0.0;     // weighted RMS of g minus the quadratic model
    bool non_gaussian = false; // residual > 0.1 (reported, not fatal)
};

// Least-squares fit of g to c - (xi-xb)^2/(2 sx^2) - eta^2/(2 se^2), weighted
// by exp(g) (weighted=false for diagnostics).
WidthsFit gaussian_widths(const Ensemble& e, bool weighted = true);

// Widths, trace and purity bundled at the ensemble's current time.
MomentRecord measure(const Ensemble& e);

struct DiagonalRow {
    long traj_id = 0;
    double t = 0.0;
    double xi = 0.0;
    double eta = 0.0;
    double g = 0.0;
    double v_xi = 0.0;
    double v_eta = 0.0;
};

// Rows for all alive eta = 0 points of one snapshot; traj_id is
// remesh_count * n_xi + column, so identities reset at each remesh and the
// remesh generation is recoverable from the id.
std::vector<DiagonalRow> diagonal_rows(const Ensemble& e);

// Concatenated diagonal rows over a recorded history (Fig-style trajectory
// export).
std::vector<DiagonalRow> diagonal_trajectories(
    const std::vector<Ensemble>& history);

}  // namespace qlt
