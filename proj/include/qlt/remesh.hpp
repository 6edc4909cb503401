#pragma once

#include "qlt/dynamics.hpp"
#include "qlt/ensemble.hpp"
#include "qlt/parallel.hpp"

namespace qlt {

struct RemeshPolicy {
    int interval_steps = 20;
    double distortion_threshold = 2.0;  // nearest-neighbor distance / mesh spacing
    double half_w_xi = 5.0;             // target domain half-widths
    double half_w_eta = 5.0;
    // Track the packet: resize the new box to 4x the fitted widths, clamped
    // to [0.2, 4] times the target half-widths. Growth follows the spreading
    // diagonal width, shrinking keeps the decohering eta direction resolved.
    bool adapt_domain = true;
    // Bandwidth multiple (of the local node spacing) for the resampling fits,
    // used when it exceeds the regular fit bandwidth. The wide kernel makes
    // each remesh a low-pass filter: grid-scale velocity noise in the
    // low-density tails feeds back through the quantum force and grows
    // exponentially if left in place, while fields polynomial up to the fit
    // degrees pass through the resampling unchanged.
    double smooth_bandwidth = 3.0;
};

// True when step_count is a positive multiple of interval_steps, when any
// alive point's nearest alive logical neighbor sits farther than
// distortion_threshold mesh units away, measured per axis against that
// axis's spacing (or all its neighbors are dead), or when more than 5% of
// points are dead.
bool should_remesh(const Ensemble& e, const RemeshPolicy& policy);

// Fresh uniform grid over the policy domain, re-centered in xi on the fitted
// density peak; g, v_xi, v_eta (and A, q_pot diagnostically) are interpolated
// from the old points by MWLS fits with the appropriate parity and the
// smooth_bandwidth kernel, then enforce_parity is applied. Nodes whose fits
// are singular or non-finite come back dead. t and step_count are preserved,
// remesh_count is incremented. Throws InsufficientPoints.
Ensemble remesh(const Ensemble& e, const RemeshPolicy& policy,
                const MwlsSettings& s = {}, par::Mode mode = par::Mode::openmp);

// Replace fields of every mirror pair by their even/odd projections
// (g, v_xi even; A, v_eta, q_pot odd) and pin the axis row to eta = 0,
// A = v_eta = q_pot = 0. Exact projection, idempotent bit-for-bit. Economy
// grids only carry the axis constraints. Throws NoMirror when a full grid is
// not eta-symmetric.
Ensemble enforce_parity(const Ensemble& e);

}  // namespace qlt
