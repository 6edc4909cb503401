#pragma once

#include <array>
#include <utility>
#include <vector>

#include "qlt/ensemble.hpp"
#include "qlt/mwls.hpp"
#include "qlt/parallel.hpp"

namespace qlt {

// Fitted field quantities at one point, frozen for the duration of a step.
// Besides the values at the fit center, the snapshot carries local
// polynomial models of Q and div v so substeps can evaluate the frozen
// fields at displaced positions instead of extrapolating them as constants;
// holding them constant costs a first-order trace error that dominates
// everything else at default dt.
struct FieldDerivatives {
    double g_x = 0.0;    // dg/dxi
    double g_e = 0.0;    // dg/deta
    double g_xe = 0.0;   // d2g/dxi deta
    double q = 0.0;      // quantum potential
    double q_x = 0.0;    // dQ/dxi
    double q_e = 0.0;    // dQ/deta
    double div_v = 0.0;  // dv_xi/dxi + dv_eta/deta

    double x0 = 0.0, e0 = 0.0;  // fit center
    // Graded-lex coefficients up to total degree 3 in (xi - x0, eta - e0):
    // 1, dx, de, dx^2, dx de, de^2, dx^3, dx^2 de, dx de^2, de^3.
    std::array<double, 10> q_poly{};
    std::array<double, 10> div_poly{};
    bool has_poly = false;

    // Snapshot values at (xi, eta): q, q_x, q_e, div_v re-evaluated from the
    // local models when present, the center values otherwise. g derivatives
    // are only consumed at the center and stay as-is.
    FieldDerivatives at(double xi, double eta) const;
};

enum class Scheme { RK4_FROZEN_FIELDS, HEUN };

struct StepControl {
    double dt = 0.0;
    Scheme scheme = Scheme::RK4_FROZEN_FIELDS;
    // Zeroes the quantum potential and its gradient, freezes g and A, and
    // skips all field fits; each trajectory then follows the exactly damped
    // oscillator flow.
    bool semiclassical = false;
    // +1 is the Euler-Lagrange-consistent quantum-force sign; -1 selects the
    // alternate convention, kept for side-by-side comparison.
    double quantum_force_sign = 1.0;
    par::Mode par_mode = par::Mode::openmp;
};

struct MwlsSettings {
    int degree_g = 2;
    int degree_v = 3;
    int stencil_min = 12;
    double bandwidth_factor = 1.5;
    // Take dQ/dxi, dQ/deta directly from third derivatives of the g fit
    // (requires degree_g >= 3) instead of the default two-stage route
    // (pointwise Q from the g fit, then a quadratic fit of the Q field).
    bool single_stage_grad_q = false;
    double cond_threshold = 1e10;
    int enlarge_step = 4;
    int max_enlarge = 3;

    int stencil_size() const;  // max(2 x largest basis, stencil_min)
};

// Q = (hbar^2/m) (d2g/dxi deta + dg/dxi * dg/deta) at the fit center.
double quantum_potential(const LocalFit& g_fit, const PhysicalParams& p);

// a_xi  = -omega_eff^2 xi  + s*q_e/m - 2 gamma v_xi
// a_eta = -omega_eff^2 eta + s*q_x/m + 2 gamma v_eta
std::pair<double, double> accelerations(const TrajectoryPoint& pt,
                                        const FieldDerivatives& d,
                                        const PhysicalParams& p,
                                        const StepControl& ctl);

// Lagrangian rate dg/dt = -div_v/2 + gamma - (2 gamma/lambda^2) eta^2.
double g_rate(const TrajectoryPoint& pt, const FieldDerivatives& d,
              const PhysicalParams& p);

// dA/dt = -m v_xi v_eta + 2 m gamma v_xi eta + k xi eta - Q (diagnostic).
double action_rate(const TrajectoryPoint& pt, const FieldDerivatives& d,
                   const PhysicalParams& p);

// MWLS fits of g and the velocity fields on the frozen ensemble snapshot.
// On-axis (eta = 0) fits use parity-restricted bases (g, v_xi even; v_eta,
// Q odd); off-axis fits use the full basis with mirror-signed samples in
// economy mode. Per-point stencils enlarge on SingularFit up to
// max_enlarge times; points still singular are counted into
// *singular_count and flagged nonzero in *singular_mask (fit results of the
// last attempt are kept). Entries for dead points are zero.
std::vector<FieldDerivatives> compute_field_derivatives(
    const Ensemble& e, const MwlsSettings& s, par::Mode mode,
    int* singular_count = nullptr, std::vector<char>* singular_mask = nullptr);

// Advance every alive point by ctl.dt: field fits on the frozen snapshot,
// then RK4 (frozen field models evaluated at the substep positions) or Heun
// with a field refit at the predictor state. Points whose fits stay singular
// after stencil enlargement are marked dead instead of integrated with
// unusable derivatives, as are points with |eta| beyond 3x the mesh
// half-width. Throws RangeError (dt out of [0, tau/200]), StencilCollapse
// (> 10% of alive points singular), NumericError (non-finite state).
Ensemble step(const Ensemble& e, const StepControl& ctl,
              const MwlsSettings& s = {});

}  // namespace qlt
