#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "qlt/ensemble.hpp"
#include "qlt/observables.hpp"
#include "qlt/parallel.hpp"
#include "qlt/params.hpp"

namespace qlt {

// Eulerian reference integrator for the master equation in (x, y):
//   d rho/dt = (i hbar/2m)(dxx - dyy) rho - (i/hbar)(V(x) - V(y)) rho
//              - gamma (x-y)(dx - dy) rho - (gamma/lambda^2)(x-y)^2 rho
// with V = k x^2 / 2 (k uses omega_eff). Spatial derivatives are 4th-order
// centered differences with zero ghost values; a smoothstep absorbing mask
// over the outer 10% of the box suppresses reflection of outgoing coherence.
struct OracleGrid {
    int nx = 81;
    int ny = 81;
    double x_min = 0.0, x_max = 0.0;  // same bounds on both axes
    double h = 0.0;
    std::vector<std::complex<double>> rho;  // row-major, ix*ny + iy
    std::vector<double> mask;               // absorption rate per node
    double max_mask = 0.0;
    double t = 0.0;

    double x_of(int i) const { return x_min + i * h; }
    std::size_t at(int ix, int iy) const {
        return static_cast<std::size_t>(ix) * ny + iy;
    }
};

// Displaced-ground-state rho on [-box_half, box_half]^2; nx must equal ny
// (the trace needs diagonal nodes) and be >= 9 for the 4th-order stencils.
OracleGrid make_oracle_grid(const PhysicalParams& p, const InitialCondition& ic,
                            int nx, int ny, double box_half,
                            double mask_rate = -1.0);  // default 5*omega

// Largest stable RK4 step: 2.6 divided by the summed magnitudes of the
// kinetic ((hbar/2m)*(16/3)/h^2 per axis), potential, advection, decoherence
// and mask rates over the box. Runs use a safety factor below this.
double oracle_max_dt(const OracleGrid& g, const PhysicalParams& p);

// One RK4 method-of-lines step. Throws StabilityViolation when dt exceeds
// oracle_max_dt, NumericError on non-finite field values.
OracleGrid oracle_step(const OracleGrid& g, const PhysicalParams& p, double dt,
                       par::Mode mode = par::Mode::openmp);

// max |rho(x,y) - conj(rho(y,x))| (reported, never corrected).
double hermiticity_drift(const OracleGrid& g);

// Trace (diagonal quadrature), purity (h^2 sum |rho|^2), and widths/peak from
// first and second moments of |rho| in the rotated frame.
MomentRecord oracle_moments(const OracleGrid& g);

// Closed-form solution of xi'' = -omega_eff^2 xi - 2 gamma xi' started at
// (xi0, 0): underdamped, critically damped, and overdamped branches.
double semiclassical_xi(const PhysicalParams& p, double xi0, double t);

// Equilibrium widths: sigma_xi_eq^2 = sigma0^2 coth(hbar omega beta / 2),
// sigma_eta_eq^2 = sigma0^2 tanh(hbar omega beta / 2), with the bare omega.
std::pair<double, double> equilibrium_widths(const PhysicalParams& p);

// Closed ODE system for a Gaussian ansatz
//   g = g0 - alpha (xi - xb)^2 / 2 - beta eta^2 / 2,  A = p eta + w (xi-xb) eta
// substituted into the master equation:
//   xb' = -p/m                 p'  = k xb - 2 gamma p
//   alpha' = 2 alpha w / m     beta' = 2 beta w / m - 4 gamma beta
//                                       + 4 gamma / lambda^2
//   w' = (w^2 - hbar^2 alpha beta)/m + k - 2 gamma w
//   g0' = w/m
// integrated by RK4 with step dt; the returned series samples every step.
std::vector<MomentRecord> gaussian_moment_oracle(const PhysicalParams& p,
                                                 const InitialCondition& ic,
                                                 double t_end, double dt);

}  // namespace qlt
