#pragma once

#include <utility>

namespace qlt {

// Oscillator + bath parameters with the derived scales used everywhere else.
// Derived fields are filled in by derived_params(); treat them as read-only.
struct PhysicalParams {
    double m = 1.0;        // mass
    double omega = 1.0;    // bare oscillator frequency
    double gamma = 1.0;    // damping rate
    double kT = 2.5;       // thermal energy
    double hbar = 1.0;
    bool renormalize = true;  // use omega_eff^2 = omega^2 - 2*gamma*omega/pi

    // derived
    double lambda = 0.0;     // thermal de Broglie length, hbar/sqrt(2 m kT)
    double sigma0 = 0.0;     // ground-state width, sigma0^2 = hbar/(m omega)
    double tau = 0.0;        // period 2*pi/omega
    double k = 0.0;          // effective force constant m*omega_eff^2
    double beta = 0.0;       // 1/kT

    double omega_eff() const;  // sqrt(k/m)
};

struct RawParams {
    double m = 1.0;
    double omega = 1.0;
    double gamma = 1.0;
    double kT = 2.5;
    double hbar = 1.0;
    bool renormalize = true;
};

// Validates inputs and fills the derived fields.
// Throws RangeError on non-positive m/omega/kT/hbar, negative gamma, or a
// renormalized frequency with omega^2 - 2*gamma*omega/pi <= 0.
PhysicalParams derived_params(const RawParams& raw);

// Rotated frame: xi = (x+y)/sqrt(2), eta = (y-x)/sqrt(2). Unit Jacobian.
std::pair<double, double> rotate_to_xy(double xi, double eta);
std::pair<double, double> rotate_to_xieta(double x, double y);

}  // namespace qlt
