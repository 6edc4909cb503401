#include "qlt/params.hpp"

#include <cmath>

#include "qlt/errors.hpp"

namespace qlt {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kInvSqrt2 = 0.707106781186547524400844362104849039;
}  // namespace

double PhysicalParams::omega_eff() const { return std::sqrt(k / m); }

PhysicalParams derived_params(const RawParams& raw) {
    if (!(raw.m > 0.0)) throw RangeError("mass must be positive");
    if (!(raw.omega > 0.0)) throw RangeError("omega must be positive");
    if (!(raw.gamma >= 0.0)) throw RangeError("gamma must be non-negative");
    if (!(raw.kT > 0.0)) throw RangeError("kT must be positive");
    if (!(raw.hbar > 0.0)) throw RangeError("hbar must be positive");

    PhysicalParams p;
    p.m = raw.m;
    p.omega = raw.omega;
    p.gamma = raw.gamma;
    p.kT = raw.kT;
    p.hbar = raw.hbar;
    p.renormalize = raw.renormalize;

    p.lambda = raw.hbar / std::sqrt(2.0 * raw.m * raw.kT);
    p.sigma0 = std::sqrt(raw.hbar / (raw.m * raw.omega));
    p.tau = 2.0 * kPi / raw.omega;
    p.beta = 1.0 / raw.kT;

    double w2 = raw.omega * raw.omega;
    if (raw.renormalize) {
        w2 = raw.omega * raw.omega - 2.0 * raw.gamma * raw.omega / kPi;
        if (!(w2 > 0.0))
            throw RangeError("renormalized frequency squared is non-positive; "
                             "reduce gamma or disable renormalization");
    }
    p.k = raw.m * w2;
    return p;
}

std::pair<double, double> rotate_to_xy(double xi, double eta) {
    return {(xi - eta) * kInvSqrt2, (xi + eta) * kInvSqrt2};
}

std::pair<double, double> rotate_to_xieta(double x, double y) {
    return {(x + y) * kInvSqrt2, (y - x) * kInvSqrt2};
}

}  // namespace qlt
