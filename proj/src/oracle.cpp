#include "qlt/oracle.hpp"

#include <atomic>
#include <cmath>

#include "qlt/errors.hpp"

namespace qlt {

namespace {

constexpr double kSqrt2 = 1.414213562373095048801688724209698079;

double smoothstep01(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

}  // namespace

OracleGrid make_oracle_grid(const PhysicalParams& p, const InitialCondition& ic,
                            int nx, int ny, double box_half, double mask_rate) {
    if (nx != ny)
        throw RangeError("oracle grid must be square (trace needs x = y nodes)");
    if (nx < 9) throw RangeError("oracle grid needs at least 9 points per axis");
    if (!(box_half > 0.0)) throw RangeError("oracle box half-width must be positive");
    if (mask_rate < 0.0) mask_rate = 5.0 * p.omega;

    OracleGrid g;
    g.nx = nx;
    g.ny = ny;
    g.x_min = -box_half;
    g.x_max = box_half;
    g.h = 2.0 * box_half / (nx - 1);
    g.rho.resize(static_cast<std::size_t>(nx) * ny);
    g.mask.resize(g.rho.size());
    g.max_mask = 0.0;

    const double s2 = ic.sigma_init * ic.sigma_init;
    const double edge = 0.9 * box_half;
    const double ramp = 0.1 * box_half;
    for (int ix = 0; ix < nx; ++ix) {
        const double x = g.x_of(ix);
        const double mx = mask_rate * smoothstep01((std::abs(x) - edge) / ramp);
        for (int iy = 0; iy < ny; ++iy) {
            const double y = g.x_of(iy);
            const auto [xi, eta] = rotate_to_xieta(x, y);
            const double u = xi - ic.xi0;
            g.rho[g.at(ix, iy)] =
                std::exp(ic.g0 - (u * u + eta * eta) / (2.0 * s2));
            const double my =
                mask_rate * smoothstep01((std::abs(y) - edge) / ramp);
            g.mask[g.at(ix, iy)] = mx + my;
            g.max_mask = std::max(g.max_mask, mx + my);
        }
    }
    g.t = 0.0;
    return g;
}

double oracle_max_dt(const OracleGrid& g, const PhysicalParams& p) {
    const double h = g.h;
    const double L = std::max(std::abs(g.x_min), std::abs(g.x_max));
    const double max_xy = 2.0 * L;                   // max |x - y|
    const double kin = 2.0 * (p.hbar / (2.0 * p.m)) * (16.0 / 3.0) / (h * h);
    const double pot = 0.5 * p.k / p.hbar * L * L;   // max |V(x)-V(y)|/hbar
    const double adv = p.gamma * max_xy * 2.0 * 1.372 / h;
    const double dec = p.gamma / (p.lambda * p.lambda) * max_xy * max_xy;
    const double sum = kin + pot + adv + dec + g.max_mask;
    return 2.6 / sum;
}

namespace {

// 4th-order centered first/second differences with zero ghost values.
inline std::complex<double> at_or_zero(const std::vector<std::complex<double>>& f,
                                       long i, long n, long stride, long base) {
    if (i < 0 || i >= n) return {0.0, 0.0};
    return f[static_cast<std::size_t>(base + i * stride)];
}

void oracle_rhs(const OracleGrid& g, const PhysicalParams& p,
                const std::vector<std::complex<double>>& f,
                std::vector<std::complex<double>>& out, par::Mode mode) {
    const int nx = g.nx, ny = g.ny;
    const double h = g.h;
    const double inv12h = 1.0 / (12.0 * h);
    const double inv12h2 = 1.0 / (12.0 * h * h);
    const std::complex<double> i_unit(0.0, 1.0);
    const double half_k = 0.5 * p.k;
    const double gam_l2 = p.gamma / (p.lambda * p.lambda);

    par::for_index(static_cast<std::size_t>(nx), mode, [&](std::size_t sx) {
        const int ix = static_cast<int>(sx);
        const double x = g.x_of(ix);
        for (int iy = 0; iy < ny; ++iy) {
            const double y = g.x_of(iy);
            const std::size_t c = g.at(ix, iy);
            const long base_row = static_cast<long>(ix) * ny;

            auto fx = [&](long di) {
                return at_or_zero(f, ix + di, nx, ny, iy);
            };
            auto fy = [&](long di) {
                return at_or_zero(f, iy + di, ny, 1, base_row);
            };
            const std::complex<double> f0 = f[c];

            const std::complex<double> dxx =
                (-fx(-2) + 16.0 * fx(-1) - 30.0 * f0 + 16.0 * fx(1) - fx(2)) *
                inv12h2;
            const std::complex<double> dyy =
                (-fy(-2) + 16.0 * fy(-1) - 30.0 * f0 + 16.0 * fy(1) - fy(2)) *
                inv12h2;
            const std::complex<double> dx =
                (fx(-2) - 8.0 * fx(-1) + 8.0 * fx(1) - fx(2)) * inv12h;
            const std::complex<double> dy =
                (fy(-2) - 8.0 * fy(-1) + 8.0 * fy(1) - fy(2)) * inv12h;

            const double xmy = x - y;
            std::complex<double> r =
                i_unit * (p.hbar / (2.0 * p.m)) * (dxx - dyy) -
                i_unit / p.hbar * half_k * (x * x - y * y) * f0 -
                p.gamma * xmy * (dx - dy) - gam_l2 * xmy * xmy * f0 -
                g.mask[c] * f0;
            out[c] = r;
        }
    });
}

}  // namespace

OracleGrid oracle_step(const OracleGrid& g, const PhysicalParams& p, double dt,
                       par::Mode mode) {
    if (!(dt > 0.0)) throw RangeError("oracle dt must be positive");
    const double bound = oracle_max_dt(g, p);
    if (dt > bound)
        throw StabilityViolation("oracle dt " + std::to_string(dt) +
                                 " exceeds the RK4 bound " +
                                 std::to_string(bound));

    const std::size_t n = g.rho.size();
    OracleGrid out = g;
    std::vector<std::complex<double>> k1(n), k2(n), k3(n), k4(n), tmp(n);

    oracle_rhs(g, p, g.rho, k1, mode);
    par::for_index(n, mode, [&](std::size_t i) {
        tmp[i] = g.rho[i] + 0.5 * dt * k1[i];
    });
    oracle_rhs(g, p, tmp, k2, mode);
    par::for_index(n, mode, [&](std::size_t i) {
        tmp[i] = g.rho[i] + 0.5 * dt * k2[i];
    });
    oracle_rhs(g, p, tmp, k3, mode);
    par::for_index(n, mode, [&](std::size_t i) {
        tmp[i] = g.rho[i] + dt * k3[i];
    });
    oracle_rhs(g, p, tmp, k4, mode);

    std::atomic<int> bad{0};
    par::for_index(n, mode, [&](std::size_t i) {
        out.rho[i] = g.rho[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] +
                                            k4[i]);
        if (!std::isfinite(out.rho[i].real()) || !std::isfinite(out.rho[i].imag()))
            bad.fetch_add(1, std::memory_order_relaxed);
    });
    if (bad.load() > 0)
        throw NumericError("non-finite oracle field at t = " + std::to_string(g.t));
    out.t = g.t + dt;
    return out;
}

double hermiticity_drift(const OracleGrid& g) {
    double worst = 0.0;
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = ix; iy < g.ny; ++iy) {
            const std::complex<double> d =
                g.rho[g.at(ix, iy)] - std::conj(g.rho[g.at(iy, ix)]);
            worst = std::max(worst, std::abs(d));
        }
    return worst;
}

MomentRecord oracle_moments(const OracleGrid& g) {
    MomentRecord rec;
    rec.t = g.t;

    // trace = integral of rho(x, x) dx, sampled at the grid diagonal.
    double tr = 0.0;
    for (int i = 0; i < g.nx; ++i) tr += g.rho[g.at(i, i)].real();
    rec.trace = tr * g.h;

    double w = 0.0, sx = 0.0, se = 0.0, sxx = 0.0, see = 0.0, pur = 0.0;
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy) {
            const double a = std::abs(g.rho[g.at(ix, iy)]);
            const auto [xi, eta] = rotate_to_xieta(g.x_of(ix), g.x_of(iy));
            w += a;
            sx += a * xi;
            se += a * eta;
            pur += a * a;
        }
    const double xi_bar = sx / w;
    const double eta_bar = se / w;
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy) {
            const double a = std::abs(g.rho[g.at(ix, iy)]);
            const auto [xi, eta] = rotate_to_xieta(g.x_of(ix), g.x_of(iy));
            sxx += a * (xi - xi_bar) * (xi - xi_bar);
            see += a * (eta - eta_bar) * (eta - eta_bar);
        }
    rec.xi_peak = xi_bar;
    rec.sigma_xi = std::sqrt(sxx / w);
    rec.sigma_eta = std::sqrt(see / w);
    rec.purity = pur * g.h * g.h;
    return rec;
}

double semiclassical_xi(const PhysicalParams& p, double xi0, double t) {
    const double w = p.omega_eff();
    const double gam = p.gamma;
    const double decay = std::exp(-gam * t);
    const double tol = 1e-12 * w;
    if (gam < w - tol) {
        const double wd = std::sqrt(w * w - gam * gam);
        return xi0 * decay * (std::cos(wd * t) + gam / wd * std::sin(wd * t));
    }
    if (gam > w + tol) {
        const double kp = std::sqrt(gam * gam - w * w);
        return xi0 * decay * (std::cosh(kp * t) + gam / kp * std::sinh(kp * t));
    }
    return xi0 * decay * (1.0 + gam * t);
}

std::pair<double, double> equilibrium_widths(const PhysicalParams& p) {
    const double arg = 0.5 * p.hbar * p.omega * p.beta;
    const double th = std::tanh(arg);
    const double s02 = p.sigma0 * p.sigma0;
    return {std::sqrt(s02 / th), std::sqrt(s02 * th)};
}

std::vector<MomentRecord> gaussian_moment_oracle(const PhysicalParams& p,
                                                 const InitialCondition& ic,
                                                 double t_end, double dt) {
    if (!(dt > 0.0)) throw RangeError("moment oracle dt must be positive");
    struct Y {
        double xb, pm, alpha, beta, w, g0;
    };
    const double l2 = p.lambda * p.lambda;
    const double h2 = p.hbar * p.hbar;
    auto f = [&](const Y& y) {
        return Y{-y.pm / p.m,
                 p.k * y.xb - 2.0 * p.gamma * y.pm,
                 2.0 * y.alpha * y.w / p.m,
                 2.0 * y.beta * y.w / p.m - 4.0 * p.gamma * y.beta +
                     4.0 * p.gamma / l2,
                 (y.w * y.w - h2 * y.alpha * y.beta) / p.m + p.k -
                     2.0 * p.gamma * y.w,
                 y.w / p.m};
    };
    auto axpy = [](const Y& y, double h, const Y& d) {
        return Y{y.xb + h * d.xb,       y.pm + h * d.pm,
                 y.alpha + h * d.alpha, y.beta + h * d.beta,
                 y.w + h * d.w,         y.g0 + h * d.g0};
    };
    auto record = [&](double t, const Y& y) {
        MomentRecord r;
        r.t = t;
        r.xi_peak = y.xb;
        r.sigma_xi = 1.0 / std::sqrt(y.alpha);
        r.sigma_eta = 1.0 / std::sqrt(y.beta);
        r.trace = std::exp(y.g0) * std::sqrt(2.0 * 3.141592653589793 / y.alpha) /
                  kSqrt2;
        r.purity = r.trace * r.trace * r.sigma_eta / r.sigma_xi;
        return r;
    };

    const double s2 = ic.sigma_init * ic.sigma_init;
    Y y{ic.xi0, 0.0, 1.0 / s2, 1.0 / s2, 0.0, ic.g0};
    std::vector<MomentRecord> series;
    const long n = static_cast<long>(std::ceil(t_end / dt - 1e-12));
    series.reserve(n + 1);
    series.push_back(record(0.0, y));
    double t = 0.0;
    for (long i = 0; i < n; ++i) {
        const double hstep = std::min(dt, t_end - t);
        const Y k1 = f(y);
        const Y k2 = f(axpy(y, 0.5 * hstep, k1));
        const Y k3 = f(axpy(y, 0.5 * hstep, k2));
        const Y k4 = f(axpy(y, hstep, k3));
        Y next = y;
        next.xb += hstep / 6.0 * (k1.xb + 2.0 * k2.xb + 2.0 * k3.xb + k4.xb);
        next.pm += hstep / 6.0 * (k1.pm + 2.0 * k2.pm + 2.0 * k3.pm + k4.pm);
        next.alpha +=
            hstep / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha);
        next.beta +=
            hstep / 6.0 * (k1.beta + 2.0 * k2.beta + 2.0 * k3.beta + k4.beta);
        next.w += hstep / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
        next.g0 += hstep / 6.0 * (k1.g0 + 2.0 * k2.g0 + 2.0 * k3.g0 + k4.g0);
        y = next;
        t += hstep;
        series.push_back(record(t, y));
    }
    return series;
}

}  // namespace qlt
