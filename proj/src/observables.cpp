#include "qlt/observables.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "qlt/errors.hpp"

namespace qlt {

namespace {

constexpr double kInvSqrt2 = 0.707106781186547524400844362104849039;

bool on_axis_row(const Ensemble& e, int j) {
    const double tol = 1e-9 * std::max(1.0, e.half_w_eta);
    for (int i = 0; i < e.n_xi; ++i)
        if (std::abs(e.points[e.idx(i, j)].eta) > tol) return false;
    return true;
}

// Trapezoid difference factor along one logical axis: half the centered
// position difference inside, half the one-sided difference at the ends.
template <class Pos>
double axis_factor(int idx, int count, Pos&& pos) {
    if (count < 2) return 0.0;
    const double lo = (idx > 0) ? pos(idx - 1) : pos(idx);
    const double hi = (idx < count - 1) ? pos(idx + 1) : pos(idx);
    return 0.5 * (hi - lo);
}

}  // namespace

double trace(const Ensemble& e) {
    const int j = e.diag_row();
    if (j < 0 || j >= e.stored_rows() || !on_axis_row(e, j))
        throw MissingDiagonal("ensemble has no eta = 0 row");
    double sum = 0.0;
    for (int i = 0; i < e.n_xi; ++i) {
        const TrajectoryPoint& pt = e.points[e.idx(i, j)];
        if (!pt.alive) continue;
        const double w = axis_factor(i, e.n_xi,
                                     [&](int ii) { return e.points[e.idx(ii, j)].xi; });
        sum += std::exp(pt.g) * w;
    }
    return kInvSqrt2 * sum;
}

double purity(const Ensemble& e) {
    const int rows = e.stored_rows();
    double sum = 0.0;
    for (int j = 0; j < rows; ++j) {
        // In economy mode row j = 0 is the interior diagonal of the full
        // grid; its logical-eta difference spans the implied mirror row, and
        // every stored row with eta > 0 represents its mirror as well.
        for (int i = 0; i < e.n_xi; ++i) {
            const TrajectoryPoint& pt = e.points[e.idx(i, j)];
            if (!pt.alive) continue;
            const double dxi_i = axis_factor(
                i, e.n_xi, [&](int ii) { return e.points[e.idx(ii, j)].xi; });
            const double deta_i = axis_factor(
                i, e.n_xi, [&](int ii) { return e.points[e.idx(ii, j)].eta; });
            double dxi_j, deta_j;
            if (e.economy && j == 0) {
                // centered difference against the implied mirror row
                const TrajectoryPoint& up =
                    e.points[e.idx(i, std::min(1, rows - 1))];
                dxi_j = 0.0;
                deta_j = (rows > 1) ? up.eta : 0.0;
            } else {
                dxi_j = axis_factor(
                    j, rows, [&](int jj) { return e.points[e.idx(i, jj)].xi; });
                deta_j = axis_factor(
                    j, rows, [&](int jj) { return e.points[e.idx(i, jj)].eta; });
            }
            const double area = std::abs(dxi_i * deta_j - dxi_j * deta_i);
            const double mult = (e.economy && j > 0) ? 2.0 : 1.0;
            sum += mult * area * std::exp(2.0 * pt.g);
        }
    }
    return sum;
}

WidthsFit gaussian_widths(const Ensemble& e, bool weighted) {
    // Fit g on {1, u, u^2, eta^2} with u centered on the weighted mean of xi.
    double wsum = 0.0, xsum = 0.0;
    for (const auto& pt : e.points) {
        if (!pt.alive) continue;
        const double w = weighted ? std::exp(pt.g) : 1.0;
        wsum += w;
        xsum += w * pt.xi;
    }
    WidthsFit out;
    if (wsum <= 0.0) {
        out.non_gaussian = true;
        out.sigma_xi = out.sigma_eta = out.xi_peak =
            std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const double xc = xsum / wsum;

    long n_alive = 0;
    for (const auto& pt : e.points)
        if (pt.alive) ++n_alive;
    Eigen::MatrixXd M(n_alive, 4);
    Eigen::VectorXd rhs(n_alive);
    long r = 0;
    for (const auto& pt : e.points) {
        if (!pt.alive) continue;
        const double sw = weighted ? std::exp(0.5 * pt.g) : 1.0;
        const double u = pt.xi - xc;
        M(r, 0) = sw;
        M(r, 1) = sw * u;
        M(r, 2) = sw * u * u;
        M(r, 3) = sw * pt.eta * pt.eta;
        rhs(r) = sw * pt.g;
        ++r;
    }
    Eigen::Vector4d c = M.colPivHouseholderQr().solve(rhs);

    double ss = 0.0;
    for (const auto& pt : e.points) {
        if (!pt.alive) continue;
        const double u = pt.xi - xc;
        const double model = c[0] + c[1] * u + c[2] * u * u + c[3] * pt.eta * pt.eta;
        const double w = weighted ? std::exp(pt.g) : 1.0;
        ss += w * (pt.g - model) * (pt.g - model);
    }
    out.residual = std::sqrt(ss / wsum);
    out.non_gaussian = out.residual > 0.1;

    if (c[2] < 0.0) {
        out.sigma_xi = std::sqrt(-0.5 / c[2]);
        out.xi_peak = xc - 0.5 * c[1] / c[2];
    } else {
        out.non_gaussian = true;
        out.sigma_xi = std::numeric_limits<double>::quiet_NaN();
        out.xi_peak = xc;
    }
    out.sigma_eta = (c[3] < 0.0) ? std::sqrt(-0.5 / c[3])
                                 : std::numeric_limits<double>::quiet_NaN();
    if (!(c[3] < 0.0)) out.non_gaussian = true;
    return out;
}

MomentRecord measure(const Ensemble& e) {
    const WidthsFit w = gaussian_widths(e);
    MomentRecord rec;
    rec.t = e.t;
    rec.xi_peak = w.xi_peak;
    rec.sigma_xi = w.sigma_xi;
    rec.sigma_eta = w.sigma_eta;
    rec.trace = trace(e);
    rec.purity = purity(e);
    return rec;
}

std::vector<DiagonalRow> diagonal_rows(const Ensemble& e) {
    const int j = e.diag_row();
    if (j < 0 || j >= e.stored_rows() || !on_axis_row(e, j))
        throw MissingDiagonal("ensemble has no eta = 0 row");
    std::vector<DiagonalRow> rows;
    rows.reserve(e.n_xi);
    for (int i = 0; i < e.n_xi; ++i) {
        const TrajectoryPoint& pt = e.points[e.idx(i, j)];
        if (!pt.alive) continue;
        rows.push_back({e.remesh_count * e.n_xi + i, e.t, pt.xi, pt.eta, pt.g,
                        pt.v_xi, pt.v_eta});
    }
    return rows;
}

std::vector<DiagonalRow> diagonal_trajectories(
    const std::vector<Ensemble>& history) {
    std::vector<DiagonalRow> all;
    for (const auto& e : history) {
        auto rows = diagonal_rows(e);
        all.insert(all.end(), rows.begin(), rows.end());
    }
    return all;
}

}  // namespace qlt
