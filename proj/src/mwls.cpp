#include "qlt/mwls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qlt {

std::vector<Monomial> basis_monomials(int degree, ParityClass parity) {
    std::vector<Monomial> out;
    for (int d = 0; d <= degree; ++d) {
        for (int b = 0; b <= d; ++b) {
            if (parity == ParityClass::EVEN_IN_ETA && b % 2 != 0) continue;
            if (parity == ParityClass::ODD_IN_ETA && b % 2 != 1) continue;
            out.push_back({d - b, b});
        }
    }
    return out;
}

double LocalFit::value() const {
    for (std::size_t k = 0; k < monomials.size(); ++k)
        if (monomials[k].a == 0 && monomials[k].b == 0) return coeffs[k];
    return 0.0;
}

double LocalFit::derivative(int a, int b) const {
    if (a + b > degree)
        throw OrderTooHigh("derivative order exceeds fit degree");
    for (std::size_t k = 0; k < monomials.size(); ++k) {
        if (monomials[k].a == a && monomials[k].b == b) {
            double fact = 1.0;
            for (int i = 2; i <= a; ++i) fact *= i;
            for (int i = 2; i <= b; ++i) fact *= i;
            return coeffs[k] * fact;
        }
    }
    return 0.0;  // parity-filtered monomial: derivative vanishes by symmetry
}

namespace {

bool entry_less(const StencilEntry& lhs, const StencilEntry& rhs) {
    if (lhs.dist2 != rhs.dist2) return lhs.dist2 < rhs.dist2;
    if (lhs.index != rhs.index) return lhs.index < rhs.index;
    return lhs.mirror < rhs.mirror;
}

}  // namespace

void select_stencil_at(const Ensemble& e, double xi, double eta, int n_min,
                       StencilScratch& scratch, std::vector<StencilEntry>& out) {
    auto& all = scratch.all;
    all.clear();
    const double ix = e.dxi > 0.0 ? 1.0 / e.dxi : 1.0;
    const double ie = e.deta > 0.0 ? 1.0 / e.deta : 1.0;
    const int n = static_cast<int>(e.points.size());
    for (int i = 0; i < n; ++i) {
        const TrajectoryPoint& pt = e.points[i];
        if (!pt.alive) continue;
        const double dx = (pt.xi - xi) * ix;
        const double de = (pt.eta - eta) * ie;
        all.push_back({i, false, dx * dx + de * de});
        if (e.economy && pt.eta > 0.0) {
            const double dm = (-pt.eta - eta) * ie;
            all.push_back({i, true, dx * dx + dm * dm});
        }
    }
    if (static_cast<int>(all.size()) < n_min)
        throw InsufficientPoints("stencil needs " + std::to_string(n_min) +
                                 " points, only " + std::to_string(all.size()) +
                                 " alive");
    const auto mid = all.begin() + n_min;
    std::nth_element(all.begin(), mid - 1, all.end(), entry_less);
    std::sort(all.begin(), mid, entry_less);
    out.assign(all.begin(), mid);
}

std::vector<StencilEntry> select_stencil_at(const Ensemble& e, double xi,
                                            double eta, int n_min) {
    StencilScratch scratch;
    std::vector<StencilEntry> out;
    select_stencil_at(e, xi, eta, n_min, scratch, out);
    return out;
}

std::vector<StencilEntry> select_stencil(const Ensemble& e, int idx, int n_min) {
    const TrajectoryPoint& pt = e.points[idx];
    return select_stencil_at(e, pt.xi, pt.eta, n_min);
}

double local_bandwidth(const std::vector<StencilEntry>& stencil, double factor) {
    // stencil is distance-sorted; entry 0 is typically the center itself.
    const std::size_t k = std::min<std::size_t>(4, stencil.size() - 1);
    double d = std::sqrt(stencil[k].dist2);
    if (d <= 0.0) d = std::sqrt(stencil.back().dist2);
    return factor * d;
}

FitStatus MwlsSolver::setup(const std::vector<double>& xs,
                            const std::vector<double>& es, double xi_c,
                            double eta_c, int degree, ParityClass parity,
                            double bandwidth, double cond_threshold, double hx,
                            double he) {
    if (degree < 0 || degree > 7) throw RangeError("fit degree must be in [0, 7]");
    if (!(hx > 0.0) || !(he > 0.0))
        throw RangeError("per-axis distance units must be positive");
    xi_c_ = xi_c;
    eta_c_ = eta_c;
    degree_ = degree;
    parity_ = parity;
    mono_ = basis_monomials(degree, parity);

    const int rows = static_cast<int>(xs.size());
    const int cols = static_cast<int>(mono_.size());
    if (rows < cols)
        throw InsufficientPoints("fit needs at least " + std::to_string(cols) +
                                 " samples, got " + std::to_string(rows));

    // Normalize each axis by its stencil extent (in hx/he units), not the
    // bandwidth: conditioning must not degrade when the weights approach
    // uniform, nor when the mesh is much finer along one axis.
    double ext_x = 0.0, ext_e = 0.0;
    for (int r = 0; r < rows; ++r) {
        ext_x = std::max(ext_x, std::abs(xs[r] - xi_c) / hx);
        ext_e = std::max(ext_e, std::abs(es[r] - eta_c) / he);
    }
    if (ext_x <= 0.0) ext_x = 1.0;
    if (ext_e <= 0.0) ext_e = 1.0;
    sx_ = hx * ext_x;
    se_ = he * ext_e;

    design_.resize(rows, cols);
    w_.resize(rows);
    const double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
    for (int r = 0; r < rows; ++r) {
        const double ux = (xs[r] - xi_c) / hx;
        const double ue = (es[r] - eta_c) / he;
        w_[r] = std::exp(-(ux * ux + ue * ue) * inv2b2);
        const double dx = (xs[r] - xi_c) / sx_;
        const double de = (es[r] - eta_c) / se_;
        // powers up to degree, reused across monomials
        double px[8], pe[8];
        px[0] = pe[0] = 1.0;
        for (int d = 1; d <= degree; ++d) {
            px[d] = px[d - 1] * dx;
            pe[d] = pe[d - 1] * de;
        }
        for (int c = 0; c < cols; ++c)
            design_(r, c) = w_[r] * px[mono_[c].a] * pe[mono_[c].b];
    }
    qr_.compute(design_);
    const auto& R = qr_.matrixR();
    const double rmax = std::abs(R(0, 0));
    const double rmin = std::abs(R(cols - 1, cols - 1));
    cond_ = (rmin > 0.0) ? rmax / rmin
                         : std::numeric_limits<double>::infinity();
    return (cond_ > cond_threshold || !std::isfinite(cond_)) ? FitStatus::singular
                                                             : FitStatus::ok;
}

LocalFit MwlsSolver::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd scaled = qr_.solve(w_.cwiseProduct(rhs));
    LocalFit fit;
    fit.xi_c = xi_c_;
    fit.eta_c = eta_c_;
    fit.degree = degree_;
    fit.parity = parity_;
    fit.monomials = mono_;
    fit.condition = cond_;
    fit.coeffs.resize(scaled.size());
    for (int c = 0; c < scaled.size(); ++c) {
        double unscale = 1.0;
        for (int d = 0; d < mono_[c].a; ++d) unscale /= sx_;
        for (int d = 0; d < mono_[c].b; ++d) unscale /= se_;
        fit.coeffs[c] = scaled[c] * unscale;
    }
    return fit;
}

LocalFit fit_local(const std::vector<double>& xs, const std::vector<double>& es,
                   const std::vector<double>& fs, double xi_c, double eta_c,
                   int degree, ParityClass parity, double bandwidth, double hx,
                   double he) {
    if (!(bandwidth > 0.0)) throw RangeError("bandwidth must be positive");
    MwlsSolver solver;
    const FitStatus st =
        solver.setup(xs, es, xi_c, eta_c, degree, parity, bandwidth, 1e10, hx, he);
    if (st == FitStatus::singular)
        throw SingularFit("weighted design matrix condition " +
                          std::to_string(solver.condition()) + " exceeds 1e10");
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(
        fs.data(), static_cast<Eigen::Index>(fs.size()));
    return solver.solve(rhs);
}

}  // namespace qlt
