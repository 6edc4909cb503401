#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qlt/ensemble.hpp"
#include "qlt/errors.hpp"

namespace qlt {

// Weighted normal system is rank-deficient beyond tolerance; the caller
// should enlarge the stencil and refit.
struct SingularFit : NumericError {
    using NumericError::NumericError;
};

// Parity restriction of the polynomial basis in the eta exponent.
enum class ParityClass { EVEN_IN_ETA, ODD_IN_ETA, NONE };

struct Monomial {
    int a = 0;  // xi exponent
    int b = 0;  // eta exponent
};

// Graded-lexicographic monomials xi^a eta^b of total degree <= degree,
// filtered by parity of b: (0,0),(1,0),(0,1),(2,0),(1,1),(0,2),...
std::vector<Monomial> basis_monomials(int degree, ParityClass parity);

// Local polynomial fit about (xi_c, eta_c) in the shifted coordinates
// (xi - xi_c, eta - eta_c).
struct LocalFit {
    double xi_c = 0.0;
    double eta_c = 0.0;
    int degree = 0;
    ParityClass parity = ParityClass::NONE;
    std::vector<Monomial> monomials;
    Eigen::VectorXd coeffs;
    double condition = 0.0;

    // Fitted value at the center: the constant coefficient, or 0 when the
    // parity filter removed it.
    double value() const;

    // d^{a+b} P / dxi^a deta^b at the center (= a! b! c_ab, or 0 when the
    // monomial is parity-filtered out). Throws OrderTooHigh if a+b > degree.
    double derivative(int a, int b) const;
};

// One stencil member. In economy mode an entry may be the eta-mirrored image
// of a stored point; mirrored samples flip sign for odd-parity fields.
// dist2 is measured in mesh units: (dxi_gap/dxi)^2 + (deta_gap/deta)^2, so
// neighborhoods stay balanced when domain adaptation stretches one axis.
struct StencilEntry {
    int index = 0;
    bool mirror = false;
    double dist2 = 0.0;
};

// Intrinsic parity of a field under eta -> -eta, used to sign mirrored samples.
enum class FieldParity { even, odd };

inline double signed_sample(double v, bool mirror, FieldParity fp) {
    return (mirror && fp == FieldParity::odd) ? -v : v;
}

inline double entry_eta(const Ensemble& e, const StencilEntry& s) {
    const double eta = e.points[s.index].eta;
    return s.mirror ? -eta : eta;
}

struct StencilScratch {
    std::vector<StencilEntry> all;
};

// The n_min nearest alive points around (xi, eta) in mesh-unit distance,
// ordered by (distance, index, mirror). Economy-mode candidates include
// mirrored images of stored eta > 0 points. Throws InsufficientPoints when
// fewer than n_min alive candidates exist.
void select_stencil_at(const Ensemble& e, double xi, double eta, int n_min,
                       StencilScratch& scratch, std::vector<StencilEntry>& out);

// Stencil around an existing point, including the point itself.
std::vector<StencilEntry> select_stencil(const Ensemble& e, int idx, int n_min);
std::vector<StencilEntry> select_stencil_at(const Ensemble& e, double xi,
                                            double eta, int n_min);

// Bandwidth heuristic: factor times the local spacing, estimated as the
// distance to the 4th nearest neighbor in the (distance-sorted) stencil.
// Inherits the units of StencilEntry::dist2 (mesh units for grid stencils).
double local_bandwidth(const std::vector<StencilEntry>& stencil, double factor);

enum class FitStatus { ok, singular };

// Weighted least-squares solver for one stencil geometry. setup() builds and
// factorizes the weighted, scaled Vandermonde once; solve() can then be
// applied to any number of sample vectors on the same stencil.
//
// hx and he set the per-axis distance unit: weights are
// w_i = exp(-rho_i^2 / (2 bandwidth^2)) with
// rho_i^2 = ((xs_i - xi_c)/hx)^2 + ((es_i - eta_c)/he)^2, so bandwidth is
// expressed in the same units as rho. Grid callers pass the mesh spacings to
// keep fits well conditioned on anisotropic meshes; the defaults give plain
// physical distance. The design matrix is additionally normalized by the
// per-axis stencil extents, column-pivoted QR-factorized, and the condition
// estimate is the ratio of extreme R diagonal magnitudes.
class MwlsSolver {
  public:
    FitStatus setup(const std::vector<double>& xs, const std::vector<double>& es,
                    double xi_c, double eta_c, int degree, ParityClass parity,
                    double bandwidth, double cond_threshold = 1e10,
                    double hx = 1.0, double he = 1.0);

    // rhs holds raw field samples in stencil order (already mirror-signed).
    LocalFit solve(const Eigen::VectorXd& rhs) const;

    double condition() const { return cond_; }
    int basis_size() const { return static_cast<int>(mono_.size()); }
    int sample_count() const { return static_cast<int>(w_.size()); }

  private:
    double xi_c_ = 0.0, eta_c_ = 0.0;
    double sx_ = 1.0, se_ = 1.0;  // full per-axis coordinate scales
    int degree_ = 0;
    ParityClass parity_ = ParityClass::NONE;
    std::vector<Monomial> mono_;
    Eigen::MatrixXd design_;
    Eigen::VectorXd w_;  // Gaussian weights
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
    double cond_ = 0.0;
};

// Single-shot fit of samples (xs, es, fs). Throws SingularFit when the
// condition estimate exceeds 1e10, InsufficientPoints when there are fewer
// samples than basis monomials.
LocalFit fit_local(const std::vector<double>& xs, const std::vector<double>& es,
                   const std::vector<double>& fs, double xi_c, double eta_c,
                   int degree, ParityClass parity, double bandwidth,
                   double hx = 1.0, double he = 1.0);

}  // namespace qlt
