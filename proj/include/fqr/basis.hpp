#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fqr {

// B-spline system of degree p (order p+1) on K equal subintervals of
// [domain_start, domain_end], with boundary knots repeated p+1 times
// (clamped).  There are K+p basis functions; they are non-negative, sum to
// one everywhere on the domain, and each is supported on at most p+1
// consecutive subintervals.  Immutable after construction.
class SplineBasis {
public:
    SplineBasis(double domain_start, double domain_end, int num_subintervals, int degree);

    double domain_start() const { return a_; }
    double domain_end() const { return b_; }
    double domain_length() const { return b_ - a_; }
    int num_subintervals() const { return K_; }
    int degree() const { return p_; }
    int size() const { return K_ + p_; }  // number of basis functions

    // Breakpoints t_0..t_K (equally spaced).
    double breakpoint(int j) const { return knots_[p_ + j]; }
    // Full clamped knot vector of length K + 2p + 1.
    const std::vector<double>& knots() const { return knots_; }

    // 0-based index j of the subinterval [t_j, t_{j+1}) containing t; the last
    // subinterval is closed on the right.  Throws if t is outside the domain.
    int subinterval_of(double t) const;

    // All basis values at t (length K+p).  Entries are non-negative and sum
    // to 1.  Out-of-domain t is an error; there is no extrapolation.
    Eigen::VectorXd eval(double t) const;

    // All order-th derivatives at t (order 0 gives eval).  Requires order <= degree.
    Eigen::VectorXd eval_deriv(double t, int order) const;

    // Basis function k is nonzero only on subintervals
    // [support_first(k), support_last(k)].
    int support_first(int k) const { return std::max(0, k - p_); }
    int support_last(int k) const { return std::min(k, K_ - 1); }

private:
    double a_, b_;
    int K_, p_;
    double step_;
    std::vector<double> knots_;

    void eval_window(double t, int span, double* out) const;           // p+1 values
    void eval_deriv_window(double t, int span, int order, double* out) const;
};

SplineBasis build_basis(double domain_start, double domain_end, int num_subintervals,
                        int degree);

// Gram matrices of a basis: full Gram, the order-q derivative Gram V used by
// the roughness penalty, and the per-subinterval Grams W_j used by the
// locally sparse penalty.  All integrals are Gauss-Legendre per subinterval
// with enough nodes to be exact for the piecewise-polynomial integrands.
struct GramSet {
    Eigen::MatrixXd full_gram;               // (K+p) x (K+p), sum_j sub_grams[j]
    Eigen::MatrixXd deriv_gram;              // V, same shape
    std::vector<Eigen::MatrixXd> sub_grams;  // K matrices W_j
    int deriv_order = 0;                     // q
};

GramSet compute_gram_set(const SplineBasis& basis, int deriv_order);

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace fqr
