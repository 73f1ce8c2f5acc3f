#include "fqr/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fqr {

SplineBasis::SplineBasis(double domain_start, double domain_end, int num_subintervals,
                         int degree)
    : a_(domain_start), b_(domain_end), K_(num_subintervals), p_(degree) {
    if (!std::isfinite(a_) || !std::isfinite(b_) || !(b_ > a_)) {
        throw std::invalid_argument("SplineBasis: domain must be a finite non-degenerate interval");
    }
    if (p_ < 0) throw std::invalid_argument("SplineBasis: degree must be non-negative");
    if (K_ < 1) throw std::invalid_argument("SplineBasis: need at least one subinterval");
    if (K_ < p_ + 1) {
        throw std::invalid_argument("SplineBasis: need K >= p+1 (got K=" + std::to_string(K_) +
                                    ", p=" + std::to_string(p_) + ")");
    }
    step_ = (b_ - a_) / K_;
    knots_.resize(K_ + 2 * p_ + 1);
    for (int i = 0; i < p_; ++i) knots_[i] = a_;
    for (int j = 0; j <= K_; ++j) {
        knots_[p_ + j] = (j == K_) ? b_ : a_ + step_ * j;
    }
    for (int i = 0; i < p_; ++i) knots_[p_ + K_ + 1 + i] = b_;
}

int SplineBasis::subinterval_of(double t) const {
    if (!(t >= a_ && t <= b_)) {
        throw std::out_of_range("SplineBasis: t=" + std::to_string(t) + " outside domain [" +
                                std::to_string(a_) + ", " + std::to_string(b_) + "]");
    }
    int j = static_cast<int>(std::floor((t - a_) / step_));
    if (j < 0) j = 0;
    if (j >= K_) j = K_ - 1;  // right endpoint belongs to the last subinterval
    // floor can land one cell off at breakpoints; nudge onto [t_j, t_{j+1})
    while (j > 0 && t < breakpoint(j)) --j;
    while (j < K_ - 1 && t >= breakpoint(j + 1)) ++j;
    return j;
}

// Cox-de Boor triangle for the p+1 basis functions that are nonzero on the
// span containing t.  out[i] = B_{span-p+i}(t) in 0-based basis indexing.
void SplineBasis::eval_window(double t, int span, double* out) const {
    const int s = span + p_;  // index into the clamped knot vector
    out[0] = 1.0;
    std::vector<double> left(p_ + 1), right(p_ + 1);
    for (int r = 1; r <= p_; ++r) {
        left[r] = t - knots_[s + 1 - r];
        right[r] = knots_[s + r] - t;
        double saved = 0.0;
        for (int i = 0; i < r; ++i) {
            const double denom = right[i + 1] + left[r - i];
            const double factor = (denom != 0.0) ? out[i] / denom : 0.0;
            out[i] = saved + right[i + 1] * factor;
            saved = left[r - i] * factor;
        }
        out[r] = saved;
    }
}

Eigen::VectorXd SplineBasis::eval(double t) const {
    const int span = subinterval_of(t);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(size());
    std::vector<double> window(p_ + 1);
    eval_window(t, span, window.data());
    for (int i = 0; i <= p_; ++i) values[span + i] = window[i];
    return values;
}

// Derivatives by differentiating the recursion: evaluate the degree p-order
// window, then apply the knot-difference ladder `order` times.
void SplineBasis::eval_deriv_window(double t, int span, int order, double* out) const {
    const int s = span + p_;
    // rows[r][i] holds degree-r window values B_{span-r+i,r}(t), i=0..r
    std::vector<std::vector<double>> rows(p_ + 1);
    rows[0] = {1.0};
    for (int r = 1; r <= p_; ++r) {
        rows[r].assign(r + 1, 0.0);
        double saved = 0.0;
        for (int i = 0; i < r; ++i) {
            const double leftk = knots_[s - r + 1 + i];
            const double rightk = knots_[s + 1 + i];
            const double denom = rightk - leftk;
            const double factor = (denom != 0.0) ? rows[r - 1][i] / denom : 0.0;
            rows[r][i] += saved + (rightk - t) * factor;
            saved = (t - leftk) * factor;
        }
        rows[r][r] = saved;
    }
    // Start from the degree p - order window and climb back with the
    // derivative ladder: d/dt coefficients use the same knot differences.
    std::vector<double> work = rows[p_ - order];
    for (int d = p_ - order + 1; d <= p_; ++d) {
        std::vector<double> next(d + 1, 0.0);
        for (int i = 0; i <= d; ++i) {
            double acc = 0.0;
            if (i > 0) {  // left child B_{s-d+i, d-1}
                const double denom = knots_[s + i] - knots_[s - d + i];
                if (denom != 0.0) acc += work[i - 1] / denom;
            }
            if (i < d) {  // right child B_{s-d+i+1, d-1}
                const double denom = knots_[s + 1 + i] - knots_[s - d + 1 + i];
                if (denom != 0.0) acc -= work[i] / denom;
            }
            next[i] = d * acc;
        }
        work = std::move(next);
    }
    for (int i = 0; i <= p_; ++i) out[i] = work[i];
}

Eigen::VectorXd SplineBasis::eval_deriv(double t, int order) const {
    if (order < 0 || order > p_) {
        throw std::invalid_argument("SplineBasis: derivative order must be in [0, degree]");
    }
    if (order == 0) return eval(t);
    const int span = subinterval_of(t);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(size());
    std::vector<double> window(p_ + 1);
    eval_deriv_window(t, span, order, window.data());
    for (int i = 0; i <= p_; ++i) values[span + i] = window[i];
    return values;
}

SplineBasis build_basis(double domain_start, double domain_end, int num_subintervals,
                        int degree) {
    return SplineBasis(domain_start, domain_end, num_subintervals, degree);
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev-angle initial guess.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            const double dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (x * p0 - p1) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

GramSet compute_gram_set(const SplineBasis& basis, int deriv_order) {
    const int p = basis.degree();
    if (deriv_order < 0 || deriv_order > p) {
        throw std::invalid_argument("compute_gram_set: need 0 <= q <= degree");
    }
    const int nb = basis.size();
    const int K = basis.num_subintervals();
    const int gl_nodes = (2 * p + 1) / 2 + 2;  // exact for degree-2p integrands

    std::vector<double> xs, ws;
    gauss_legendre(gl_nodes, xs, ws);

    GramSet gram;
    gram.deriv_order = deriv_order;
    gram.full_gram = Eigen::MatrixXd::Zero(nb, nb);
    gram.deriv_gram = Eigen::MatrixXd::Zero(nb, nb);
    gram.sub_grams.assign(K, Eigen::MatrixXd::Zero(nb, nb));

    for (int j = 0; j < K; ++j) {
        const double lo = basis.breakpoint(j);
        const double hi = basis.breakpoint(j + 1);
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        for (int g = 0; g < gl_nodes; ++g) {
            const double t = mid + half * xs[g];
            const double w = half * ws[g];
            const Eigen::VectorXd b = basis.eval(t);
            const Eigen::VectorXd bd = basis.eval_deriv(t, deriv_order);
            // only indices j..j+p are nonzero on this subinterval
            for (int u = j; u <= j + p; ++u) {
                for (int v = j; v <= j + p; ++v) {
                    gram.sub_grams[j](u, v) += w * b[u] * b[v];
                    gram.deriv_gram(u, v) += w * bd[u] * bd[v];
                }
            }
        }
        gram.full_gram += gram.sub_grams[j];
    }
    return gram;
}

}  // namespace fqr
