#include "fqr/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace fqr {

ScadParams::ScadParams(double lambda_, double a_) : lambda(lambda_), a(a_) {
    if (lambda < 0.0) throw std::invalid_argument("ScadParams: lambda must be >= 0");
    if (!(a > 2.0)) throw std::invalid_argument("ScadParams: a must be > 2");
}

double scad(const ScadParams& params, double u) {
    if (u < 0.0) throw std::invalid_argument("scad: u must be non-negative");
    const double lambda = params.lambda, a = params.a;
    if (lambda == 0.0) return 0.0;
    if (u <= lambda) return lambda * u;
    if (u <= a * lambda) {
        return -(u * u - 2.0 * a * lambda * u + lambda * lambda) / (2.0 * (a - 1.0));
    }
    return 0.5 * (a + 1.0) * lambda * lambda;
}

double scad_deriv(const ScadParams& params, double u) {
    if (u < 0.0) throw std::invalid_argument("scad_deriv: u must be non-negative");
    const double lambda = params.lambda, a = params.a;
    if (lambda == 0.0) return 0.0;
    if (u <= lambda) return lambda;
    if (u <= a * lambda) return (a * lambda - u) / (a - 1.0);
    return 0.0;
}

Eigen::VectorXd subinterval_rms(const SplineBasis& basis, const GramSet& gram,
                                const Eigen::VectorXd& theta_l) {
    const int K = basis.num_subintervals();
    const int p = basis.degree();
    const double scale = K / basis.domain_length();
    Eigen::VectorXd rms(K);
    for (int j = 0; j < K; ++j) {
        // W_j is banded: only indices j..j+p participate
        const auto block = gram.sub_grams[j].block(j, j, p + 1, p + 1);
        const auto seg = theta_l.segment(j, p + 1);
        const double q = seg.dot(block * seg);
        rms[j] = std::sqrt(std::max(0.0, scale * q));
    }
    return rms;
}

double fscad_value(const SplineBasis& basis, const GramSet& gram,
                   const std::vector<ScadParams>& params, const Eigen::VectorXd& theta) {
    const int nb = basis.size();
    const int m = static_cast<int>(params.size());
    if (theta.size() != static_cast<Eigen::Index>(m) * nb) {
        throw std::invalid_argument("fscad_value: theta length must be m*(K+p)");
    }
    double total = 0.0;
    for (int l = 0; l < m; ++l) {
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, theta.segment(l * nb, nb));
        for (int j = 0; j < basis.num_subintervals(); ++j) {
            total += scad(params[l], rms[j]);
        }
    }
    return total;
}

double LqaWeights::quadratic_form(const Eigen::VectorXd& theta) const {
    double total = 0.0;
    Eigen::Index offset = 0;
    for (const auto& block : blocks) {
        const auto seg = theta.segment(offset, block.rows());
        total += seg.dot(block * seg);
        offset += block.rows();
    }
    return total;
}

LqaWeights lqa_weights(const SplineBasis& basis, const GramSet& gram,
                       const std::vector<ScadParams>& params,
                       const Eigen::VectorXd& theta_anchor, double eps) {
    const int nb = basis.size();
    const int K = basis.num_subintervals();
    const int m = static_cast<int>(params.size());
    if (theta_anchor.size() != static_cast<Eigen::Index>(m) * nb) {
        throw std::invalid_argument("lqa_weights: anchor length must be m*(K+p)");
    }
    if (!theta_anchor.allFinite()) {
        throw std::invalid_argument("lqa_weights: anchor must be finite");
    }
    const double width = basis.domain_length() / K;  // T/K
    if (eps <= 0.0) eps = 1e-6 * width;

    LqaWeights w;
    w.epsilon = eps;
    w.blocks.reserve(m);
    for (int l = 0; l < m; ++l) {
        const Eigen::VectorXd theta_l = theta_anchor.segment(l * nb, nb);
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, theta_l);
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nb, nb);
        for (int j = 0; j < K; ++j) {
            const double pdot = scad_deriv(params[l], rms[j]);
            // R2 accumulates p(s_j) - (1/2) pdot(s_j) s_j
            w.r2_constant += scad(params[l], rms[j]) - 0.5 * pdot * rms[j];
            if (pdot == 0.0) continue;
            // sqrt((T/K) theta'W_j theta) = (T/K) * rms_j
            const double sqrt_form = width * rms[j];
            const double weight = 0.5 * pdot / (sqrt_form + eps);
            block.block(j, j, basis.degree() + 1, basis.degree() + 1) +=
                weight * gram.sub_grams[j].block(j, j, basis.degree() + 1, basis.degree() + 1);
        }
        w.blocks.push_back(std::move(block));
    }
    return w;
}

}  // namespace fqr
