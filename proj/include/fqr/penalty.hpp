#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fqr/basis.hpp"

namespace fqr {

// SCAD penalty parameters for one functional covariate.
struct ScadParams {
    double lambda = 0.0;
    double a = 3.7;

    ScadParams() = default;
    ScadParams(double lambda_, double a_ = 3.7);
};

// p_lambda(u): lambda*u on [0, lambda]; -(u^2 - 2 a lambda u + lambda^2) /
// (2(a-1)) on [lambda, a lambda]; (a+1) lambda^2 / 2 beyond.  u must be >= 0.
double scad(const ScadParams& params, double u);

// First derivative: lambda, then (a lambda - u)/(a-1), then 0.
double scad_deriv(const ScadParams& params, double u);

// Per-subinterval root-mean-square of the l-th coefficient function,
// sqrt((K/T) theta_l' W_j theta_l), for all j.  theta_l has K+p entries.
Eigen::VectorXd subinterval_rms(const SplineBasis& basis, const GramSet& gram,
                                const Eigen::VectorXd& theta_l);

// fSCAD penalty sum_l sum_j p_{lambda_l}(rms_{l,j}).  theta stacks the m
// per-covariate coefficient blocks.
double fscad_value(const SplineBasis& basis, const GramSet& gram,
                   const std::vector<ScadParams>& params, const Eigen::VectorXd& theta);

// Quadratic majorizer of the fSCAD penalty at an anchor point:
// theta' W_tau theta + r2_constant touches fscad_value at the anchor (up to
// the epsilon perturbation of the modified LQA).  Blocks are per covariate.
struct LqaWeights {
    std::vector<Eigen::MatrixXd> blocks;  // m matrices (K+p) x (K+p), PSD
    double epsilon = 0.0;                 // perturbation added to the denominator
    double r2_constant = 0.0;             // anchor-dependent constant term

    // theta' W_tau theta evaluated blockwise.
    double quadratic_form(const Eigen::VectorXd& theta) const;
};

// W_{tau,l} = (1/2) sum_j pdot_{lambda_l}(s_j) / (sqrt((T/K) theta_l' W_j
// theta_l) + eps) * W_j with s_j the subinterval RMS at the anchor.  eps <= 0
// selects the default 1e-6 * (T/K).
LqaWeights lqa_weights(const SplineBasis& basis, const GramSet& gram,
                       const std::vector<ScadParams>& params,
                       const Eigen::VectorXd& theta_anchor, double eps = -1.0);

}  // namespace fqr
