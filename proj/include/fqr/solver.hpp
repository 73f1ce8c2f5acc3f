#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fqr/basis.hpp"
#include "fqr/design.hpp"
#include "fqr/loss.hpp"
#include "fqr/penalty.hpp"

namespace fqr {

struct LineSearchConfig {
    double backtrack = 0.5;  // step shrink factor, in (0,1)
    double armijo_c1 = 1e-4;
    double min_step = 1e-10;
};

// Configuration shared by the SQL baseline and the CLoSE fit.  gamma and
// lambda hold one value per functional covariate; a single value broadcasts.
// All lambdas zero selects the SQL baseline (no sparsity penalty).
struct SolverConfig {
    double tau = 0.5;
    double bandwidth = 0.0;  // <= 0 selects the ((K+p+d)/n)^{2/5} rule
    Kernel kernel = Kernel::Gaussian;
    std::vector<double> gamma{0.0};
    std::vector<double> lambda{0.0};
    double scad_a = 3.7;
    int deriv_order = 2;  // q in the roughness penalty
    int max_outer = 100;
    int max_inner = 200;
    double tol_inner = 1e-6;
    double tol_outer = 1e-5;
    LineSearchConfig line_search;
    double zero_threshold = 0.0;  // <= 0: 5% of the SQL initializer's max subinterval RMS
    double lqa_epsilon = -1.0;    // <= 0: 1e-6 * (T/K)
    bool polish = true;           // refit surviving coefficients without fSCAD

    double gamma_for(int l) const;
    double lambda_for(int l) const;
    bool sql_mode() const;  // true iff every lambda is zero
    void validate(int num_functional) const;
};

// Contiguous run of subintervals where the fitted coefficient function is
// exactly zero, as subinterval indices and as a time interval.
struct NullInterval {
    int first_subinterval = 0;
    int last_subinterval = 0;  // inclusive
    double start = 0.0;
    double end = 0.0;
};

struct FitResult {
    Eigen::VectorXd alpha;  // d scalar coefficients
    Eigen::VectorXd theta;  // m*(K+p) basis coefficients

    // Per covariate: K flags (1 = subinterval in the estimated null region)
    // and the same information merged into intervals.  beta(l, t) is exactly
    // zero strictly inside every flagged interval.
    std::vector<std::vector<std::uint8_t>> null_flags;
    std::vector<std::vector<NullInterval>> null_regions;

    std::vector<double> objective_trace;        // accepted-step objective values
    std::vector<double> outer_objective_trace;  // exact objective after each outer round
    bool converged = false;
    int outer_iterations = 0;
    int inner_iterations = 0;
    double objective = 0.0;  // final value of the fitted objective
    double bandwidth_used = 0.0;
    double zero_threshold_used = 0.0;
    std::string diagnostics;

    SplineBasis basis{0.0, 1.0, 1, 0};

    int num_basis() const { return basis.size(); }
    int num_functional() const {
        return num_basis() == 0 ? 0 : static_cast<int>(theta.size()) / num_basis();
    }

    // Reconstructed coefficient function beta_l(t) = B(t)' theta_l.
    double beta(int l, double t) const;

    // theta block of covariate l.
    Eigen::VectorXd theta_block(int l) const;
};

// Smoothed quantile loss + roughness penalty, damped Newton.  Ignores lambda;
// null regions come back empty.
FitResult fit_sql(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                  const SolverConfig& config);

// SQL fit with part of theta pinned to zero: free_mask has one entry per
// theta coordinate; masked-out coefficients are exactly zero in the result.
// Used by the polish step and by the bootstrap's constrained refits.
FitResult fit_sql_constrained(const DesignMatrices& design, const SplineBasis& basis,
                              const GramSet& gram, const SolverConfig& config,
                              const std::vector<std::uint8_t>& free_mask,
                              const Eigen::VectorXd* warm_alpha = nullptr,
                              const Eigen::VectorXd* warm_theta = nullptr);

// The CLoSE fit: SQL initialization, outer loop re-anchoring the LQA weights,
// inner damped Newton on the surrogate, then subinterval thresholding, exact
// zeroing, and an optional polish refit.
FitResult fit_close(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                    const SolverConfig& config);

// Subinterval flags from the RMS rule: flag j iff sqrt((K/T) theta_l' W_j
// theta_l) < threshold.  One flag vector per covariate.
std::vector<std::vector<std::uint8_t>> extract_null_flags(const Eigen::VectorXd& theta,
                                                          const SplineBasis& basis,
                                                          const GramSet& gram, double threshold);

// Contiguous flagged runs merged into [start, end] time intervals.
std::vector<NullInterval> merge_null_flags(const std::vector<std::uint8_t>& flags,
                                           const SplineBasis& basis);

double predict_quantile(const FitResult& fit, const Eigen::VectorXd& z_row,
                        const Eigen::VectorXd& u_row);

// Objective value of the (surrogate-free) CLoSE problem at given coefficients:
// smoothed loss + roughness + exact fSCAD.  Exposed for diagnostics and tests.
double close_objective(const DesignMatrices& design, const SplineBasis& basis,
                       const GramSet& gram, const SolverConfig& config,
                       const Eigen::VectorXd& alpha, const Eigen::VectorXd& theta);

// Value, gradient (D1), and Hessian (D2) of the penalized smoothed objective
// actually minimized by the Newton iterations, optionally including a set of
// LQA weight blocks.  Exposed so derivative code can be verified externally.
struct ObjectivePieces {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

ObjectivePieces objective_pieces(const DesignMatrices& design, const SplineBasis& basis,
                                 const GramSet& gram, const SolverConfig& config,
                                 const LqaWeights* weights, const Eigen::VectorXd& alpha,
                                 const Eigen::VectorXd& theta);

}  // namespace fqr
