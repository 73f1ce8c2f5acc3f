#pragma once

#include <vector>

#include "fqr/solver.hpp"

namespace fqr {

// Candidate sets for the sparsity (lambda) and roughness (gamma) tuning
// parameters.  By default one value of each is shared across covariates.
struct TuneGrid {
    std::vector<double> lambdas;
    std::vector<double> gammas;
    bool shared_across_covariates = true;

    void validate() const;
};

// Log-spaced default grid: 8 lambdas on [1e-3, 1] * sqrt(K/n), 6 gammas on
// [1e-8, 1e-2], both ascending.
TuneGrid default_grid(int n, int K);

struct TuneEntry {
    double lambda = 0.0;
    double gamma = 0.0;
    double bic = 0.0;
    int df = 0;
    bool converged = false;
};

struct TuneResult {
    double best_lambda = 0.0;
    double best_gamma = 0.0;
    FitResult best_fit;
    std::vector<TuneEntry> table;  // one row per candidate pair
};

// Check-loss BIC: log(mean_i rho_tau(r_i)) + df log(n) / (2n), where r are
// residuals of the signal-region refit and df counts surviving basis
// coefficients plus the scalar dimension.
double quantile_bic(const Eigen::VectorXd& residuals, double tau, int df);

// Fit every candidate pair with the sparsity penalty, refit the surviving
// signal region without it, and score that refit by BIC.  Ties prefer the
// larger lambda, then the larger gamma.  Candidate fits run in parallel when
// threads != 1.
TuneResult tune_fit(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                    const TuneGrid& grid, const SolverConfig& base_config, int threads = 0);

}  // namespace fqr
