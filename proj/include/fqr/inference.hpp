#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fqr/design.hpp"
#include "fqr/solver.hpp"

namespace fqr {

// Two-point wild-bootstrap weight law determined by the three moment
// conditions: w = -2 tau with probability tau, w = 2(1-tau) otherwise.  Then
// the tau-quantile of w is 0 and E[w^{-1} 1{w>0}] = -E[w^{-1} 1{w<0}] = 1/2.
struct WildWeightDist {
    double tau;

    explicit WildWeightDist(double tau_);
    double neg_value() const { return -2.0 * tau; }
    double pos_value() const { return 2.0 * (1.0 - tau); }
    double neg_prob() const { return tau; }
};

Eigen::VectorXd draw_weights(const WildWeightDist& dist, int n, std::mt19937_64& rng);

struct BootstrapConfig {
    int replicates = 200;  // B per half
    std::uint64_t seed = 1;
    Eigen::VectorXd eval_grid;            // empty: subinterval midpoints
    double max_dropped_fraction = 0.10;   // error beyond this
    int threads = 0;
};

struct BootstrapSummary {
    int requested = 0;  // B per half
    int used = 0;       // accepted replicates, both halves
    int dropped = 0;
    Eigen::VectorXd eval_grid;
    Eigen::MatrixXd alpha_reps;              // used x d
    std::vector<Eigen::MatrixXd> beta_reps;  // per covariate, used x |eval_grid|
    std::vector<Eigen::VectorXd> sigma_hat;  // pointwise variance of beta_hat, halves averaged
    Eigen::MatrixXd alpha_cov;               // halves averaged
    std::string diagnostics;
};

// Split wild bootstrap: fit the sparsity pattern on one half, refit the other
// half constrained to it, perturb its residuals by two-point weights, refit,
// and estimate variances from the replicates; both half assignments are run
// and their variance estimates averaged.  Replicate r of half s draws its RNG
// stream from (seed, s, r), so results do not depend on thread count.  The
// bandwidth is resolved once against the full sample and reused throughout.
BootstrapSummary wild_bootstrap(const FunctionalDataset& data, const SplineBasis& basis,
                                const GramSet& gram, const SolverConfig& config,
                                const BootstrapConfig& bootstrap);

// Gumbel-type critical value for a simultaneous band over `grid_size` points:
// Q(a) = (2 log N)^{1/2}
//        - (2 log N)^{-1/2} {log(-0.5 log(1-a)) + 0.5 [log log N + log 4 pi]}.
// Requires grid_size >= 2.
double scb_critical_value(int grid_size, double level);

struct BandTable {
    Eigen::VectorXd t;
    Eigen::VectorXd estimate;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double critical_value = 0.0;
};

// Simultaneous confidence band for beta_l over the evaluation points inside
// the fit's estimated non-null region: estimate +- sigma^{1/2}(t) Q(a).
BandTable build_scb(const BootstrapSummary& summary, const FitResult& fit, int covariate,
                    double level);

// Pointwise band with the normal critical value z_{a/2}, same evaluation set.
BandTable build_pcb(const BootstrapSummary& summary, const FitResult& fit, int covariate,
                    double level);

struct AlphaCiTable {
    Eigen::VectorXd estimate;
    Eigen::VectorXd percentile_lower, percentile_upper;  // replicate quantiles
    Eigen::VectorXd normal_lower, normal_upper;          // covariance-based
};

AlphaCiTable alpha_confidence_intervals(const BootstrapSummary& summary, const FitResult& fit,
                                        double level);

// Known-density sandwich variance of Theorems 2-3, for simulation settings
// where f_{e|Z,X}(0) is known: sigma_l(t) = tau(1-tau) Lambda_l(t)
// Sigma_2^{-1} (Sigma_1/n) Sigma_2^{-1} Lambda_l(t)' on the restricted
// (non-null) coefficient pattern, plus the alpha covariance.
struct SandwichOracle {
    std::vector<Eigen::VectorXd> sigma;  // per covariate, on eval_grid
    Eigen::MatrixXd alpha_cov;
    std::string diagnostics;
};

SandwichOracle sandwich_variance_oracle(const DesignMatrices& design, const SplineBasis& basis,
                                        const Eigen::VectorXd& density_at_zero, double tau,
                                        const std::vector<std::uint8_t>& free_mask,
                                        const Eigen::VectorXd& eval_grid);

}  // namespace fqr
