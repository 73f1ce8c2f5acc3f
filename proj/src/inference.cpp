#include "fqr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fqr/parallel.hpp"
#include "fqr/rng.hpp"

namespace fqr {

WildWeightDist::WildWeightDist(double tau_) : tau(tau_) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("WildWeightDist: tau in (0,1)");
}

Eigen::VectorXd draw_weights(const WildWeightDist& dist, int n, std::mt19937_64& rng) {
    Eigen::VectorXd w(n);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        w[i] = unif(rng) < dist.neg_prob() ? dist.neg_value() : dist.pos_value();
    }
    return w;
}

double scb_critical_value(int grid_size, double level) {
    if (grid_size < 2) {
        throw std::invalid_argument("scb_critical_value: need at least 2 evaluation points");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("scb_critical_value: level in (0,1)");
    }
    const double logn = std::log(static_cast<double>(grid_size));
    const double root = std::sqrt(2.0 * logn);
    return root - (std::log(-0.5 * std::log1p(-level)) +
                   0.5 * (std::log(logn) + std::log(4.0 * M_PI))) /
                      root;
}

namespace {

Eigen::VectorXd midpoint_grid(const SplineBasis& basis) {
    Eigen::VectorXd grid(basis.num_subintervals());
    for (int j = 0; j < basis.num_subintervals(); ++j) {
        grid[j] = 0.5 * (basis.breakpoint(j) + basis.breakpoint(j + 1));
    }
    return grid;
}

struct HalfRun {
    std::vector<Eigen::VectorXd> alpha;  // accepted replicates
    std::vector<Eigen::VectorXd> theta;
    int dropped = 0;
    Eigen::MatrixXd alpha_cov;
    std::vector<Eigen::VectorXd> sigma;  // per covariate on eval grid
};

}  // namespace

BootstrapSummary wild_bootstrap(const FunctionalDataset& data, const SplineBasis& basis,
                                const GramSet& gram, const SolverConfig& config,
                                const BootstrapConfig& bootstrap) {
    data.validate();
    const int n = data.n();
    const int m = data.m();
    const int nb = basis.size();
    const int B = bootstrap.replicates;
    if (B < 2) throw std::invalid_argument("wild_bootstrap: need at least 2 replicates");
    const int n_half = n / 2;
    if (n_half < 2 * (nb + data.d())) {
        throw std::invalid_argument(
            "wild_bootstrap: half sample too small for the basis dimension (need n/2 >= "
            "2(K+p+d))");
    }

    const DesignMatrices design = assemble_design(data, basis);

    // Reuse one bandwidth, resolved against the full sample, for every refit.
    SolverConfig fit_config = config;
    if (fit_config.bandwidth <= 0.0) {
        fit_config.bandwidth =
            default_bandwidth(basis.num_subintervals(), basis.degree(), data.d(), n);
    }

    // Seeded random partition into two halves.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 split_rng = make_stream(bootstrap.seed, 0x5EEDu);
    std::shuffle(perm.begin(), perm.end(), split_rng);
    const std::vector<int> half_one(perm.begin(), perm.begin() + n_half);
    const std::vector<int> half_two(perm.begin() + n_half, perm.end());

    Eigen::VectorXd eval_grid =
        bootstrap.eval_grid.size() > 0 ? bootstrap.eval_grid : midpoint_grid(basis);
    Eigen::MatrixXd basis_at_eval(eval_grid.size(), nb);
    for (Eigen::Index g = 0; g < eval_grid.size(); ++g) {
        basis_at_eval.row(g) = basis.eval(eval_grid[g]).transpose();
    }

    const WildWeightDist weight_dist(fit_config.tau);
    std::ostringstream diag;
    HalfRun runs[2];

    for (int half = 0; half < 2; ++half) {
        const auto& fit_rows = half == 0 ? half_one : half_two;
        const auto& refit_rows = half == 0 ? half_two : half_one;
        const DesignMatrices design_fit = design.subset(fit_rows);
        DesignMatrices design_refit = design.subset(refit_rows);

        // Step 1: sparsity pattern from the first part.
        const FitResult pattern_fit = fit_close(design_fit, basis, gram, fit_config);
        std::vector<std::uint8_t> free_mask(m * nb, 1);
        for (int k = 0; k < m * nb; ++k) {
            free_mask[k] = pattern_fit.theta[k] != 0.0 ? 1 : 0;
        }

        // Step 2: constrained roughness-only refit on the second part.
        const FitResult center = fit_sql_constrained(design_refit, basis, gram, fit_config,
                                                     free_mask, &pattern_fit.alpha,
                                                     &pattern_fit.theta);
        if (!center.converged) {
            diag << "half " << half + 1 << ": center refit did not converge; ";
        }
        const Eigen::VectorXd fitted =
            design_refit.z * center.alpha + design_refit.u * center.theta;
        const Eigen::VectorXd abs_resid = (design_refit.y - fitted).cwiseAbs();

        // Steps 3-5, B replicates.
        std::vector<Eigen::VectorXd> alpha_reps(B), theta_reps(B);
        std::vector<std::uint8_t> ok(B, 0);
        parallel_for(B, bootstrap.threads, [&](int b) {
            std::mt19937_64 rng = make_stream(bootstrap.seed, 0xB007u,
                                              static_cast<std::uint64_t>(half),
                                              static_cast<std::uint64_t>(b));
            const Eigen::VectorXd w =
                draw_weights(weight_dist, static_cast<int>(abs_resid.size()), rng);
            DesignMatrices design_b = design_refit;
            design_b.y = fitted + w.cwiseProduct(abs_resid);
            const FitResult rep = fit_sql_constrained(design_b, basis, gram, fit_config,
                                                      free_mask, &center.alpha, &center.theta);
            if (rep.converged) {
                alpha_reps[b] = rep.alpha;
                theta_reps[b] = rep.theta;
                ok[b] = 1;
            }
        });

        HalfRun& run = runs[half];
        for (int b = 0; b < B; ++b) {
            if (ok[b]) {
                run.alpha.push_back(std::move(alpha_reps[b]));
                run.theta.push_back(std::move(theta_reps[b]));
            } else {
                ++run.dropped;
            }
        }
        const int used = static_cast<int>(run.alpha.size());
        if (used < 2) {
            throw std::runtime_error("wild_bootstrap: fewer than 2 usable replicates in a half");
        }

        // Step 6: variance function and alpha covariance from the replicates.
        const int d = data.d();
        Eigen::VectorXd alpha_mean = Eigen::VectorXd::Zero(d);
        for (const auto& a : run.alpha) alpha_mean += a;
        alpha_mean /= used;
        run.alpha_cov = Eigen::MatrixXd::Zero(d, d);
        for (const auto& a : run.alpha) {
            const Eigen::VectorXd c = a - alpha_mean;
            run.alpha_cov.noalias() += c * c.transpose();
        }
        run.alpha_cov /= (used - 1);

        run.sigma.assign(m, Eigen::VectorXd::Zero(eval_grid.size()));
        for (int l = 0; l < m; ++l) {
            Eigen::MatrixXd beta_vals(used, eval_grid.size());
            for (int rix = 0; rix < used; ++rix) {
                beta_vals.row(rix) =
                    (basis_at_eval * run.theta[rix].segment(l * nb, nb)).transpose();
            }
            const Eigen::RowVectorXd mean = beta_vals.colwise().mean();
            for (Eigen::Index g = 0; g < eval_grid.size(); ++g) {
                run.sigma[l][g] =
                    (beta_vals.col(g).array() - mean[g]).square().sum() / (used - 1);
            }
        }
    }

    const int total_dropped = runs[0].dropped + runs[1].dropped;
    if (total_dropped > bootstrap.max_dropped_fraction * 2.0 * B) {
        throw std::runtime_error("wild_bootstrap: " + std::to_string(total_dropped) + " of " +
                                 std::to_string(2 * B) + " replicates failed to converge");
    }

    BootstrapSummary summary;
    summary.requested = B;
    summary.dropped = total_dropped;
    summary.used = static_cast<int>(runs[0].alpha.size() + runs[1].alpha.size());
    summary.eval_grid = std::move(eval_grid);
    summary.alpha_reps.resize(summary.used, data.d());
    int row = 0;
    for (const auto& run : runs) {
        for (const auto& a : run.alpha) summary.alpha_reps.row(row++) = a.transpose();
    }
    summary.beta_reps.assign(m, Eigen::MatrixXd(summary.used, summary.eval_grid.size()));
    for (int l = 0; l < m; ++l) {
        row = 0;
        for (const auto& run : runs) {
            for (const auto& th : run.theta) {
                summary.beta_reps[l].row(row++) =
                    (basis_at_eval * th.segment(l * nb, nb)).transpose();
            }
        }
    }
    // Average of the two half-based estimates, as the procedure prescribes.
    summary.alpha_cov = 0.5 * (runs[0].alpha_cov + runs[1].alpha_cov);
    summary.sigma_hat.assign(m, Eigen::VectorXd());
    for (int l = 0; l < m; ++l) {
        summary.sigma_hat[l] = 0.5 * (runs[0].sigma[l] + runs[1].sigma[l]);
    }
    if (total_dropped > 0) diag << total_dropped << " replicates dropped; ";
    summary.diagnostics = diag.str();
    return summary;
}

namespace {

BandTable band_impl(const BootstrapSummary& summary, const FitResult& fit, int covariate,
                    double level, bool simultaneous) {
    if (covariate < 0 || covariate >= static_cast<int>(summary.sigma_hat.size())) {
        throw std::invalid_argument("band: covariate index out of range");
    }
    // evaluation points inside the estimated non-null region
    std::vector<int> keep;
    for (Eigen::Index g = 0; g < summary.eval_grid.size(); ++g) {
        const double t = summary.eval_grid[g];
        bool in_null = false;
        for (const auto& interval : fit.null_regions[covariate]) {
            if (t >= interval.start && t <= interval.end) {
                in_null = true;
                break;
            }
        }
        if (!in_null) keep.push_back(static_cast<int>(g));
    }
    const int ng = static_cast<int>(keep.size());
    if (ng < 2) {
        throw std::invalid_argument(
            "band: fewer than 2 evaluation points in the non-null region");
    }
    const double crit = simultaneous ? scb_critical_value(ng, level)
                                     : normal_quantile(1.0 - 0.5 * level);
    BandTable band;
    band.critical_value = crit;
    band.t.resize(ng);
    band.estimate.resize(ng);
    band.lower.resize(ng);
    band.upper.resize(ng);
    for (int i = 0; i < ng; ++i) {
        const double t = summary.eval_grid[keep[i]];
        const double est = fit.beta(covariate, t);
        const double half_width =
            crit * std::sqrt(std::max(0.0, summary.sigma_hat[covariate][keep[i]]));
        band.t[i] = t;
        band.estimate[i] = est;
        band.lower[i] = est - half_width;
        band.upper[i] = est + half_width;
    }
    return band;
}

}  // namespace

BandTable build_scb(const BootstrapSummary& summary, const FitResult& fit, int covariate,
                    double level) {
    return band_impl(summary, fit, covariate, level, true);
}

BandTable build_pcb(const BootstrapSummary& summary, const FitResult& fit, int covariate,
                    double level) {
    return band_impl(summary, fit, covariate, level, false);
}

AlphaCiTable alpha_confidence_intervals(const BootstrapSummary& summary, const FitResult& fit,
                                        double level) {
    const int d = static_cast<int>(summary.alpha_reps.cols());
    AlphaCiTable table;
    table.estimate = fit.alpha;
    table.percentile_lower.resize(d);
    table.percentile_upper.resize(d);
    table.normal_lower.resize(d);
    table.normal_upper.resize(d);
    const double z = normal_quantile(1.0 - 0.5 * level);
    std::vector<double> column(summary.alpha_reps.rows());
    for (int s = 0; s < d; ++s) {
        for (Eigen::Index i = 0; i < summary.alpha_reps.rows(); ++i) {
            column[i] = summary.alpha_reps(i, s);
        }
        std::sort(column.begin(), column.end());
        auto quantile = [&](double prob) {
            const double pos = prob * (column.size() - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, column.size() - 1);
            const double frac = pos - lo;
            return column[lo] * (1.0 - frac) + column[hi] * frac;
        };
        table.percentile_lower[s] = quantile(0.5 * level);
        table.percentile_upper[s] = quantile(1.0 - 0.5 * level);
        const double half = z * std::sqrt(std::max(0.0, summary.alpha_cov(s, s)));
        table.normal_lower[s] = fit.alpha[s] - half;
        table.normal_upper[s] = fit.alpha[s] + half;
    }
    return table;
}

SandwichOracle sandwich_variance_oracle(const DesignMatrices& design, const SplineBasis& basis,
                                        const Eigen::VectorXd& density_at_zero, double tau,
                                        const std::vector<std::uint8_t>& free_mask,
                                        const Eigen::VectorXd& eval_grid) {
    const int n = design.n();
    const int d = design.d();
    const int nb = basis.size();
    const int m = design.num_functional;
    if (density_at_zero.size() != n) {
        throw std::invalid_argument("sandwich: need one density value per sample");
    }
    if (static_cast<int>(free_mask.size()) != m * nb) {
        throw std::invalid_argument("sandwich: free mask length mismatch");
    }

    std::vector<int> free_index;
    for (int k = 0; k < m * nb; ++k) {
        if (free_mask[k]) free_index.push_back(k);
    }
    const int kstar = static_cast<int>(free_index.size());
    const int dim = d + kstar;

    Eigen::MatrixXd zstar(n, dim);
    zstar.leftCols(d) = design.z;
    for (int c = 0; c < kstar; ++c) zstar.col(d + c) = design.u.col(free_index[c]);

    Eigen::MatrixXd sigma1 = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd sigma2 = Eigen::MatrixXd::Zero(dim, dim);
    sigma1.selfadjointView<Eigen::Lower>().rankUpdate(zstar.transpose(), 1.0 / n);
    Eigen::MatrixXd scaled = density_at_zero.cwiseSqrt().asDiagonal() * zstar;
    sigma2.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose(), 1.0 / n);
    sigma1.triangularView<Eigen::StrictlyUpper>() = sigma1.transpose();
    sigma2.triangularView<Eigen::StrictlyUpper>() = sigma2.transpose();

    SandwichOracle oracle;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma2);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        const double ridge = 1e-10 * sigma2.trace() / dim;
        sigma2.diagonal().array() += ridge;
        ldlt.compute(sigma2);
        oracle.diagnostics = "Sigma_2 ridge-repaired";
        if (ldlt.info() != Eigen::Success) {
            throw std::runtime_error("sandwich: Sigma_2 is singular beyond repair");
        }
    }

    // C = tau(1-tau)/n * Sigma2^{-1} Sigma1 Sigma2^{-1}
    Eigen::MatrixXd inner = ldlt.solve(sigma1);
    Eigen::MatrixXd c = ldlt.solve(inner.transpose()).transpose();
    c *= tau * (1.0 - tau) / n;

    oracle.alpha_cov = c.topLeftCorner(d, d);
    oracle.sigma.assign(m, Eigen::VectorXd::Zero(eval_grid.size()));
    for (Eigen::Index g = 0; g < eval_grid.size(); ++g) {
        const Eigen::VectorXd bvals = basis.eval(eval_grid[g]);
        Eigen::VectorXd lambda_row = Eigen::VectorXd::Zero(dim);
        for (int l = 0; l < m; ++l) {
            lambda_row.setZero();
            for (int cidx = 0; cidx < kstar; ++cidx) {
                const int k = free_index[cidx];
                if (k / nb == l) lambda_row[d + cidx] = bvals[k % nb];
            }
            oracle.sigma[l][g] = lambda_row.dot(c * lambda_row);
        }
    }
    return oracle;
}

}  // namespace fqr
