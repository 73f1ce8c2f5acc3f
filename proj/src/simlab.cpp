#include "fqr/simlab.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "fqr/parallel.hpp"
#include "fqr/rng.hpp"

namespace fqr {

SimScenario scenario_one_covariate(ErrorLaw law) {
    SimScenario s;
    s.beta_true = {[](double t) {
        return (t >= -0.5 && t <= 0.5) ? std::sin(2.0 * M_PI * t) : 0.0;
    }};
    s.error_law = law;
    s.error_scale = (law == ErrorLaw::Normal) ? 0.02 : 0.01;
    return s;
}

SimScenario scenario_two_covariates() {
    SimScenario s;
    s.beta_true = {
        [](double t) { return t <= 0.0 ? std::sin(2.0 * M_PI * t) : 0.0; },
        [](double t) { return (t >= -0.5 && t <= 0.5) ? std::sin(2.0 * M_PI * t) : 0.0; },
    };
    return s;
}

double error_quantile(ErrorLaw law, double scale, double tau) {
    switch (law) {
        case ErrorLaw::Normal:
            return scale * normal_quantile(tau);
        case ErrorLaw::Cauchy:
            return scale * std::tan(M_PI * (tau - 0.5));
    }
    return 0.0;
}

FunctionalDataset generate(const SimScenario& scenario) {
    if (scenario.beta_true.empty()) throw std::invalid_argument("generate: no beta_true");
    if (scenario.grid_size < 2 || scenario.fine_factor < 1) {
        throw std::invalid_argument("generate: bad grid configuration");
    }
    const int n = scenario.n;
    const int m = scenario.m();
    const int G = scenario.grid_size;
    const int fine = (G - 1) * scenario.fine_factor + 1;
    const double span = scenario.t_max - scenario.t_min;
    const double dt_fine = span / (fine - 1);

    Eigen::VectorXd fine_grid(fine);
    for (int g = 0; g < fine; ++g) fine_grid[g] = scenario.t_min + span * g / (fine - 1);
    std::vector<Eigen::VectorXd> beta_on_fine(m);
    for (int l = 0; l < m; ++l) {
        beta_on_fine[l].resize(fine);
        for (int g = 0; g < fine; ++g) beta_on_fine[l][g] = scenario.beta_true[l](fine_grid[g]);
    }
    const Eigen::VectorXd w = trapezoid_weights(fine_grid);

    FunctionalDataset data;
    data.grid.resize(G);
    for (int g = 0; g < G; ++g) {
        data.grid[g] = scenario.t_min + span * g / static_cast<double>(G - 1);
    }
    const int d = static_cast<int>(scenario.alpha_true.size());
    data.y.resize(n);
    data.z.resize(n, d);
    data.z.col(0).setOnes();
    data.x.assign(m, Eigen::MatrixXd(n, G));
    for (int l = 0; l < m; ++l) data.functional_names.push_back("X" + std::to_string(l + 1));
    for (int s = 1; s < d; ++s) data.scalar_names.push_back("z" + std::to_string(s));

    const double shift = error_quantile(scenario.error_law, scenario.error_scale, scenario.tau);
    std::mt19937_64 rng = make_stream(scenario.seed, 0x5157u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::cauchy_distribution<double> cauchy(0.0, 1.0);
    const double sqrt_dt = std::sqrt(dt_fine);

    Eigen::VectorXd path(fine);
    for (int i = 0; i < n; ++i) {
        double y = 0.0;
        for (int s = 1; s < d; ++s) {
            data.z(i, s) = scenario.sigma_z * gauss(rng);
        }
        for (int s = 0; s < d; ++s) y += scenario.alpha_true[s] * data.z(i, s);
        for (int l = 0; l < m; ++l) {
            // Wiener path: X(t_min) = 0, independent N(0, dt) increments.
            path[0] = 0.0;
            for (int g = 1; g < fine; ++g) path[g] = path[g - 1] + sqrt_dt * gauss(rng);
            y += w.dot(path.cwiseProduct(beta_on_fine[l]));
            for (int g = 0; g < G; ++g) data.x[l](i, g) = path[g * scenario.fine_factor];
        }
        const double e = (scenario.error_law == ErrorLaw::Normal)
                             ? scenario.error_scale * gauss(rng)
                             : scenario.error_scale * cauchy(rng);
        data.y[i] = y + e - shift;
    }
    data.validate();
    return data;
}

TdrFdr tdr_fdr(const std::vector<NullInterval>& estimated_null, const BetaFn& beta_true,
               const Eigen::VectorXd& grid) {
    long null_total = 0, signal_total = 0, null_hit = 0, signal_hit = 0;
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
        const double t = grid[g];
        bool flagged = false;
        for (const auto& interval : estimated_null) {
            if (t >= interval.start && t <= interval.end) {
                flagged = true;
                break;
            }
        }
        // beta values are compared against an exactness tolerance so that
        // sin(2 pi t) evaluated at the knot of its own zero counts as null.
        const bool is_null = std::abs(beta_true(t)) < 1e-12;
        if (is_null) {
            ++null_total;
            if (flagged) ++null_hit;
        } else {
            ++signal_total;
            if (flagged) ++signal_hit;
        }
    }
    TdrFdr out;
    if (null_total > 0) out.tdr = static_cast<double>(null_hit) / null_total;
    if (signal_total > 0) out.fdr = static_cast<double>(signal_hit) / signal_total;
    return out;
}

namespace {

double l2_error(const FitResult& fit, int l, const BetaFn& beta_true, double lo, double hi,
                int points) {
    double sum = 0.0;
    const double dt = (hi - lo) / (points - 1);
    for (int g = 0; g < points; ++g) {
        const double t = lo + (hi - lo) * g / static_cast<double>(points - 1);
        const double diff = fit.beta(l, t) - beta_true(t);
        const double w = (g == 0 || g == points - 1) ? 0.5 : 1.0;
        sum += w * diff * diff * dt;
    }
    return sum;  // integrated squared error
}

}  // namespace

MetricReport run_study(const SimScenario& scenario, StudyMethod method, int replicates,
                       const StudyConfig& config) {
    if (replicates < 1) throw std::invalid_argument("run_study: need at least one replicate");
    const int m = scenario.m();
    const SplineBasis basis(scenario.t_min, scenario.t_max, config.K, config.p);
    const GramSet gram = compute_gram_set(basis, config.q);
    const bool want_close = method != StudyMethod::Sql;
    const bool want_sql = method != StudyMethod::Close;

    TuneGrid grid = config.grid;
    if (config.tune && grid.lambdas.empty()) grid = default_grid(scenario.n, config.K);

    MetricReport report;
    report.replicates = replicates;
    report.records.resize(replicates);

    parallel_for(replicates, config.threads, [&](int r) {
        SimScenario local = scenario;
        local.seed = make_stream(scenario.seed, 0x7365u, static_cast<std::uint64_t>(r))();
        const FunctionalDataset data = generate(local);
        const DesignMatrices design = assemble_design(data, basis);

        SolverConfig solver;
        solver.tau = scenario.tau;
        solver.bandwidth = config.bandwidth;
        solver.deriv_order = config.q;
        solver.gamma = {config.gamma};
        solver.lambda = {config.lambda};

        ReplicateRecord rec;
        rec.seed = local.seed;
        if (want_close) {
            FitResult fit;
            if (config.tune) {
                TuneResult tuned = tune_fit(design, basis, gram, grid, solver, 1);
                fit = std::move(tuned.best_fit);
                rec.lambda_used = tuned.best_lambda;
                rec.gamma_used = tuned.best_gamma;
            } else {
                fit = fit_close(design, basis, gram, solver);
                rec.lambda_used = config.lambda;
                rec.gamma_used = config.gamma;
            }
            rec.converged = fit.converged;
            const TdrFdr rates = tdr_fdr(fit.null_regions[0], scenario.beta_true[0], data.grid);
            rec.tdr = rates.tdr;
            rec.fdr = rates.fdr;
            for (int l = 0; l < m; ++l) {
                const double ise = l2_error(fit, l, scenario.beta_true[l], scenario.t_min,
                                            scenario.t_max, config.l2_grid);
                rec.ise_close.push_back(ise);
                rec.l2_close.push_back(std::sqrt(ise));
            }
            rec.alpha_close.assign(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
        }
        if (want_sql) {
            SolverConfig sql_config = solver;
            sql_config.lambda = {0.0};
            const FitResult fit = fit_sql(design, basis, gram, sql_config);
            for (int l = 0; l < m; ++l) {
                rec.l2_sql.push_back(std::sqrt(l2_error(fit, l, scenario.beta_true[l],
                                                        scenario.t_min, scenario.t_max,
                                                        config.l2_grid)));
            }
            if (!want_close) {
                rec.converged = fit.converged;
                rec.alpha_close.assign(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
            }
        }
        report.records[r] = std::move(rec);
    });

    // order-independent aggregation over the indexed records
    const int d = static_cast<int>(scenario.alpha_true.size());
    double tdr_sum = 0.0, fdr_sum = 0.0;
    int tdr_count = 0, fdr_count = 0;
    std::vector<double> l2c(m, 0.0), l2s(m, 0.0), ise(m, 0.0);
    std::vector<double> alpha_sum(d, 0.0), alpha_sq(d, 0.0);
    int alpha_count = 0;
    for (const auto& rec : report.records) {
        if (rec.tdr) {
            tdr_sum += *rec.tdr;
            ++tdr_count;
        }
        if (rec.fdr) {
            fdr_sum += *rec.fdr;
            ++fdr_count;
        }
        for (int l = 0; l < static_cast<int>(rec.l2_close.size()); ++l) {
            l2c[l] += rec.l2_close[l];
            ise[l] += rec.ise_close[l];
        }
        for (int l = 0; l < static_cast<int>(rec.l2_sql.size()); ++l) l2s[l] += rec.l2_sql[l];
        if (!rec.alpha_close.empty()) {
            ++alpha_count;
            for (int s = 0; s < d; ++s) {
                alpha_sum[s] += rec.alpha_close[s];
                alpha_sq[s] += rec.alpha_close[s] * rec.alpha_close[s];
            }
        }
    }
    if (tdr_count > 0) report.mean_tdr = tdr_sum / tdr_count;
    if (fdr_count > 0) report.mean_fdr = fdr_sum / fdr_count;
    if (want_close) {
        for (int l = 0; l < m; ++l) {
            report.mean_l2_close.push_back(l2c[l] / replicates);
            report.imse_close.push_back(ise[l] / replicates);
        }
    }
    if (want_sql) {
        for (int l = 0; l < m; ++l) report.mean_l2_sql.push_back(l2s[l] / replicates);
    }
    if (alpha_count > 0) {
        for (int s = 0; s < d; ++s) {
            const double mean = alpha_sum[s] / alpha_count;
            report.alpha_bias.push_back(mean - scenario.alpha_true[s]);
            const double var =
                std::max(0.0, alpha_sq[s] / alpha_count - mean * mean) *
                (alpha_count / std::max(1.0, alpha_count - 1.0));
            report.alpha_se.push_back(std::sqrt(var));
        }
    }
    return report;
}

}  // namespace fqr
