#include "fqr/tune.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fqr/parallel.hpp"

namespace fqr {

void TuneGrid::validate() const {
    if (lambdas.empty() || gammas.empty()) {
        throw std::invalid_argument("tune grid: candidate sets must be non-empty");
    }
    for (double v : lambdas) {
        if (v < 0.0) throw std::invalid_argument("tune grid: negative lambda");
    }
    for (double v : gammas) {
        if (v < 0.0) throw std::invalid_argument("tune grid: negative gamma");
    }
}

namespace {

std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> out(count);
    const double step = (std::log(hi) - std::log(lo)) / (count - 1);
    for (int i = 0; i < count; ++i) out[i] = std::exp(std::log(lo) + step * i);
    return out;
}

}  // namespace

TuneGrid default_grid(int n, int K) {
    TuneGrid grid;
    const double scale = std::sqrt(static_cast<double>(K) / n);
    grid.lambdas = log_spaced(1e-3 * scale, scale, 8);
    grid.gammas = log_spaced(1e-8, 1e-2, 6);
    return grid;
}

double quantile_bic(const Eigen::VectorXd& residuals, double tau, int df) {
    const Eigen::Index n = residuals.size();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += check_loss(tau, residuals[i]);
    return std::log(sum / n) + df * std::log(static_cast<double>(n)) / (2.0 * n);
}

TuneResult tune_fit(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                    const TuneGrid& grid, const SolverConfig& base_config, int threads) {
    grid.validate();
    const int cells = static_cast<int>(grid.lambdas.size() * grid.gammas.size());
    std::vector<TuneEntry> table(cells);
    std::vector<FitResult> fits(cells);

    parallel_for(cells, threads, [&](int cell) {
        const double lambda = grid.lambdas[cell / grid.gammas.size()];
        const double gamma = grid.gammas[cell % grid.gammas.size()];
        SolverConfig config = base_config;
        config.lambda = {lambda};
        config.gamma = {gamma};
        config.polish = true;  // BIC scores the signal-region refit
        FitResult fit = fit_close(design, basis, gram, config);

        const Eigen::VectorXd residuals =
            design.y - design.z * fit.alpha - design.u * fit.theta;
        int surviving = 0;
        for (Eigen::Index k = 0; k < fit.theta.size(); ++k) {
            if (fit.theta[k] != 0.0) ++surviving;
        }
        const int df = surviving + design.d();
        TuneEntry entry;
        entry.lambda = lambda;
        entry.gamma = gamma;
        entry.df = df;
        entry.converged = fit.converged;
        entry.bic = quantile_bic(residuals, config.tau, df);
        table[cell] = entry;
        fits[cell] = std::move(fit);
    });

    int best = -1;
    for (int cell = 0; cell < cells; ++cell) {
        if (!table[cell].converged) continue;
        if (best < 0 || table[cell].bic < table[best].bic ||
            (table[cell].bic == table[best].bic &&
             (table[cell].lambda > table[best].lambda ||
              (table[cell].lambda == table[best].lambda &&
               table[cell].gamma > table[best].gamma)))) {
            best = cell;
        }
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "tune_fit: no candidate pair converged (" << cells << " cells tried)";
        throw std::runtime_error(msg.str());
    }

    TuneResult result;
    result.best_lambda = table[best].lambda;
    result.best_gamma = table[best].gamma;
    result.best_fit = std::move(fits[best]);
    result.table = std::move(table);
    return result;
}

}  // namespace fqr
