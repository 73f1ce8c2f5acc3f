#include <doctest.h>

#include <cmath>

#include "fqr/simlab.hpp"
#include "fqr/tune.hpp"

using namespace fqr;

TEST_SUITE_BEGIN("tune");

namespace {

struct Fixture {
    SplineBasis basis{-1.0, 1.0, 10, 3};
    GramSet gram;
    FunctionalDataset data;
    DesignMatrices design;

    Fixture() {
        gram = compute_gram_set(basis, 2);
        SimScenario scenario = scenario_one_covariate(ErrorLaw::Normal);
        scenario.n = 150;
        scenario.seed = 31;
        data = generate(scenario);
        design = assemble_design(data, basis);
    }
};

}  // namespace

TEST_CASE("default grid shape and scaling") {
    const TuneGrid grid = default_grid(500, 50);
    CHECK(grid.lambdas.size() == 8);
    CHECK(grid.gammas.size() == 6);
    const double scale = std::sqrt(50.0 / 500.0);
    CHECK(grid.lambdas.front() == doctest::Approx(1e-3 * scale));
    CHECK(grid.lambdas.back() == doctest::Approx(scale));
    CHECK(grid.gammas.front() == doctest::Approx(1e-8));
    CHECK(grid.gammas.back() == doctest::Approx(1e-2));
    for (std::size_t i = 1; i < grid.lambdas.size(); ++i) {
        CHECK(grid.lambdas[i] > grid.lambdas[i - 1]);
    }
    for (std::size_t i = 1; i < grid.gammas.size(); ++i) {
        CHECK(grid.gammas[i] > grid.gammas[i - 1]);
    }
    // doubling n shrinks the lambda scale by sqrt(2)
    const TuneGrid grid2 = default_grid(1000, 50);
    CHECK(grid.lambdas.back() / grid2.lambdas.back() == doctest::Approx(std::sqrt(2.0)));
    CHECK(grid.lambdas.front() > 0.0);
}

TEST_CASE("single-cell grid returns that pair and matches a direct fit") {
    const Fixture fx;
    TuneGrid grid;
    grid.lambdas = {0.05};
    grid.gammas = {1e-6};
    SolverConfig base;
    const TuneResult result = tune_fit(fx.design, fx.basis, fx.gram, grid, base, 1);
    CHECK(result.best_lambda == 0.05);
    CHECK(result.best_gamma == 1e-6);
    CHECK(result.table.size() == 1);

    SolverConfig direct = base;
    direct.lambda = {0.05};
    direct.gamma = {1e-6};
    direct.polish = true;
    const FitResult fit = fit_close(fx.design, fx.basis, fx.gram, direct);
    CHECK((result.best_fit.theta - fit.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("enlarging the grid never worsens the winning BIC") {
    const Fixture fx;
    TuneGrid small;
    small.lambdas = {0.02, 0.1};
    small.gammas = {1e-6};
    TuneGrid large = small;
    large.lambdas = {0.005, 0.02, 0.1, 0.3};
    large.gammas = {1e-7, 1e-6};
    SolverConfig base;
    const TuneResult rs = tune_fit(fx.design, fx.basis, fx.gram, small, base, 1);
    const TuneResult rl = tune_fit(fx.design, fx.basis, fx.gram, large, base, 1);
    double best_small = 1e300, best_large = 1e300;
    for (const auto& e : rs.table) best_small = std::min(best_small, e.bic);
    for (const auto& e : rl.table) best_large = std::min(best_large, e.bic);
    CHECK(best_large <= best_small + 1e-12);
    CHECK(rl.table.size() == 8);
}

TEST_CASE("tuning is deterministic") {
    const Fixture fx;
    TuneGrid grid;
    grid.lambdas = {0.01, 0.08};
    grid.gammas = {1e-7, 1e-5};
    SolverConfig base;
    const TuneResult a = tune_fit(fx.design, fx.basis, fx.gram, grid, base, 1);
    const TuneResult b = tune_fit(fx.design, fx.basis, fx.gram, grid, base, 2);
    REQUIRE(a.table.size() == b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) {
        CHECK(a.table[i].bic == b.table[i].bic);
        CHECK(a.table[i].df == b.table[i].df);
    }
    CHECK(a.best_lambda == b.best_lambda);
    CHECK(a.best_gamma == b.best_gamma);
}

TEST_CASE("grid validation") {
    TuneGrid grid;
    CHECK_THROWS(grid.validate());
    grid.lambdas = {0.1};
    grid.gammas = {-1.0};
    CHECK_THROWS(grid.validate());
}

TEST_CASE("bic formula") {
    Eigen::VectorXd residuals(4);
    residuals << 1.0, -1.0, 2.0, -0.5;
    // mean check loss at tau = 0.5 is mean(|r|)/2
    const double expected = std::log((0.5 + 0.5 + 1.0 + 0.25) / 4.0) +
                            3.0 * std::log(4.0) / (2.0 * 4.0);
    CHECK(quantile_bic(residuals, 0.5, 3) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_SUITE_END();
