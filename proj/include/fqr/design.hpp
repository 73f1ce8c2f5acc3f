#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fqr/basis.hpp"

namespace fqr {

// n samples of (response, scalar covariates, m functional covariates observed
// on a shared grid).  z always carries the intercept in column 0.
struct FunctionalDataset {
    Eigen::VectorXd y;               // n responses
    Eigen::MatrixXd z;               // n x d scalar covariates, z.col(0) == 1
    std::vector<Eigen::MatrixXd> x;  // m matrices, each n x G
    Eigen::VectorXd grid;            // G strictly increasing observation times

    std::string response_name = "y";
    std::vector<std::string> scalar_names;      // d-1 names (intercept excluded)
    std::vector<std::string> functional_names;  // m names

    int n() const { return static_cast<int>(y.size()); }
    int d() const { return static_cast<int>(z.cols()); }
    int m() const { return static_cast<int>(x.size()); }
    int grid_size() const { return static_cast<int>(grid.size()); }

    // Checks shapes, the intercept column, grid monotonicity, and finiteness;
    // throws std::invalid_argument with the offending location.
    void validate() const;

    // Row subset (used by the split bootstrap).
    FunctionalDataset subset(const std::vector<int>& rows) const;
};

// Design blocks consumed by the solver: U integrates each functional
// covariate against the basis functions (composite trapezoid on the
// observation grid); Z passes through.
struct DesignMatrices {
    Eigen::MatrixXd u;  // n x m*(K+p), columns grouped by covariate
    Eigen::MatrixXd z;  // n x d
    Eigen::VectorXd y;  // n responses (passed through for the solver)
    int num_basis = 0;       // K+p
    int num_functional = 0;  // m
    std::string quadrature = "trapezoid";

    int n() const { return static_cast<int>(z.rows()); }
    int d() const { return static_cast<int>(z.cols()); }

    DesignMatrices subset(const std::vector<int>& rows) const;
};

// Trapezoid weights for an (irregular) grid.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

DesignMatrices assemble_design(const FunctionalDataset& data, const SplineBasis& basis);

// Dataset on disk: wide CSV plus a JSON manifest naming the response column,
// scalar columns, functional column prefixes, and the observation grid.
// Functional columns for prefix P are the header entries starting with P,
// ordered by their trailing integer.  The intercept is prepended on load.
FunctionalDataset load_dataset(const std::string& csv_path, const std::string& manifest_path);
void save_dataset(const FunctionalDataset& data, const std::string& csv_path,
                  const std::string& manifest_path);

}  // namespace fqr
