#include "fqr/solver.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fqr {

double SolverConfig::gamma_for(int l) const {
    if (gamma.empty()) return 0.0;
    return gamma.size() == 1 ? gamma[0] : gamma.at(l);
}

double SolverConfig::lambda_for(int l) const {
    if (lambda.empty()) return 0.0;
    return lambda.size() == 1 ? lambda[0] : lambda.at(l);
}

bool SolverConfig::sql_mode() const {
    for (double v : lambda) {
        if (v > 0.0) return false;
    }
    return true;
}

void SolverConfig::validate(int num_functional) const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("config: tau must be in (0,1)");
    if (!(tol_inner > 0.0 && tol_outer > 0.0)) {
        throw std::invalid_argument("config: tolerances must be positive");
    }
    if (!(line_search.backtrack > 0.0 && line_search.backtrack < 1.0)) {
        throw std::invalid_argument("config: backtracking factor must be in (0,1)");
    }
    if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("config: iteration caps");
    auto check_per_l = [&](const std::vector<double>& v, const char* what) {
        if (v.size() > 1 && static_cast<int>(v.size()) != num_functional) {
            throw std::invalid_argument(std::string("config: ") + what +
                                        " must have one entry or one per functional covariate");
        }
        for (double x : v) {
            if (x < 0.0) throw std::invalid_argument(std::string("config: negative ") + what);
        }
    };
    check_per_l(gamma, "gamma");
    check_per_l(lambda, "lambda");
    if (!(scad_a > 2.0)) throw std::invalid_argument("config: SCAD a must be > 2");
}

double FitResult::beta(int l, double t) const {
    const int nb = num_basis();
    return basis.eval(t).dot(theta.segment(static_cast<Eigen::Index>(l) * nb, nb));
}

Eigen::VectorXd FitResult::theta_block(int l) const {
    const int nb = num_basis();
    return theta.segment(static_cast<Eigen::Index>(l) * nb, nb);
}

double predict_quantile(const FitResult& fit, const Eigen::VectorXd& z_row,
                        const Eigen::VectorXd& u_row) {
    if (z_row.size() != fit.alpha.size() || u_row.size() != fit.theta.size()) {
        throw std::invalid_argument("predict_quantile: dimension mismatch");
    }
    return z_row.dot(fit.alpha) + u_row.dot(fit.theta);
}

std::vector<std::vector<std::uint8_t>> extract_null_flags(const Eigen::VectorXd& theta,
                                                          const SplineBasis& basis,
                                                          const GramSet& gram, double threshold) {
    const int nb = basis.size();
    const int m = nb == 0 ? 0 : static_cast<int>(theta.size()) / nb;
    std::vector<std::vector<std::uint8_t>> flags(m);
    for (int l = 0; l < m; ++l) {
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, theta.segment(l * nb, nb));
        flags[l].resize(basis.num_subintervals());
        for (int j = 0; j < basis.num_subintervals(); ++j) {
            flags[l][j] = rms[j] < threshold ? 1 : 0;
        }
    }
    return flags;
}

std::vector<NullInterval> merge_null_flags(const std::vector<std::uint8_t>& flags,
                                           const SplineBasis& basis) {
    std::vector<NullInterval> out;
    const int K = static_cast<int>(flags.size());
    int j = 0;
    while (j < K) {
        if (!flags[j]) {
            ++j;
            continue;
        }
        int end = j;
        while (end + 1 < K && flags[end + 1]) ++end;
        out.push_back({j, end, basis.breakpoint(j), basis.breakpoint(end + 1)});
        j = end + 1;
    }
    return out;
}

namespace {

// Penalized smoothed-loss problem on a (possibly reduced) stacked design
// M = [Z U_free].  penalty is the theta-block penalty matrix; objective is
// (1/n) sum l_h(y_i - m_i'b) + theta' penalty theta (+ constant_offset, which
// only shifts reported objective values).
struct NewtonProblem {
    const Eigen::MatrixXd& design;  // n x dim
    const Eigen::VectorXd& y;
    const SmoothedLossSpec& loss;
    const Eigen::MatrixXd& penalty;  // theta_dim x theta_dim
    int d;                           // leading alpha block size
    double constant_offset = 0.0;

    int dim() const { return static_cast<int>(design.cols()); }
    int theta_dim() const { return dim() - d; }

    double value(const Eigen::VectorXd& residual, const Eigen::VectorXd& b) const {
        double loss_sum = 0.0;
        for (Eigen::Index i = 0; i < residual.size(); ++i) {
            loss_sum += smoothed_check(loss, -residual[i]);
        }
        const auto theta = b.tail(theta_dim());
        return loss_sum / static_cast<double>(residual.size()) +
               theta.dot(penalty.selfadjointView<Eigen::Lower>() * theta) + constant_offset;
    }

    // gradient D1; residual = design*b - y
    Eigen::VectorXd gradient(const Eigen::VectorXd& residual, const Eigen::VectorXd& b) const {
        const Eigen::Index n = residual.size();
        Eigen::VectorXd score(n);
        for (Eigen::Index i = 0; i < n; ++i) score[i] = smoothed_grad_scalar(loss, residual[i]);
        Eigen::VectorXd g = design.transpose() * score / static_cast<double>(n);
        g.tail(theta_dim()).noalias() +=
            2.0 * (penalty.selfadjointView<Eigen::Lower>() * b.tail(theta_dim()));
        return g;
    }

    // Hessian D2
    Eigen::MatrixXd hessian(const Eigen::VectorXd& residual) const {
        const Eigen::Index n = residual.size();
        Eigen::VectorXd w(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            w[i] = std::sqrt(std::max(0.0, smoothed_hess_scalar(loss, residual[i]) /
                                               static_cast<double>(n)));
        }
        Eigen::MatrixXd scaled = w.asDiagonal() * design;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
        h.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
        h.triangularView<Eigen::StrictlyUpper>() = h.transpose();
        h.bottomRightCorner(theta_dim(), theta_dim()) +=
            2.0 * Eigen::MatrixXd(penalty.selfadjointView<Eigen::Lower>());
        return h;
    }
};

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    std::string note;
};

// Damped Newton with Armijo backtracking.  b is updated in place; accepted
// objective values are appended to trace.
NewtonOutcome newton_minimize(const NewtonProblem& problem, Eigen::VectorXd& b, int max_iter,
                              double tol, const LineSearchConfig& ls,
                              std::vector<double>* trace) {
    NewtonOutcome out;
    Eigen::VectorXd residual = problem.design * b - problem.y;
    double f = problem.value(residual, b);
    if (trace) trace->push_back(f);

    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd g = problem.gradient(residual, b);
        out.gradient_norm = g.lpNorm<Eigen::Infinity>();
        if (out.gradient_norm < tol) {
            out.converged = true;
            break;
        }
        Eigen::MatrixXd h = problem.hessian(residual);
        const double base_ridge = 1e-8 * h.trace() / h.rows();
        double ridge = 0.0;
        Eigen::VectorXd step;
        double descent = 0.0;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
            if (ldlt.info() == Eigen::Success) {
                step = ldlt.solve(g);
                descent = g.dot(step);
                if (std::isfinite(descent) && descent > 0.0) break;
            }
            ridge = (ridge == 0.0) ? std::max(base_ridge, 1e-12) : ridge * 10.0;
            h.diagonal().array() += ridge;
            if (attempt == 0 && out.note.empty()) out.note = "hessian ridge-repaired";
        }
        if (!(descent > 0.0)) {
            out.note = "no descent direction (singular Hessian)";
            break;
        }
        // numerically at the optimum: expected decrease below round-off
        if (descent <= 1e-15 * (1.0 + std::abs(f))) {
            out.converged = true;
            break;
        }

        const Eigen::VectorXd dr = problem.design * step;
        double eta = 1.0;
        bool accepted = false;
        while (eta >= ls.min_step) {
            const Eigen::VectorXd b_trial = b - eta * step;
            const Eigen::VectorXd r_trial = residual - eta * dr;
            const double f_trial = problem.value(r_trial, b_trial);
            if (f_trial <= f - ls.armijo_c1 * eta * descent) {
                const double step_size = eta * step.norm() / (1.0 + b.norm());
                const double f_change = (f - f_trial) / (1.0 + std::abs(f));
                b = b_trial;
                residual = r_trial;
                f = f_trial;
                ++out.iterations;
                if (trace) trace->push_back(f);
                accepted = true;
                if (step_size < tol && f_change < tol) out.converged = true;
                break;
            }
            eta *= ls.backtrack;
        }
        if (!accepted) {
            out.note = "line search reached minimum step without decrease";
            break;
        }
        if (out.converged) break;
    }
    out.objective = f;
    out.gradient_norm = problem.gradient(residual, b).lpNorm<Eigen::Infinity>();
    return out;
}

Eigen::MatrixXd roughness_penalty(const GramSet& gram, const SolverConfig& config, int m) {
    const int nb = static_cast<int>(gram.deriv_gram.rows());
    Eigen::MatrixXd penalty = Eigen::MatrixXd::Zero(m * nb, m * nb);
    for (int l = 0; l < m; ++l) {
        penalty.block(l * nb, l * nb, nb, nb) = config.gamma_for(l) * gram.deriv_gram;
    }
    return penalty;
}

std::vector<ScadParams> scad_params(const SolverConfig& config, int m) {
    std::vector<ScadParams> params;
    params.reserve(m);
    for (int l = 0; l < m; ++l) params.emplace_back(config.lambda_for(l), config.scad_a);
    return params;
}

SmoothedLossSpec resolve_loss(const DesignMatrices& design, const SplineBasis& basis,
                              const SolverConfig& config) {
    double h = config.bandwidth;
    if (h <= 0.0) {
        h = default_bandwidth(basis.num_subintervals(), basis.degree(), design.d(),
                              design.n());
    }
    return SmoothedLossSpec(config.tau, h, config.kernel);
}

Eigen::MatrixXd stack_design(const DesignMatrices& design,
                             const std::vector<std::uint8_t>* free_mask,
                             std::vector<int>* free_index) {
    const int n = design.n();
    const int d = design.d();
    if (!free_mask) {
        Eigen::MatrixXd m(n, d + design.u.cols());
        m.leftCols(d) = design.z;
        m.rightCols(design.u.cols()) = design.u;
        return m;
    }
    free_index->clear();
    for (int k = 0; k < static_cast<int>(free_mask->size()); ++k) {
        if ((*free_mask)[k]) free_index->push_back(k);
    }
    Eigen::MatrixXd m(n, d + static_cast<int>(free_index->size()));
    m.leftCols(d) = design.z;
    for (std::size_t c = 0; c < free_index->size(); ++c) {
        m.col(d + static_cast<int>(c)) = design.u.col((*free_index)[c]);
    }
    return m;
}

}  // namespace

double close_objective(const DesignMatrices& design, const SplineBasis& basis,
                       const GramSet& gram, const SolverConfig& config,
                       const Eigen::VectorXd& alpha, const Eigen::VectorXd& theta) {
    const SmoothedLossSpec loss = resolve_loss(design, basis, config);
    const int m = design.num_functional;
    const Eigen::VectorXd residual = design.z * alpha + design.u * theta - design.y;
    double loss_sum = 0.0;
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
        loss_sum += smoothed_check(loss, -residual[i]);
    }
    double value = loss_sum / design.n();
    const int nb = basis.size();
    for (int l = 0; l < m; ++l) {
        const auto theta_l = theta.segment(l * nb, nb);
        value += config.gamma_for(l) * theta_l.dot(gram.deriv_gram * theta_l);
    }
    if (!config.sql_mode()) {
        value += fscad_value(basis, gram, scad_params(config, m), theta);
    }
    return value;
}

ObjectivePieces objective_pieces(const DesignMatrices& design, const SplineBasis& basis,
                                 const GramSet& gram, const SolverConfig& config,
                                 const LqaWeights* weights, const Eigen::VectorXd& alpha,
                                 const Eigen::VectorXd& theta) {
    const int m = design.num_functional;
    const int nb = basis.size();
    const SmoothedLossSpec loss = resolve_loss(design, basis, config);
    const Eigen::MatrixXd stacked = stack_design(design, nullptr, nullptr);
    Eigen::MatrixXd penalty = roughness_penalty(gram, config, m);
    double offset = 0.0;
    if (weights) {
        for (int l = 0; l < m; ++l) {
            penalty.block(l * nb, l * nb, nb, nb) += weights->blocks[l];
        }
        offset = weights->r2_constant;
    }
    const NewtonProblem problem{stacked, design.y, loss, penalty, design.d(), offset};
    Eigen::VectorXd b(design.d() + m * nb);
    b.head(design.d()) = alpha;
    b.tail(m * nb) = theta;
    const Eigen::VectorXd residual = stacked * b - design.y;
    ObjectivePieces pieces;
    pieces.value = problem.value(residual, b);
    pieces.gradient = problem.gradient(residual, b);
    pieces.hessian = problem.hessian(residual);
    return pieces;
}

namespace {

// Shared implementation for unconstrained and constrained SQL fits, with an
// optional extra theta-block penalty (the LQA weights) and warm start.
FitResult sql_fit_impl(const DesignMatrices& design, const SplineBasis& basis,
                       const GramSet& gram, const SolverConfig& config,
                       const std::vector<std::uint8_t>* free_mask,
                       const Eigen::VectorXd* warm_alpha, const Eigen::VectorXd* warm_theta) {
    config.validate(design.num_functional);
    if (design.num_basis != basis.size()) {
        throw std::invalid_argument("fit: design was assembled with a different basis");
    }
    const int m = design.num_functional;
    const int d = design.d();
    const int nb = basis.size();
    const SmoothedLossSpec loss = resolve_loss(design, basis, config);

    std::vector<int> free_index;
    const Eigen::MatrixXd stacked = stack_design(design, free_mask, &free_index);
    const int theta_dim_full = m * nb;
    const int theta_dim = static_cast<int>(stacked.cols()) - d;

    Eigen::MatrixXd penalty_full = roughness_penalty(gram, config, m);
    Eigen::MatrixXd penalty;
    if (free_mask) {
        penalty.resize(theta_dim, theta_dim);
        for (int r = 0; r < theta_dim; ++r) {
            for (int c = 0; c < theta_dim; ++c) {
                penalty(r, c) = penalty_full(free_index[r], free_index[c]);
            }
        }
    } else {
        penalty = std::move(penalty_full);
    }

    NewtonProblem problem{stacked, design.y, loss, penalty, d, 0.0};
    Eigen::VectorXd b = Eigen::VectorXd::Zero(stacked.cols());
    const bool have_warm = (warm_alpha && warm_alpha->size() == d) ||
                           (warm_theta && warm_theta->size() == theta_dim_full);
    if (have_warm) {
        if (warm_alpha && warm_alpha->size() == d) b.head(d) = *warm_alpha;
        if (warm_theta && warm_theta->size() == theta_dim_full) {
            if (free_mask) {
                for (int c = 0; c < theta_dim; ++c) b[d + c] = (*warm_theta)[free_index[c]];
            } else {
                b.tail(theta_dim) = *warm_theta;
            }
        }
    } else {
        // Penalized least-squares start.  The smoothed loss has negligible
        // curvature far from the data when h is small, so Newton needs an
        // initial point in the right basin.
        const int dim = static_cast<int>(stacked.cols());
        Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(dim, dim);
        normal.selfadjointView<Eigen::Lower>().rankUpdate(stacked.transpose(),
                                                          1.0 / design.n());
        normal.triangularView<Eigen::StrictlyUpper>() = normal.transpose();
        normal.bottomRightCorner(theta_dim, theta_dim) += 2.0 * penalty;
        normal.diagonal().array() += 1e-10 * (normal.trace() / dim + 1.0);
        const Eigen::VectorXd rhs = stacked.transpose() * design.y / design.n();
        b = Eigen::LDLT<Eigen::MatrixXd>(normal).solve(rhs);
        if (!b.allFinite()) b.setZero();
    }

    FitResult result;
    result.basis = basis;
    const NewtonOutcome outcome = newton_minimize(problem, b, config.max_inner,
                                                  config.tol_inner, config.line_search,
                                                  &result.objective_trace);
    result.alpha = b.head(d);
    result.theta = Eigen::VectorXd::Zero(theta_dim_full);
    if (free_mask) {
        for (int c = 0; c < theta_dim; ++c) result.theta[free_index[c]] = b[d + c];
    } else {
        result.theta = b.tail(theta_dim);
    }
    result.converged = outcome.converged;
    result.inner_iterations = outcome.iterations;
    result.outer_iterations = 1;
    result.objective = outcome.objective;
    result.bandwidth_used = loss.bandwidth;
    result.null_flags.assign(m, std::vector<std::uint8_t>(basis.num_subintervals(), 0));
    result.null_regions.assign(m, {});
    if (!outcome.note.empty()) result.diagnostics = outcome.note;
    if (!outcome.converged && result.diagnostics.empty()) {
        result.diagnostics = "iteration cap reached";
    }
    return result;
}

}  // namespace

FitResult fit_sql(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                  const SolverConfig& config) {
    return sql_fit_impl(design, basis, gram, config, nullptr, nullptr, nullptr);
}

FitResult fit_sql_constrained(const DesignMatrices& design, const SplineBasis& basis,
                              const GramSet& gram, const SolverConfig& config,
                              const std::vector<std::uint8_t>& free_mask,
                              const Eigen::VectorXd* warm_alpha,
                              const Eigen::VectorXd* warm_theta) {
    if (static_cast<int>(free_mask.size()) != design.num_functional * basis.size()) {
        throw std::invalid_argument("fit_sql_constrained: free mask has wrong length");
    }
    return sql_fit_impl(design, basis, gram, config, &free_mask, warm_alpha, warm_theta);
}

FitResult fit_close(const DesignMatrices& design, const SplineBasis& basis, const GramSet& gram,
                    const SolverConfig& config) {
    config.validate(design.num_functional);
    if (config.sql_mode()) return fit_sql(design, basis, gram, config);

    const int m = design.num_functional;
    const int d = design.d();
    const int nb = basis.size();
    const SmoothedLossSpec loss = resolve_loss(design, basis, config);
    const std::vector<ScadParams> params = scad_params(config, m);

    // Algorithm initialization: plain SQL minimizer.
    FitResult state = fit_sql(design, basis, gram, config);
    std::ostringstream diag;
    if (!state.converged) diag << "initial SQL fit did not converge; ";

    // Coefficient scale of the unpenalized fit; anchors the default zero
    // threshold (the LQA shrinks null fits uniformly, so the converged RMS
    // carries no usable scale of its own when everything is null).
    double init_rms_max = 0.0;
    for (int l = 0; l < m; ++l) {
        const Eigen::VectorXd rms = subinterval_rms(basis, gram, state.theta.segment(l * nb, nb));
        init_rms_max = std::max(init_rms_max, rms.maxCoeff());
    }

    const Eigen::MatrixXd stacked = stack_design(design, nullptr, nullptr);
    const Eigen::MatrixXd rough = roughness_penalty(gram, config, m);

    FitResult result;
    result.basis = basis;
    result.bandwidth_used = loss.bandwidth;
    result.alpha = state.alpha;
    result.theta = state.theta;

    double true_obj = close_objective(design, basis, gram, config, result.alpha, result.theta);
    result.outer_objective_trace.push_back(true_obj);
    bool outer_converged = false;
    int outer = 0;
    int inner_total = 0;
    for (; outer < config.max_outer; ++outer) {
        const LqaWeights weights =
            lqa_weights(basis, gram, params, result.theta, config.lqa_epsilon);
        Eigen::MatrixXd penalty = rough;
        for (int l = 0; l < m; ++l) {
            penalty.block(l * nb, l * nb, nb, nb) += weights.blocks[l];
        }
        NewtonProblem problem{stacked, design.y, loss, penalty, d, weights.r2_constant};

        Eigen::VectorXd b(d + m * nb);
        b.head(d) = result.alpha;
        b.tail(m * nb) = result.theta;
        const Eigen::VectorXd b_prev = b;
        const NewtonOutcome outcome = newton_minimize(problem, b, config.max_inner,
                                                      config.tol_inner, config.line_search,
                                                      &result.objective_trace);
        inner_total += outcome.iterations;
        if (!outcome.note.empty()) diag << "outer " << outer + 1 << ": " << outcome.note << "; ";

        result.alpha = b.head(d);
        result.theta = b.tail(m * nb);
        const double true_obj_new =
            close_objective(design, basis, gram, config, result.alpha, result.theta);
        result.outer_objective_trace.push_back(true_obj_new);
        const double param_change = (b - b_prev).norm() / (1.0 + b_prev.norm());
        const double obj_change = std::abs(true_obj - true_obj_new) / (1.0 + std::abs(true_obj));
        true_obj = true_obj_new;
        if (param_change < config.tol_outer && obj_change < config.tol_outer) {
            outer_converged = true;
            ++outer;
            break;
        }
    }
    result.outer_iterations = outer;
    result.inner_iterations = inner_total;
    result.converged = outer_converged;
    if (!outer_converged) diag << "outer iteration cap reached; ";

    // Resolve the threshold against the initialization's coefficient scale.
    // The LQA leaves small straggler coefficients at sparsity-region borders,
    // so the cutoff sits at a few percent of the unpenalized scale rather
    // than at numerical zero.
    double threshold = config.zero_threshold;
    if (threshold <= 0.0) threshold = 0.05 * init_rms_max;
    result.zero_threshold_used = threshold;

    // Flag small-RMS subintervals, then zero every coefficient touching a
    // flagged subinterval so the reconstruction vanishes identically there.
    const auto flags = extract_null_flags(result.theta, basis, gram, threshold);
    std::vector<std::uint8_t> free_mask(m * nb, 1);
    for (int l = 0; l < m; ++l) {
        for (int k = 0; k < nb; ++k) {
            for (int j = basis.support_first(k); j <= basis.support_last(k); ++j) {
                if (flags[l][j]) {
                    free_mask[l * nb + k] = 0;
                    break;
                }
            }
        }
    }
    for (int k = 0; k < m * nb; ++k) {
        if (!free_mask[k]) result.theta[k] = 0.0;
    }

    if (config.polish) {
        const FitResult polished = fit_sql_constrained(design, basis, gram, config, free_mask,
                                                       &result.alpha, &result.theta);
        result.alpha = polished.alpha;
        result.theta = polished.theta;
        if (!polished.converged) diag << "polish refit did not converge; ";
        result.objective =
            close_objective(design, basis, gram, config, result.alpha, result.theta);
    } else {
        result.objective = true_obj;
    }

    // Final null regions: subintervals whose contributing coefficients are all
    // zero, i.e. where beta is exactly the zero function.
    result.null_flags.assign(m, std::vector<std::uint8_t>(basis.num_subintervals(), 0));
    result.null_regions.assign(m, {});
    for (int l = 0; l < m; ++l) {
        for (int j = 0; j < basis.num_subintervals(); ++j) {
            bool all_zero = true;
            for (int k = j; k <= j + basis.degree(); ++k) {
                if (free_mask[l * nb + k]) {
                    all_zero = false;
                    break;
                }
            }
            result.null_flags[l][j] = all_zero ? 1 : 0;
        }
        result.null_regions[l] = merge_null_flags(result.null_flags[l], basis);
    }
    result.diagnostics = diag.str();
    return result;
}

}  // namespace fqr
