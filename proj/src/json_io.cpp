#include "fqr/json_io.hpp"

namespace fqr {

using nlohmann::json;

json solver_config_to_json(const SolverConfig& config) {
    json j;
    j["tau"] = config.tau;
    j["bandwidth"] = config.bandwidth;
    j["kernel"] = kernel_name(config.kernel);
    j["gamma"] = config.gamma;
    j["lambda"] = config.lambda;
    j["scad_a"] = config.scad_a;
    j["deriv_order"] = config.deriv_order;
    j["max_outer"] = config.max_outer;
    j["max_inner"] = config.max_inner;
    j["tol_inner"] = config.tol_inner;
    j["tol_outer"] = config.tol_outer;
    j["line_search"] = {{"backtrack", config.line_search.backtrack},
                        {"armijo_c1", config.line_search.armijo_c1},
                        {"min_step", config.line_search.min_step}};
    j["zero_threshold"] = config.zero_threshold;
    j["lqa_epsilon"] = config.lqa_epsilon;
    j["polish"] = config.polish;
    return j;
}

SolverConfig solver_config_from_json(const json& j) {
    SolverConfig config;
    config.tau = j.at("tau").get<double>();
    config.bandwidth = j.value("bandwidth", 0.0);
    config.kernel = kernel_from_name(j.value("kernel", "gaussian").c_str());
    if (j.contains("gamma")) config.gamma = j["gamma"].get<std::vector<double>>();
    if (j.contains("lambda")) config.lambda = j["lambda"].get<std::vector<double>>();
    config.scad_a = j.value("scad_a", 3.7);
    config.deriv_order = j.value("deriv_order", 2);
    config.max_outer = j.value("max_outer", 100);
    config.max_inner = j.value("max_inner", 200);
    config.tol_inner = j.value("tol_inner", 1e-6);
    config.tol_outer = j.value("tol_outer", 1e-5);
    if (j.contains("line_search")) {
        const auto& ls = j["line_search"];
        config.line_search.backtrack = ls.value("backtrack", 0.5);
        config.line_search.armijo_c1 = ls.value("armijo_c1", 1e-4);
        config.line_search.min_step = ls.value("min_step", 1e-10);
    }
    config.zero_threshold = j.value("zero_threshold", 0.0);
    config.lqa_epsilon = j.value("lqa_epsilon", -1.0);
    config.polish = j.value("polish", true);
    return config;
}

json fit_result_to_json(const FitResult& fit) {
    json j;
    j["alpha"] = std::vector<double>(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
    json theta = json::array();
    for (int l = 0; l < fit.num_functional(); ++l) {
        const Eigen::VectorXd block = fit.theta_block(l);
        theta.push_back(std::vector<double>(block.data(), block.data() + block.size()));
    }
    j["theta"] = theta;
    json regions = json::array();
    for (const auto& per_l : fit.null_regions) {
        json intervals = json::array();
        for (const auto& interval : per_l) {
            intervals.push_back({interval.start, interval.end});
        }
        regions.push_back(intervals);
    }
    j["null_regions"] = regions;
    j["diagnostics"] = {{"converged", fit.converged},
                        {"outer_iterations", fit.outer_iterations},
                        {"inner_iterations", fit.inner_iterations},
                        {"objective", fit.objective},
                        {"bandwidth", fit.bandwidth_used},
                        {"zero_threshold", fit.zero_threshold_used},
                        {"notes", fit.diagnostics}};
    j["basis"] = {{"domain", {fit.basis.domain_start(), fit.basis.domain_end()}},
                  {"num_subintervals", fit.basis.num_subintervals()},
                  {"degree", fit.basis.degree()}};
    return j;
}

json bootstrap_summary_to_json(const BootstrapSummary& summary) {
    json j;
    j["replicates_per_half"] = summary.requested;
    j["replicates_used"] = summary.used;
    j["replicates_dropped"] = summary.dropped;
    j["eval_grid"] = std::vector<double>(summary.eval_grid.data(),
                                         summary.eval_grid.data() + summary.eval_grid.size());
    json sigma = json::array();
    for (const auto& s : summary.sigma_hat) {
        sigma.push_back(std::vector<double>(s.data(), s.data() + s.size()));
    }
    j["sigma_hat"] = sigma;
    json cov = json::array();
    for (Eigen::Index r = 0; r < summary.alpha_cov.rows(); ++r) {
        json rowv = json::array();
        for (Eigen::Index c = 0; c < summary.alpha_cov.cols(); ++c) {
            rowv.push_back(summary.alpha_cov(r, c));
        }
        cov.push_back(rowv);
    }
    j["alpha_cov"] = cov;
    j["diagnostics"] = summary.diagnostics;
    return j;
}

json RunManifest::to_json() const {
    return {{"command", command},
            {"version", kToolVersion},
            {"seed", seed},
            {"config", config},
            {"inputs", input_hashes}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest manifest;
    manifest.command = j.at("command").get<std::string>();
    manifest.seed = j.value("seed", std::uint64_t{0});
    manifest.config = j.value("config", json::object());
    manifest.input_hashes = j.value("inputs", json::object());
    return manifest;
}

std::string RunManifest::compact() const { return to_json().dump(); }

}  // namespace fqr
