#include "fqr/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>

#include "fqr/design.hpp"
#include "fqr/inference.hpp"
#include "fqr/json_io.hpp"
#include "fqr/parallel.hpp"
#include "fqr/simlab.hpp"
#include "fqr/solver.hpp"
#include "fqr/text_io.hpp"
#include "fqr/tune.hpp"

namespace fqr {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;

// Flags shared by every dataset-consuming command.
struct FitArgs {
    std::string data_csv;
    std::string data_meta;
    double tau = 0.5;
    int K = 40;
    int p = 3;
    int q = 2;
    std::vector<double> lambda{0.0};
    std::vector<double> gamma{1e-6};
    double bandwidth = 0.0;
    std::string kernel = "gaussian";
    bool sql = false;
    double zero_threshold = 0.0;
    std::string out = ".";

    json to_json() const {
        return {{"data", data_csv},   {"meta", data_meta}, {"tau", tau},
                {"K", K},             {"p", p},            {"q", q},
                {"lambda", lambda},   {"gamma", gamma},    {"bandwidth", bandwidth},
                {"kernel", kernel},   {"sql", sql},        {"zero_threshold", zero_threshold}};
    }
    static FitArgs from_json(const json& j) {
        FitArgs a;
        a.data_csv = j.at("data").get<std::string>();
        a.data_meta = j.at("meta").get<std::string>();
        a.tau = j.at("tau").get<double>();
        a.K = j.at("K").get<int>();
        a.p = j.at("p").get<int>();
        a.q = j.at("q").get<int>();
        a.lambda = j.at("lambda").get<std::vector<double>>();
        a.gamma = j.at("gamma").get<std::vector<double>>();
        a.bandwidth = j.at("bandwidth").get<double>();
        a.kernel = j.at("kernel").get<std::string>();
        a.sql = j.at("sql").get<bool>();
        a.zero_threshold = j.at("zero_threshold").get<double>();
        return a;
    }
};

void add_fit_options(CLI::App* cmd, FitArgs& args) {
    cmd->add_option("--data", args.data_csv, "dataset CSV (wide format)")->required();
    cmd->add_option("--meta", args.data_meta, "dataset JSON manifest")->required();
    cmd->add_option("--tau", args.tau, "quantile level in (0,1)")->required();
    cmd->add_option("--K", args.K, "number of spline subintervals");
    cmd->add_option("--p", args.p, "spline degree");
    cmd->add_option("--q", args.q, "roughness derivative order");
    cmd->add_option("--lambda", args.lambda, "fSCAD strength (one value or one per covariate)");
    cmd->add_option("--gamma", args.gamma, "roughness strength (one value or one per covariate)");
    cmd->add_option("--bandwidth", args.bandwidth, "smoothing bandwidth (0 = plug-in rule)");
    cmd->add_option("--kernel", args.kernel, "gaussian | uniform | epanechnikov");
    cmd->add_flag("--sql", args.sql, "baseline mode: drop the sparsity penalty");
    cmd->add_option("--threshold", args.zero_threshold,
                    "zero threshold (0 = relative default)");
    cmd->add_option("--out", args.out, "output directory");
}

struct LoadedProblem {
    FunctionalDataset data;
    SplineBasis basis{0.0, 1.0, 1, 0};
    GramSet gram;
    DesignMatrices design;
    SolverConfig config;
};

LoadedProblem load_problem(const FitArgs& args) {
    LoadedProblem prob;
    prob.data = load_dataset(args.data_csv, args.data_meta);
    const double lo = prob.data.grid_size() > 0 ? prob.data.grid[0] : 0.0;
    const double hi =
        prob.data.grid_size() > 0 ? prob.data.grid[prob.data.grid_size() - 1] : 1.0;
    prob.basis = SplineBasis(lo, hi, args.K, args.p);
    prob.gram = compute_gram_set(prob.basis, args.q);
    prob.design = assemble_design(prob.data, prob.basis);
    prob.config.tau = args.tau;
    prob.config.bandwidth = args.bandwidth;
    prob.config.kernel = kernel_from_name(args.kernel.c_str());
    prob.config.gamma = args.gamma;
    prob.config.lambda = args.sql ? std::vector<double>{0.0} : args.lambda;
    prob.config.deriv_order = args.q;
    prob.config.zero_threshold = args.zero_threshold;
    return prob;
}

RunManifest make_manifest(const std::string& command, const json& config,
                          std::uint64_t seed, const std::vector<std::string>& inputs) {
    RunManifest manifest;
    manifest.command = command;
    manifest.config = config;
    manifest.seed = seed;
    for (const auto& path : inputs) {
        manifest.input_hashes[path] = fnv1a_hex(read_text_file(path));
    }
    return manifest;
}

std::string out_path(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return (fs::path(dir) / name).string();
}

void write_json_artifact(const std::string& path, json payload, const RunManifest& manifest) {
    payload["manifest"] = manifest.to_json();
    write_text_file(path, payload.dump(2) + "\n");
}

// beta evaluations over the observation grid: t, beta, null_flag per covariate.
void emit_fit_artifacts(const LoadedProblem& prob, const FitResult& fit,
                        const RunManifest& manifest, const std::string& out_dir) {
    write_json_artifact(out_path(out_dir, "fit.json"), {{"fit", fit_result_to_json(fit)}},
                        manifest);
    for (int l = 0; l < prob.data.m(); ++l) {
        CsvTable table;
        table.header = {"t", "beta", "null_flag"};
        for (int g = 0; g < prob.data.grid_size(); ++g) {
            const double t = prob.data.grid[g];
            bool in_null = false;
            for (const auto& interval : fit.null_regions[l]) {
                if (t >= interval.start && t <= interval.end) {
                    in_null = true;
                    break;
                }
            }
            table.rows.push_back({format_double(t), format_double(fit.beta(l, t)),
                                  in_null ? "1" : "0"});
        }
        write_csv(out_path(out_dir, "beta_" + prob.data.functional_names[l] + ".csv"), table,
                  manifest.compact());
    }
}

int run_fit(const FitArgs& args, const std::string& out_dir) {
    const LoadedProblem prob = load_problem(args);
    const RunManifest manifest =
        make_manifest("fit", args.to_json(), 0, {args.data_csv, args.data_meta});
    const FitResult fit = prob.config.sql_mode()
                              ? fit_sql(prob.design, prob.basis, prob.gram, prob.config)
                              : fit_close(prob.design, prob.basis, prob.gram, prob.config);
    emit_fit_artifacts(prob, fit, manifest, out_dir);
    return fit.converged ? kExitOk : kExitNoConvergence;
}

struct TuneArgs {
    FitArgs fit;
    std::vector<double> lambda_grid;
    std::vector<double> gamma_grid;
    bool auto_grid = false;

    json to_json() const {
        json j = fit.to_json();
        j["lambda_grid"] = lambda_grid;
        j["gamma_grid"] = gamma_grid;
        j["auto_grid"] = auto_grid;
        return j;
    }
    static TuneArgs from_json(const json& j) {
        TuneArgs a;
        a.fit = FitArgs::from_json(j);
        a.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        a.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
        a.auto_grid = j.at("auto_grid").get<bool>();
        return a;
    }
};

int run_tune(const TuneArgs& args, const std::string& out_dir) {
    const LoadedProblem prob = load_problem(args.fit);
    TuneGrid grid;
    if (args.auto_grid) {
        grid = default_grid(prob.data.n(), prob.basis.num_subintervals());
    } else {
        grid.lambdas = args.lambda_grid;
        grid.gammas = args.gamma_grid;
    }
    grid.validate();
    const RunManifest manifest =
        make_manifest("tune", args.to_json(), 0, {args.fit.data_csv, args.fit.data_meta});
    const TuneResult result =
        tune_fit(prob.design, prob.basis, prob.gram, grid, prob.config, 0);

    CsvTable table;
    table.header = {"lambda", "gamma", "bic", "df", "converged"};
    for (const auto& entry : result.table) {
        table.rows.push_back({format_double(entry.lambda), format_double(entry.gamma),
                              format_double(entry.bic), std::to_string(entry.df),
                              entry.converged ? "1" : "0"});
    }
    write_csv(out_path(out_dir, "bic.csv"), table, manifest.compact());
    emit_fit_artifacts(prob, result.best_fit, manifest, out_dir);
    json best = {{"lambda", result.best_lambda}, {"gamma", result.best_gamma}};
    write_json_artifact(out_path(out_dir, "tune.json"), {{"best", best}}, manifest);
    return result.best_fit.converged ? kExitOk : kExitNoConvergence;
}

struct BootstrapArgs {
    FitArgs fit;
    int replicates = 200;
    double level = 0.05;
    std::uint64_t seed = 1;

    json to_json() const {
        json j = fit.to_json();
        j["B"] = replicates;
        j["level"] = level;
        j["seed"] = seed;
        return j;
    }
    static BootstrapArgs from_json(const json& j) {
        BootstrapArgs a;
        a.fit = FitArgs::from_json(j);
        a.replicates = j.at("B").get<int>();
        a.level = j.at("level").get<double>();
        a.seed = j.at("seed").get<std::uint64_t>();
        return a;
    }
};

void write_band(const std::string& path, const BandTable& band, const RunManifest& manifest) {
    CsvTable table;
    table.header = {"t", "estimate", "lower", "upper"};
    for (Eigen::Index i = 0; i < band.t.size(); ++i) {
        table.rows.push_back({format_double(band.t[i]), format_double(band.estimate[i]),
                              format_double(band.lower[i]), format_double(band.upper[i])});
    }
    write_csv(path, table, manifest.compact());
}

int run_bootstrap(const BootstrapArgs& args, const std::string& out_dir) {
    const LoadedProblem prob = load_problem(args.fit);
    const RunManifest manifest = make_manifest("bootstrap", args.to_json(), args.seed,
                                               {args.fit.data_csv, args.fit.data_meta});

    const FitResult fit = prob.config.sql_mode()
                              ? fit_sql(prob.design, prob.basis, prob.gram, prob.config)
                              : fit_close(prob.design, prob.basis, prob.gram, prob.config);
    emit_fit_artifacts(prob, fit, manifest, out_dir);

    BootstrapConfig bconfig;
    bconfig.replicates = args.replicates;
    bconfig.seed = args.seed;
    const BootstrapSummary summary =
        wild_bootstrap(prob.data, prob.basis, prob.gram, prob.config, bconfig);

    for (int l = 0; l < prob.data.m(); ++l) {
        const std::string name = prob.data.functional_names[l];
        write_band(out_path(out_dir, "band_" + name + "_scb.csv"),
                   build_scb(summary, fit, l, args.level), manifest);
        write_band(out_path(out_dir, "band_" + name + "_pcb.csv"),
                   build_pcb(summary, fit, l, args.level), manifest);
    }

    const AlphaCiTable ci = alpha_confidence_intervals(summary, fit, args.level);
    CsvTable citable;
    citable.header = {"component", "estimate",     "percentile_lower", "percentile_upper",
                      "normal_lower", "normal_upper"};
    std::vector<std::string> names{"intercept"};
    for (const auto& s : prob.data.scalar_names) names.push_back(s);
    for (int s = 0; s < prob.data.d(); ++s) {
        citable.rows.push_back({names[s], format_double(ci.estimate[s]),
                                format_double(ci.percentile_lower[s]),
                                format_double(ci.percentile_upper[s]),
                                format_double(ci.normal_lower[s]),
                                format_double(ci.normal_upper[s])});
    }
    write_csv(out_path(out_dir, "alpha_ci.csv"), citable, manifest.compact());

    // per-half replicate dumps of the fitted alpha values
    int row = 0;
    for (int half = 0; half < 2; ++half) {
        CsvTable reps;
        reps.header = {"replicate"};
        for (const auto& n : names) reps.header.push_back("alpha_" + n);
        const int count = summary.used / 2 + (half == 0 ? summary.used % 2 : 0);
        for (int b = 0; b < count && row < summary.used; ++b, ++row) {
            std::vector<std::string> cells{std::to_string(b)};
            for (int s = 0; s < prob.data.d(); ++s) {
                cells.push_back(format_double(summary.alpha_reps(row, s)));
            }
            reps.rows.push_back(std::move(cells));
        }
        write_csv(out_path(out_dir, "replicates_half" + std::to_string(half + 1) + ".csv"),
                  reps, manifest.compact());
    }

    write_json_artifact(out_path(out_dir, "bootstrap.json"),
                        {{"bootstrap", bootstrap_summary_to_json(summary)}}, manifest);
    return fit.converged ? kExitOk : kExitNoConvergence;
}

struct SimulateArgs {
    std::string scenario = "normal";
    int n = 500;
    double tau = 0.5;
    int replicates = 100;
    std::string method = "both";
    std::uint64_t seed = 1;
    int K = 40;
    int p = 1;
    int q = 1;
    double lambda = 0.04;
    double gamma = 1e-5;
    bool tune = false;

    json to_json() const {
        return {{"scenario", scenario}, {"n", n},         {"tau", tau},
                {"replicates", replicates}, {"method", method}, {"seed", seed},
                {"K", K},               {"p", p},         {"q", q},
                {"lambda", lambda},     {"gamma", gamma}, {"tune", tune}};
    }
    static SimulateArgs from_json(const json& j) {
        SimulateArgs a;
        a.scenario = j.at("scenario").get<std::string>();
        a.n = j.at("n").get<int>();
        a.tau = j.at("tau").get<double>();
        a.replicates = j.at("replicates").get<int>();
        a.method = j.at("method").get<std::string>();
        a.seed = j.at("seed").get<std::uint64_t>();
        a.K = j.at("K").get<int>();
        a.p = j.at("p").get<int>();
        a.q = j.at("q").get<int>();
        a.lambda = j.at("lambda").get<double>();
        a.gamma = j.at("gamma").get<double>();
        a.tune = j.at("tune").get<bool>();
        return a;
    }
};

int run_simulate(const SimulateArgs& args, const std::string& out_dir) {
    SimScenario scenario;
    if (args.scenario == "normal") {
        scenario = scenario_one_covariate(ErrorLaw::Normal);
    } else if (args.scenario == "cauchy") {
        scenario = scenario_one_covariate(ErrorLaw::Cauchy);
    } else if (args.scenario == "two-cov") {
        scenario = scenario_two_covariates();
    } else {
        throw std::invalid_argument("unknown scenario: " + args.scenario);
    }
    scenario.n = args.n;
    scenario.tau = args.tau;
    scenario.seed = args.seed;

    StudyMethod method;
    if (args.method == "close") {
        method = StudyMethod::Close;
    } else if (args.method == "sql") {
        method = StudyMethod::Sql;
    } else if (args.method == "both") {
        method = StudyMethod::Both;
    } else {
        throw std::invalid_argument("unknown method: " + args.method);
    }

    StudyConfig config;
    config.K = args.K;
    config.p = args.p;
    config.q = args.q;
    config.lambda = args.lambda;
    config.gamma = args.gamma;
    config.tune = args.tune;

    const RunManifest manifest = make_manifest("simulate", args.to_json(), args.seed, {});
    const MetricReport report = run_study(scenario, method, args.replicates, config);

    CsvTable table;
    table.header = {"scenario", "n", "tau", "replicates", "tdr", "fdr"};
    for (int l = 0; l < scenario.m(); ++l) {
        table.header.push_back("l2_sql_" + std::to_string(l + 1));
        table.header.push_back("l2_close_" + std::to_string(l + 1));
        table.header.push_back("imse_close_" + std::to_string(l + 1));
    }
    for (std::size_t s = 1; s < scenario.alpha_true.size(); ++s) {
        table.header.push_back("bias_alpha" + std::to_string(s));
        table.header.push_back("se_alpha" + std::to_string(s));
    }
    std::vector<std::string> row{args.scenario, std::to_string(args.n), format_double(args.tau),
                                 std::to_string(args.replicates)};
    row.push_back(report.mean_tdr ? format_double(*report.mean_tdr) : "NA");
    row.push_back(report.mean_fdr ? format_double(*report.mean_fdr) : "NA");
    for (int l = 0; l < scenario.m(); ++l) {
        row.push_back(report.mean_l2_sql.empty() ? "NA" : format_double(report.mean_l2_sql[l]));
        row.push_back(report.mean_l2_close.empty() ? "NA"
                                                   : format_double(report.mean_l2_close[l]));
        row.push_back(report.imse_close.empty() ? "NA" : format_double(report.imse_close[l]));
    }
    for (std::size_t s = 1; s < scenario.alpha_true.size(); ++s) {
        row.push_back(format_double(report.alpha_bias[s]));
        row.push_back(format_double(report.alpha_se[s]));
    }
    table.rows.push_back(std::move(row));
    write_csv(out_path(out_dir, "metrics.csv"), table, manifest.compact());

    // full per-replicate dump, one JSON object per line
    std::string lines;
    for (const auto& rec : report.records) {
        json j;
        j["seed"] = rec.seed;
        if (rec.tdr) j["tdr"] = *rec.tdr;
        if (rec.fdr) j["fdr"] = *rec.fdr;
        j["l2_close"] = rec.l2_close;
        j["l2_sql"] = rec.l2_sql;
        j["alpha"] = rec.alpha_close;
        j["lambda"] = rec.lambda_used;
        j["gamma"] = rec.gamma_used;
        j["converged"] = rec.converged;
        lines += j.dump() + "\n";
    }
    write_text_file(out_path(out_dir, "replicates.jsonl"), lines);
    write_json_artifact(out_path(out_dir, "simulate.json"),
                        {{"rows", table.rows.size()}}, manifest);
    return kExitOk;
}

int dispatch_manifest(const RunManifest& manifest, const std::string& out_dir);

int run_replay(const std::string& manifest_path, const std::string& out_dir) {
    const json j = json::parse(read_text_file(manifest_path));
    const RunManifest manifest =
        RunManifest::from_json(j.contains("manifest") ? j["manifest"] : j);
    // verify the recorded inputs are unchanged
    for (const auto& [path, hash] : manifest.input_hashes.items()) {
        const std::string current = fnv1a_hex(read_text_file(path));
        if (current != hash.get<std::string>()) {
            throw std::invalid_argument("replay: input file changed since the original run: " +
                                        path);
        }
    }
    return dispatch_manifest(manifest, out_dir);
}

int dispatch_manifest(const RunManifest& manifest, const std::string& out_dir) {
    if (manifest.command == "fit") return run_fit(FitArgs::from_json(manifest.config), out_dir);
    if (manifest.command == "tune") {
        return run_tune(TuneArgs::from_json(manifest.config), out_dir);
    }
    if (manifest.command == "bootstrap") {
        return run_bootstrap(BootstrapArgs::from_json(manifest.config), out_dir);
    }
    if (manifest.command == "simulate") {
        return run_simulate(SimulateArgs::from_json(manifest.config), out_dir);
    }
    throw std::invalid_argument("replay: unknown command in manifest: " + manifest.command);
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"semi-parametric functional quantile regression with local sparsity"};
    app.require_subcommand(1);

    FitArgs fit_args;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model");
    add_fit_options(fit_cmd, fit_args);

    TuneArgs tune_args;
    CLI::App* tune_cmd = app.add_subcommand("tune", "BIC grid search over (lambda, gamma)");
    add_fit_options(tune_cmd, tune_args.fit);
    tune_cmd->add_option("--lambda-grid", tune_args.lambda_grid, "lambda candidates");
    tune_cmd->add_option("--gamma-grid", tune_args.gamma_grid, "gamma candidates");
    tune_cmd->add_flag("--auto-grid", tune_args.auto_grid, "use the default grid");

    BootstrapArgs boot_args;
    CLI::App* boot_cmd = app.add_subcommand("bootstrap", "split wild bootstrap inference");
    add_fit_options(boot_cmd, boot_args.fit);
    boot_cmd->add_option("--B", boot_args.replicates, "bootstrap replicates per half");
    boot_cmd->add_option("--level", boot_args.level, "band level a (default 0.05)");
    boot_cmd->add_option("--seed", boot_args.seed, "bootstrap seed");

    SimulateArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo study");
    sim_cmd->add_option("--scenario", sim_args.scenario, "normal | cauchy | two-cov");
    sim_cmd->add_option("--n", sim_args.n, "sample size");
    sim_cmd->add_option("--tau", sim_args.tau, "quantile level");
    sim_cmd->add_option("--replicates", sim_args.replicates, "Monte Carlo replicates");
    sim_cmd->add_option("--method", sim_args.method, "close | sql | both");
    sim_cmd->add_option("--seed", sim_args.seed, "base seed");
    sim_cmd->add_option("--K", sim_args.K, "spline subintervals");
    sim_cmd->add_option("--p", sim_args.p, "spline degree");
    sim_cmd->add_option("--q", sim_args.q, "roughness order");
    sim_cmd->add_option("--lambda", sim_args.lambda, "fixed fSCAD strength");
    sim_cmd->add_option("--gamma", sim_args.gamma, "fixed roughness strength");
    sim_cmd->add_flag("--tune", sim_args.tune, "tune (lambda, gamma) per replicate by BIC");
    std::string sim_out = ".";
    sim_cmd->add_option("--out", sim_out, "output directory");

    std::string replay_manifest, replay_out = ".";
    CLI::App* replay_cmd = app.add_subcommand("replay", "re-run a recorded manifest");
    replay_cmd->add_option("--manifest", replay_manifest, "run manifest JSON")->required();
    replay_cmd->add_option("--out", replay_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(fit_args, fit_args.out);
        if (tune_cmd->parsed()) return run_tune(tune_args, tune_args.fit.out);
        if (boot_cmd->parsed()) return run_bootstrap(boot_args, boot_args.fit.out);
        if (sim_cmd->parsed()) return run_simulate(sim_args, sim_out);
        if (replay_cmd->parsed()) return run_replay(replay_manifest, replay_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "fqr: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "fqr: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace fqr
