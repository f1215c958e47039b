// penex command-line driver.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "penex/cones.hpp"
#include "penex/diagnostics.hpp"
#include "penex/harness.hpp"
#include "penex/io.hpp"
#include "penex/solver.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace penex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitConvergence = 3;

struct PenaltyArgs {
    std::string kind = "l1_penalized";
    std::optional<double> lambda;
    std::optional<double> radius;
    double xi = 0.5;
    Index s = 5;
    Index group_size = 0;
};

void add_penalty_options(CLI::App* cmd, PenaltyArgs& a)
{
    cmd->add_option("--penalty", a.kind, "l1_penalized, l1_constrained or group_lasso")
        ->check(CLI::IsMember({"l1_penalized", "l1_constrained", "group_lasso"}));
    cmd->add_option("--lambda", a.lambda, "penalty level (default: theoretical choice from --xi and --s)");
    cmd->add_option("--radius", a.radius, "l1 ball radius (default: ||beta*||_1)");
    cmd->add_option("--xi", a.xi, "tuning constant xi");
    cmd->add_option("--s", a.s, "sparsity used by the default penalty level");
    cmd->add_option("--group-size", a.group_size, "group size d (default: from meta.json)");
}

LossKind loss_for(const Dataset& data)
{
    return data.model_kind == ModelKind::logistic ? LossKind::logistic : LossKind::squared;
}

PenaltySpec build_penalty(const PenaltyArgs& a, const Dataset& data, const fs::path& dir)
{
    const LossKind loss = loss_for(data);
    const double sstar = loss == LossKind::logistic ? 0.5 : sigma_star(data);
    const double lsub = subgaussian_parameter(data.design_kind);
    if (a.kind == "l1_constrained") return make_l1_constrained(a.radius.value_or(data.beta_star.lpNorm<1>()));
    if (a.kind == "group_lasso") {
        Index d = a.group_size;
        if (d == 0) d = load_group_size(dir).value_or(0);
        if (d == 0) throw std::invalid_argument("group_lasso needs --group-size or a dataset generated with groups");
        GroupStructure groups = GroupStructure::contiguous(data.p(), d);
        const double lambda =
            a.lambda.value_or(lambda_group(lsub, sstar, a.xi, d, groups.num_groups(), a.s, data.n()));
        return make_group_lasso(lambda, std::move(groups));
    }
    return make_l1_penalized(a.lambda.value_or(lambda_lasso(loss, lsub, sstar, a.xi, data.p(), a.s, data.n())));
}

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json result_json(const SolverResult& r)
{
    return json{{"objective", r.objective},   {"kkt_residual", r.kkt_residual},
                {"iterations", r.iterations}, {"converged", r.converged},
                {"wall_time", r.wall_time},   {"solution", vector_json(r.solution)}};
}

void emit(const json& j, const std::string& out)
{
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << j.dump(2) << "\n";
}

CurvatureMatrix dataset_curvature(const Dataset& data)
{
    const CovarianceModel cov = CovarianceModel::parse(data.covariance, data.p());
    return curvature_matrix(loss_for(data), cov, data.beta_star, data.design_kind);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Penalized M-estimators: fits, first-order expansions and diagnostics"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
    double tol = 1e-8;
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_option("--out", out, "output path (file or directory)");
    app.add_option("--tol", tol, "KKT residual tolerance")->capture_default_str();

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset to disk");
    Index g_n = 200, g_p = 400, g_s = 5, g_d = 0;
    std::string g_model = "linear", g_design = "gaussian", g_cov = "identity";
    double g_noise = 1.0, g_scale = 1.0;
    gen->add_option("--n", g_n)->capture_default_str();
    gen->add_option("--p", g_p)->capture_default_str();
    gen->add_option("--s", g_s, "nonzero coordinates, or nonzero groups with --group-size")->capture_default_str();
    gen->add_option("--group-size", g_d, "group size d; p must be a multiple");
    gen->add_option("--model", g_model)->check(CLI::IsMember({"linear", "logistic"}));
    gen->add_option("--design", g_design)->check(CLI::IsMember({"gaussian", "rademacher"}));
    gen->add_option("--covariance", g_cov, "identity or ar1:<rho>")->capture_default_str();
    gen->add_option("--noise-sd", g_noise)->capture_default_str();
    gen->add_option("--beta-scale", g_scale)->capture_default_str();

    // fit / expand / risk-identity share dataset + penalty options
    std::string data_dir;
    PenaltyArgs pen;
    auto* fit = app.add_subcommand("fit", "solve the penalized empirical problem for beta_hat");
    fit->add_option("data", data_dir, "dataset directory")->required();
    add_penalty_options(fit, pen);

    auto* expand = app.add_subcommand("expand", "solve the quadratic surrogate for eta");
    expand->add_option("data", data_dir, "dataset directory")->required();
    add_penalty_options(expand, pen);

    auto* risk = app.add_subcommand("risk-identity", "compare ||beta_hat - beta*|| with the prox risk");
    Index mc_inner = 2000;
    double t_param = 2.0;
    risk->add_option("data", data_dir, "dataset directory")->required();
    risk->add_option("--mc", mc_inner, "Monte Carlo draws for the prox risk")->capture_default_str();
    risk->add_option("--t", t_param, "deviation parameter t")->capture_default_str();
    add_penalty_options(risk, pen);

    auto* coverage = app.add_subcommand("coverage", "de-biased estimate and interval for a^T beta*");
    Index coord = 0;
    coverage->add_option("data", data_dir, "dataset directory")->required();
    coverage->add_option("--coord", coord, "a = e_coord")->capture_default_str();
    add_penalty_options(coverage, pen);

    auto* experiment = app.add_subcommand("experiment", "run a replicated experiment from a config file");
    std::string config_path;
    experiment->add_option("config", config_path, "key = value config file")->required();

    auto* ratefit = app.add_subcommand("rate-fit", "fit log(median metric) against log(r_n)");
    std::string records_path, metric = "diff_K";
    ratefit->add_option("records", records_path, "records.csv")->required();
    ratefit->add_option("--metric", metric, "column to fit")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    SolverConfig solver;
    solver.kkt_tol = tol;

    try {
        if (*gen) {
            const CovarianceModel cov = CovarianceModel::parse(g_cov, g_p);
            std::optional<GroupStructure> groups;
            GroundTruth truth;
            if (g_d > 0) {
                groups = GroupStructure::contiguous(g_p, g_d);
                truth = group_sparse_ground_truth(*groups, g_s, g_scale);
            } else {
                truth = sparse_ground_truth(g_p, g_s, g_scale);
            }
            const DesignKind design = parse_design_kind(g_design);
            const MatrixXd x = generate_design(cov, g_n, design, seed);
            Dataset data = g_model == "logistic" ? generate_logistic(x, truth.beta_star, seed)
                                                 : generate_linear(x, truth.beta_star, g_noise, seed);
            data.covariance = cov.describe();
            const fs::path dir = out.empty() ? fs::path("dataset") : fs::path(out);
            save_dataset(dir, data, g_d > 0 ? std::optional<Index>(g_d) : std::nullopt);
            std::cout << "wrote " << dir.string() << " (n=" << g_n << ", p=" << g_p << ")\n";
            return kExitOk;
        }

        if (*experiment) {
            ExperimentConfig cfg;
            try {
                cfg = ExperimentConfig::from_file(config_path);
                if (!out.empty()) cfg.output_dir = out;
                if (app.get_option("--threads")->count()) cfg.threads = threads;
                if (app.get_option("--seed")->count()) cfg.master_seed = seed;
                if (app.get_option("--tol")->count()) cfg.solver.kkt_tol = tol;
                cfg.validate();
            } catch (const ConfigError& e) {
                std::cerr << "invalid config: " << e.what() << "\n";
                return kExitConfig;
            }
            const ExperimentOutcome outcome = run_experiment(cfg);
            std::cout << fmt::format("{} records written to {} ({} not converged)\n", outcome.records.size(),
                                     cfg.output_dir.string(), outcome.failures);
            return outcome.failure_threshold_exceeded ? kExitConvergence : kExitOk;
        }

        if (*ratefit) {
            const RateFit f = rate_fit_csv(records_path, metric);
            std::cout << fmt::format("slope={:.6f} intercept={:.6f} stderr={:.6f} points={}\n", f.slope, f.intercept,
                                     f.stderr_slope, f.points);
            return kExitOk;
        }

        const Dataset data = load_dataset(data_dir);
        const LossKind loss = loss_for(data);
        const PenaltySpec penalty = build_penalty(pen, data, data_dir);

        if (*fit) {
            const SolverResult r = fit_beta_hat(data, loss, penalty, solver);
            json j = result_json(r);
            j["penalty"] = penalty_name(penalty);
            emit(j, out);
            return r.converged ? kExitOk : kExitConvergence;
        }
        if (*expand) {
            const CurvatureMatrix k = dataset_curvature(data);
            const SolverResult r = fit_eta(data, loss, k, data.beta_star, penalty, solver);
            json j = result_json(r);
            j["penalty"] = penalty_name(penalty);
            j["curvature"] = to_string(k.provenance);
            emit(j, out);
            return r.converged ? kExitOk : kExitConvergence;
        }
        if (*risk) {
            const CovarianceModel cov = CovarianceModel::parse(data.covariance, data.p());
            const CurvatureMatrix k = dataset_curvature(data);
            const SolverResult b = fit_beta_hat(data, loss, penalty, solver);
            const SolverResult e = fit_eta(data, loss, k, data.beta_star, penalty, solver);
            const RiskIdentityReport rep =
                risk_identity_check(data, cov, b.solution, e.solution, penalty, mc_inner, seed, t_param);
            emit(json{{"lhs", rep.lhs},
                      {"rhs", rep.rhs},
                      {"mc_se", rep.mc_se},
                      {"ratio", std::isnan(rep.ratio) ? json(nullptr) : json(rep.ratio)},
                      {"bound_terms", {rep.noise_term, rep.expansion_term}},
                      {"bound_holds", rep.bound_holds},
                      {"converged", b.converged && e.converged}},
                 out);
            return b.converged && e.converged ? kExitOk : kExitConvergence;
        }
        if (*coverage) {
            if (coord < 0 || coord >= data.p()) throw std::invalid_argument("--coord out of range");
            const CovarianceModel cov = CovarianceModel::parse(data.covariance, data.p());
            const SolverResult b = fit_beta_hat(data, loss, penalty, solver);
            VectorXd a = VectorXd::Zero(data.p());
            a(coord) = 1.0;
            const InferenceReport rep = debiased_estimate(data, b.solution, cov, a);
            emit(json{{"theta_hat", rep.theta_hat},
                      {"target", rep.target},
                      {"ci", {rep.ci_low, rep.ci_high}},
                      {"covered", rep.covered},
                      {"t_stat", rep.t_stat},
                      {"converged", b.converged}},
                 out);
            return b.converged ? kExitOk : kExitConvergence;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitOk;
}
