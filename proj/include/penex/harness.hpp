#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "penex/loss.hpp"
#include "penex/model.hpp"
#include "penex/solver.hpp"

namespace penex {

enum class ExperimentKind { rates, risk_identity, coverage, cone_check, sparsity_check, fit };
enum class PenaltyKind { l1_penalized, l1_constrained, group_lasso };

std::string to_string(ExperimentKind kind);
std::string to_string(PenaltyKind kind);
ExperimentKind parse_experiment_kind(const std::string& s);
PenaltyKind parse_penalty_kind(const std::string& s);

/// Raised for malformed or inconsistent experiment configurations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GridPoint {
    Index n = 0;
    Index p = 0;
    Index s = 0;
    Index m = 0;  // number of groups, 0 without groups
    Index d = 0;  // group size, 0 without groups
};

/**
 * Experiment description. Text form is one `key = value` per line with `#`
 * comments; `grid` is a `;`-separated list of `n,p,s` or `n,p,s,M,d` tuples.
 */
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::fit;
    std::vector<GridPoint> grid;
    LossKind loss = LossKind::squared;
    PenaltyKind penalty = PenaltyKind::l1_penalized;
    DesignKind design = DesignKind::gaussian;
    std::string covariance = "identity";
    double xi = 0.5;
    int replications = 1;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "out";
    Index mc_inner = 2000;
    double noise_sd = 1.0;
    double beta_scale = 1.0;
    double t = 2.0;
    int threads = 0;  // 0 means hardware concurrency
    SolverConfig solver;
    double max_failure_fraction = 0.05;

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);
    /// Throws ConfigError.
    void validate() const;
};

struct ReplicationRecord {
    Index point = 0;
    Index rep = 0;
    std::uint64_t seed = 0;
    GridPoint grid;
    double lambda = 0.0;  // penalty level, or the radius for the constrained variant
    bool converged = false;
    int iters_beta = 0;
    int iters_eta = 0;
    double kkt_beta = 0.0;
    double kkt_eta = 0.0;
    double err_beta_k = 0.0;
    double err_eta_k = 0.0;
    double diff_k = 0.0;
    double ratio = 0.0;
    double r_n = 0.0;
    bool cone_beta = false;
    bool cone_eta = false;
    Index nnz_beta = 0;
    Index nnz_eta = 0;
    Index groups_beta = 0;
    Index groups_eta = 0;
    double q1_beta = 0.0;
    double q2_pair = 0.0;
    double z_beta = 0.0;

    std::optional<double> sparsity_bound;  // C~ s (groups) or C~ s (coords)

    struct Risk {
        double lhs, rhs, mc_se, ratio;
        bool bound_holds;
    };
    std::optional<Risk> risk;

    struct Coverage {
        double theta_hat, target, t_stat;
        bool covered;
    };
    std::optional<Coverage> coverage;

    double wall_beta = 0.0;
    double wall_eta = 0.0;
    double wall_total = 0.0;
};

/// Runs one (grid point, replication) task; pure given the config.
ReplicationRecord run_replication(const ExperimentConfig& config, Index point, Index rep);

struct ExperimentOutcome {
    std::vector<ReplicationRecord> records;  // sorted by (point, rep)
    Index failures = 0;
    bool failure_threshold_exceeded = false;
};

/// Runs every task on `config.threads` workers and writes records.csv,
/// summary.json, rates.csv, timings.csv and plots/*.csv into output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Fixed records.csv header.
const std::vector<std::string>& record_columns();
std::string format_records_csv(const std::vector<ReplicationRecord>& records);

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_slope = 0.0;
    Index points = 0;
};

/// Least squares of log(metric) on log(rate). Needs at least three points.
RateFit rate_fit(const std::vector<double>& rate, const std::vector<double>& metric);

/// Groups rows by grid point and fits the median of `metric` against r_n.
/// Rows with converged == 0 are skipped.
RateFit rate_fit_csv(const std::filesystem::path& records_csv, const std::string& metric = "diff_K");

/// Linear-interpolated quantile of unsorted data.
double quantile(std::vector<double> values, double q);

}  // namespace penex
