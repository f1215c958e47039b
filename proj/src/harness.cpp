#include "penex/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

#include "penex/cones.hpp"
#include "penex/diagnostics.hpp"
#include "penex/penalty.hpp"
#include "penex/rng.hpp"

namespace penex {

using json = nlohmann::ordered_json;

std::string to_string(ExperimentKind kind)
{
    switch (kind) {
    case ExperimentKind::rates: return "rates";
    case ExperimentKind::risk_identity: return "risk_identity";
    case ExperimentKind::coverage: return "coverage";
    case ExperimentKind::cone_check: return "cone_check";
    case ExperimentKind::sparsity_check: return "sparsity_check";
    case ExperimentKind::fit: return "fit";
    }
    return "unknown";
}

std::string to_string(PenaltyKind kind)
{
    switch (kind) {
    case PenaltyKind::l1_penalized: return "l1_penalized";
    case PenaltyKind::l1_constrained: return "l1_constrained";
    case PenaltyKind::group_lasso: return "group_lasso";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::rates, ExperimentKind::risk_identity, ExperimentKind::coverage,
                   ExperimentKind::cone_check, ExperimentKind::sparsity_check, ExperimentKind::fit})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

PenaltyKind parse_penalty_kind(const std::string& s)
{
    for (auto k : {PenaltyKind::l1_penalized, PenaltyKind::l1_constrained, PenaltyKind::group_lasso})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown penalty '" + s + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value)
{
    try {
        std::size_t used = 0;
        T out{};
        if constexpr (std::is_same_v<T, double>) out = std::stod(value, &used);
        else if constexpr (std::is_same_v<T, std::uint64_t>) out = std::stoull(value, &used);
        else out = static_cast<T>(std::stoll(value, &used));
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("invalid value for '" + key + "': '" + value + "'");
    }
}

std::vector<GridPoint> parse_grid(const std::string& value)
{
    std::vector<GridPoint> grid;
    for (const auto& entry : split(value, ';')) {
        if (entry.empty()) continue;
        const auto fields = split(entry, ',');
        if (fields.size() != 3 && fields.size() != 5)
            throw ConfigError("grid entry '" + entry + "' must be n,p,s or n,p,s,M,d");
        GridPoint g;
        g.n = parse_number<Index>("grid", fields[0]);
        g.p = parse_number<Index>("grid", fields[1]);
        g.s = parse_number<Index>("grid", fields[2]);
        if (fields.size() == 5) {
            g.m = parse_number<Index>("grid", fields[3]);
            g.d = parse_number<Index>("grid", fields[4]);
        }
        grid.push_back(g);
    }
    return grid;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text)
{
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "experiment") cfg.kind = parse_experiment_kind(value);
            else if (key == "grid") cfg.grid = parse_grid(value);
            else if (key == "loss") cfg.loss = parse_loss_kind(value);
            else if (key == "penalty") cfg.penalty = parse_penalty_kind(value);
            else if (key == "design") cfg.design = parse_design_kind(value);
            else if (key == "covariance") cfg.covariance = value;
            else if (key == "xi") cfg.xi = parse_number<double>(key, value);
            else if (key == "replications") cfg.replications = parse_number<int>(key, value);
            else if (key == "master_seed") cfg.master_seed = parse_number<std::uint64_t>(key, value);
            else if (key == "output_dir") cfg.output_dir = value;
            else if (key == "mc_inner") cfg.mc_inner = parse_number<Index>(key, value);
            else if (key == "noise_sd") cfg.noise_sd = parse_number<double>(key, value);
            else if (key == "beta_scale") cfg.beta_scale = parse_number<double>(key, value);
            else if (key == "t") cfg.t = parse_number<double>(key, value);
            else if (key == "threads") cfg.threads = parse_number<int>(key, value);
            else if (key == "tol") cfg.solver.kkt_tol = parse_number<double>(key, value);
            else if (key == "max_iters") cfg.solver.max_iters = parse_number<int>(key, value);
            else if (key == "max_failure_fraction") cfg.max_failure_fraction = parse_number<double>(key, value);
            else throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

void ExperimentConfig::validate() const
{
    if (grid.empty()) throw ConfigError("grid is empty");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!(xi > 0.0)) throw ConfigError("xi must be > 0");
    if (!(noise_sd >= 0.0) || !(beta_scale > 0.0)) throw ConfigError("noise_sd must be >= 0 and beta_scale > 0");
    if (threads < 0) throw ConfigError("threads must be >= 0");
    if (mc_inner < 2) throw ConfigError("mc_inner must be >= 2");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
        throw ConfigError("max_failure_fraction must lie in [0, 1]");
    try {
        solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const bool groups = penalty == PenaltyKind::group_lasso;
    for (const auto& g : grid) {
        if (g.n < 1 || g.p < 1 || g.s < 1) throw ConfigError("grid: n, p, s must be >= 1");
        if (g.s >= g.p) throw ConfigError("grid: need s < p");
        if (groups) {
            if (g.m < 1 || g.d < 1) throw ConfigError("grid: group_lasso needs n,p,s,M,d entries");
            if (g.m * g.d != g.p) throw ConfigError("grid: need p = M d");
            if (g.s >= g.m) throw ConfigError("grid: need s < M");
        } else if (g.m != 0 || g.d != 0) {
            throw ConfigError("grid: M and d are only meaningful for group_lasso");
        }
    }
    if (kind == ExperimentKind::risk_identity &&
        (loss != LossKind::squared || design != DesignKind::gaussian || covariance != "identity"))
        throw ConfigError("risk_identity needs squared loss, Gaussian design and identity covariance");
    if (kind == ExperimentKind::coverage && (loss != LossKind::squared || penalty == PenaltyKind::group_lasso))
        throw ConfigError("coverage needs squared loss with an l1 penalty");
    if (loss == LossKind::logistic && design != DesignKind::gaussian)
        throw ConfigError("logistic experiments need a Gaussian design for the exact curvature matrix");
    for (const auto& g : grid) {
        try {
            (void)CovarianceModel::parse(covariance, std::min<Index>(g.p, 2));
        } catch (const std::exception& e) {
            throw ConfigError(std::string("covariance: ") + e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// Replications

namespace {

// Everything that depends on the grid point but not on the replication.
struct PointContext {
    GridPoint grid;
    CovarianceModel cov;
    GroundTruth truth;
    std::optional<GroupStructure> groups;
    CurvatureMatrix k;
    ConeSpec cone;
    double r_n = 0.0;
    double sparsity_constant = 0.0;
    Index coverage_index = 0;
};

PointContext make_context(const ExperimentConfig& cfg, Index point)
{
    const GridPoint g = cfg.grid.at(static_cast<std::size_t>(point));
    CovarianceModel cov = CovarianceModel::parse(cfg.covariance, g.p);
    std::optional<GroupStructure> groups;
    GroundTruth truth;
    if (cfg.penalty == PenaltyKind::group_lasso) {
        groups = GroupStructure::contiguous(g.p, g.d);
        truth = group_sparse_ground_truth(*groups, g.s, cfg.beta_scale);
    } else {
        truth = sparse_ground_truth(g.p, g.s, cfg.beta_scale);
    }
    CurvatureMatrix k = curvature_matrix(cfg.loss, cov, truth.beta_star, cfg.design);

    ConeSpec cone = LassoCone{};
    switch (cfg.penalty) {
    case PenaltyKind::l1_penalized: cone = lasso_error_cone(g.s, cfg.xi); break;
    case PenaltyKind::l1_constrained: cone = make_support_cone(truth.support); break;
    case PenaltyKind::group_lasso: cone = group_error_cone(g.s, cfg.xi, *groups); break;
    }
    const double r_n = groups ? rate_group(g.n, g.d, g.m, g.s) : rate_lasso(g.n, g.p, g.s);
    const double c_tilde = sparsity_constant(k.k.lambda_max(), cfg.xi, b3_constant(cov, k), phi_lower_bound(cone, cov));
    const Index coverage_index = truth.support.empty() ? 0 : truth.support.front();
    return {g, std::move(cov), std::move(truth), std::move(groups), std::move(k), std::move(cone), r_n, c_tilde,
            coverage_index};
}

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

ReplicationRecord run_with_context(const ExperimentConfig& cfg, const PointContext& ctx, Index point, Index rep)
{
    const auto t0 = std::chrono::steady_clock::now();
    const GridPoint& g = ctx.grid;
    ReplicationRecord rec;
    rec.point = point;
    rec.rep = rep;
    rec.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(point), static_cast<std::uint64_t>(rep));
    rec.grid = g;
    rec.r_n = ctx.r_n;

    const VectorXd& beta_star = ctx.truth.beta_star;
    const MatrixXd x = generate_design(ctx.cov, g.n, cfg.design, rec.seed);
    Dataset data = cfg.loss == LossKind::logistic ? generate_logistic(x, beta_star, rec.seed)
                                                  : generate_linear(x, beta_star, cfg.noise_sd, rec.seed);
    data.covariance = ctx.cov.describe();

    const double lsub = subgaussian_parameter(cfg.design);
    const double sstar = cfg.loss == LossKind::logistic ? 0.5 : sigma_star(data);
    PenaltySpec penalty = make_l1_constrained(1.0);
    switch (cfg.penalty) {
    case PenaltyKind::l1_penalized:
        rec.lambda = lambda_lasso(cfg.loss, lsub, sstar, cfg.xi, g.p, g.s, g.n);
        penalty = make_l1_penalized(rec.lambda);
        break;
    case PenaltyKind::l1_constrained:
        rec.lambda = beta_star.lpNorm<1>();
        penalty = make_l1_constrained(rec.lambda);
        break;
    case PenaltyKind::group_lasso:
        rec.lambda = lambda_group(lsub, sstar, cfg.xi, g.d, g.m, g.s, g.n);
        penalty = make_group_lasso(rec.lambda, *ctx.groups);
        break;
    }

    SolverResult beta_hat, eta;
    try {
        beta_hat = fit_beta_hat(data, cfg.loss, penalty, cfg.solver);
        eta = fit_eta(data, cfg.loss, ctx.k, beta_star, penalty, cfg.solver);
    } catch (const std::runtime_error&) {
        rec.converged = false;
        rec.wall_total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }
    rec.converged = beta_hat.converged && eta.converged;
    rec.iters_beta = beta_hat.iterations;
    rec.iters_eta = eta.iterations;
    rec.kkt_beta = beta_hat.kkt_residual;
    rec.kkt_eta = eta.kkt_residual;
    rec.wall_beta = beta_hat.wall_time;
    rec.wall_eta = eta.wall_time;

    const VectorXd e_beta = beta_hat.solution - beta_star;
    const VectorXd e_eta = eta.solution - beta_star;
    rec.err_beta_k = ctx.k.norm(e_beta);
    rec.err_eta_k = ctx.k.norm(e_eta);
    rec.diff_k = ctx.k.norm(eta.solution - beta_hat.solution);
    const double denom = rec.err_beta_k + rec.err_eta_k;
    rec.ratio = denom > 0.0 ? rec.diff_k / denom : nan();
    rec.cone_beta = cone_member(ctx.cone, e_beta);
    rec.cone_eta = cone_member(ctx.cone, e_eta);

    const GroupStructure* groups = ctx.groups ? &*ctx.groups : nullptr;
    const SparsityCount sb = sparsity_count(beta_hat.solution, groups);
    const SparsityCount se = sparsity_count(eta.solution, groups);
    rec.nnz_beta = sb.coords;
    rec.nnz_eta = se.coords;
    rec.groups_beta = sb.groups_nonzero;
    rec.groups_eta = se.groups_nonzero;

    const ProcessEvaluator process(data, cfg.loss, ctx.k, beta_star);
    const bool beta_moved = e_beta.norm() > 0.0;
    rec.q1_beta = beta_moved ? process.q1(e_beta) : nan();
    rec.z_beta = beta_moved ? process.z(e_beta) : nan();
    rec.q2_pair = beta_moved && e_eta.norm() > 0.0 ? process.q2(e_beta, e_eta) : nan();

    if (cfg.kind == ExperimentKind::sparsity_check)
        rec.sparsity_bound = ctx.sparsity_constant * static_cast<double>(g.s);

    if (cfg.kind == ExperimentKind::risk_identity) {
        const RiskIdentityReport r = risk_identity_check(data, ctx.cov, beta_hat.solution, eta.solution, penalty,
                                                         cfg.mc_inner, derive_seed(rec.seed, 0x5249u), cfg.t);
        rec.risk = ReplicationRecord::Risk{r.lhs, r.rhs, r.mc_se, r.ratio, r.bound_holds};
    }
    if (cfg.kind == ExperimentKind::coverage) {
        VectorXd a = VectorXd::Zero(g.p);
        a(ctx.coverage_index) = 1.0;
        const InferenceReport r = debiased_estimate(data, beta_hat.solution, ctx.cov, a);
        rec.coverage = ReplicationRecord::Coverage{r.theta_hat, r.target, r.t_stat, r.covered};
    }
    rec.wall_total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& config, Index point, Index rep)
{
    config.validate();
    return run_with_context(config, make_context(config, point), point, rep);
}

// ---------------------------------------------------------------------------
// Output

const std::vector<std::string>& record_columns()
{
    static const std::vector<std::string> cols = {
        "point",     "rep",        "seed",      "n",          "p",          "s",        "M",
        "d",         "lambda",     "converged", "iters_beta", "iters_eta",  "kkt_beta", "kkt_eta",
        "err_beta_K", "err_eta_K", "diff_K",    "ratio",      "r_n",        "cone_beta", "cone_eta",
        "nnz_beta",  "nnz_eta",    "groups_beta", "groups_eta", "sparsity_bound", "q1_beta", "q2_pair",
        "z_beta",    "risk_lhs",   "risk_rhs",  "risk_mc_se", "risk_ratio", "risk_bound_holds", "theta_hat",
        "target",    "covered",    "t_stat"};
    return cols;
}

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

template <class T>
std::string opt(const std::optional<T>& o, double (*get)(const T&))
{
    return o ? num(get(*o)) : std::string();
}

void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string format_records_csv(const std::vector<ReplicationRecord>& records)
{
    std::string out;
    const auto& cols = record_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\r\n";
    for (const auto& r : records) {
        std::vector<std::string> f;
        f.reserve(cols.size());
        f.push_back(std::to_string(r.point));
        f.push_back(std::to_string(r.rep));
        f.push_back(std::to_string(r.seed));
        f.push_back(std::to_string(r.grid.n));
        f.push_back(std::to_string(r.grid.p));
        f.push_back(std::to_string(r.grid.s));
        f.push_back(std::to_string(r.grid.m));
        f.push_back(std::to_string(r.grid.d));
        f.push_back(num(r.lambda));
        f.push_back(r.converged ? "1" : "0");
        f.push_back(std::to_string(r.iters_beta));
        f.push_back(std::to_string(r.iters_eta));
        f.push_back(num(r.kkt_beta));
        f.push_back(num(r.kkt_eta));
        f.push_back(num(r.err_beta_k));
        f.push_back(num(r.err_eta_k));
        f.push_back(num(r.diff_k));
        f.push_back(num(r.ratio));
        f.push_back(num(r.r_n));
        f.push_back(r.cone_beta ? "1" : "0");
        f.push_back(r.cone_eta ? "1" : "0");
        f.push_back(std::to_string(r.nnz_beta));
        f.push_back(std::to_string(r.nnz_eta));
        f.push_back(std::to_string(r.groups_beta));
        f.push_back(std::to_string(r.groups_eta));
        f.push_back(r.sparsity_bound ? num(*r.sparsity_bound) : "");
        f.push_back(num(r.q1_beta));
        f.push_back(num(r.q2_pair));
        f.push_back(num(r.z_beta));
        using Risk = ReplicationRecord::Risk;
        f.push_back(opt<Risk>(r.risk, [](const Risk& x) { return x.lhs; }));
        f.push_back(opt<Risk>(r.risk, [](const Risk& x) { return x.rhs; }));
        f.push_back(opt<Risk>(r.risk, [](const Risk& x) { return x.mc_se; }));
        f.push_back(opt<Risk>(r.risk, [](const Risk& x) { return x.ratio; }));
        f.push_back(r.risk ? (r.risk->bound_holds ? "1" : "0") : "");
        using Cov = ReplicationRecord::Coverage;
        f.push_back(opt<Cov>(r.coverage, [](const Cov& x) { return x.theta_hat; }));
        f.push_back(opt<Cov>(r.coverage, [](const Cov& x) { return x.target; }));
        f.push_back(r.coverage ? (r.coverage->covered ? "1" : "0") : "");
        f.push_back(opt<Cov>(r.coverage, [](const Cov& x) { return x.t_stat; }));
        for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
        out += "\r\n";
    }
    return out;
}

double quantile(std::vector<double> values, double q)
{
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
                 values.end());
    if (values.empty()) return nan();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RateFit rate_fit(const std::vector<double>& rate, const std::vector<double>& metric)
{
    if (rate.size() != metric.size()) throw std::invalid_argument("rate_fit: length mismatch");
    if (rate.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 grid points");
    const auto m = static_cast<double>(rate.size());
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < rate.size(); ++i) {
        if (!(rate[i] > 0.0) || !(metric[i] > 0.0)) throw std::invalid_argument("rate_fit: values must be > 0");
        lx.push_back(std::log(rate[i]));
        ly.push_back(std::log(metric[i]));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("rate_fit: rates are all equal");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - fit.intercept - fit.slope * lx[i];
        sse += r * r;
    }
    fit.stderr_slope = std::sqrt(sse / (m - 2.0) / sxx);
    fit.points = static_cast<Index>(rate.size());
    return fit;
}

namespace {

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && in.peek() == '\n') in.get();
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

struct PointSeries {
    std::vector<double> r_n;
    std::vector<double> median;
};

}  // namespace

RateFit rate_fit_csv(const std::filesystem::path& records_csv, const std::string& metric)
{
    const auto rows = read_csv(records_csv);
    if (rows.empty()) throw std::invalid_argument("rate_fit: empty records file");
    const auto& header = rows.front();
    auto column = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument("rate_fit: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_point = column("point"), c_rate = column("r_n"), c_metric = column(metric),
                      c_conv = column("converged");
    std::map<long long, std::pair<double, std::vector<double>>> by_point;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != header.size()) throw std::invalid_argument(fmt::format("rate_fit: row {} is ragged", i));
        if (r[c_conv] != "1") continue;
        auto& slot = by_point[std::stoll(r[c_point])];
        slot.first = std::stod(r[c_rate]);
        slot.second.push_back(std::stod(r[c_metric]));
    }
    std::vector<double> rate, med;
    for (auto& [point, data] : by_point) {
        rate.push_back(data.first);
        med.push_back(quantile(data.second, 0.5));
    }
    return rate_fit(rate, med);
}

// ---------------------------------------------------------------------------
// Driver

namespace {

json metric_summary(const std::vector<double>& v)
{
    double mean = 0.0;
    Index count = 0;
    for (double x : v)
        if (!std::isnan(x)) mean += x, ++count;
    return json{{"median", quantile(v, 0.5)}, {"q10", quantile(v, 0.1)},   {"q25", quantile(v, 0.25)},
                {"q75", quantile(v, 0.75)},   {"q90", quantile(v, 0.9)},    {"mean", count ? mean / count : nan()},
                {"count", count}};
}

json frequency(Index hits, Index total)
{
    const double f = total ? static_cast<double>(hits) / static_cast<double>(total) : nan();
    const double se = total ? std::sqrt(f * (1.0 - f) / static_cast<double>(total)) : nan();
    return json{{"count", hits}, {"total", total}, {"frequency", f}, {"binomial_se", se}};
}

// NaN is not valid JSON; emit null instead.
json sanitize(const json& j)
{
    if (j.is_number_float() && !std::isfinite(j.get<double>())) return nullptr;
    if (j.is_object()) {
        json out = json::object();
        for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = sanitize(it.value());
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const auto& v : j) out.push_back(sanitize(v));
        return out;
    }
    return j;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentOutcome& outcome)
{
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir / "plots");
    write_file(cfg.output_dir / "records.csv", format_records_csv(outcome.records));

    std::string timings = "point,rep,wall_beta,wall_eta,wall_total\r\n";
    for (const auto& r : outcome.records)
        timings += fmt::format("{},{},{:.6f},{:.6f},{:.6f}\r\n", r.point, r.rep, r.wall_beta, r.wall_eta, r.wall_total);
    write_file(cfg.output_dir / "timings.csv", timings);

    json points = json::array();
    std::vector<double> rates, med_diff, med_err;
    std::string plot_diff = "r_n,q10,q25,q50,q75,q90\r\n";
    std::string plot_ratio = "n,q10,q25,q50,q75,q90\r\n";
    for (Index pi = 0; pi < static_cast<Index>(cfg.grid.size()); ++pi) {
        const GridPoint& g = cfg.grid[static_cast<std::size_t>(pi)];
        std::vector<const ReplicationRecord*> ok;
        Index total = 0;
        for (const auto& r : outcome.records) {
            if (r.point != pi) continue;
            ++total;
            if (r.converged) ok.push_back(&r);
        }
        auto collect = [&](auto getter) {
            std::vector<double> v;
            for (const auto* r : ok) v.push_back(getter(*r));
            return v;
        };
        auto count = [&](auto pred) {
            Index c = 0;
            for (const auto* r : ok) c += pred(*r) ? 1 : 0;
            return c;
        };
        const auto n_ok = static_cast<Index>(ok.size());
        const double r_n = g.m ? rate_group(g.n, g.d, g.m, g.s) : rate_lasso(g.n, g.p, g.s);
        const auto diff = collect([](const ReplicationRecord& r) { return r.diff_k; });
        const auto err = collect([](const ReplicationRecord& r) { return r.err_beta_k; });
        const auto ratio = collect([](const ReplicationRecord& r) { return r.ratio; });

        json entry{{"point", pi},       {"n", g.n},      {"p", g.p},         {"s", g.s},
                   {"M", g.m},          {"d", g.d},      {"r_n", r_n},       {"replications", total},
                   {"converged", n_ok}, {"excluded", total - n_ok}};
        entry["metrics"] = json{
            {"err_beta_K", metric_summary(err)},
            {"err_eta_K", metric_summary(collect([](const ReplicationRecord& r) { return r.err_eta_k; }))},
            {"diff_K", metric_summary(diff)},
            {"ratio", metric_summary(ratio)},
            {"lambda", metric_summary(collect([](const ReplicationRecord& r) { return r.lambda; }))},
            {"groups_eta", metric_summary(collect([](const ReplicationRecord& r) {
                 return static_cast<double>(r.groups_eta);
             }))},
        };
        json cones{{"beta", frequency(count([](const ReplicationRecord& r) { return r.cone_beta; }), n_ok)},
                   {"eta", frequency(count([](const ReplicationRecord& r) { return r.cone_eta; }), n_ok)},
                   {"joint",
                    frequency(count([](const ReplicationRecord& r) { return r.cone_beta && r.cone_eta; }), n_ok)}};
        if (cfg.penalty == PenaltyKind::l1_penalized) {
            const double ps = static_cast<double>(g.p) / static_cast<double>(g.s);
            cones["probability_floor"] = 1.0 - 2.0 / (cfg.xi * cfg.xi * std::log(ps) * std::pow(ps, cfg.xi));
        } else if (cfg.penalty == PenaltyKind::group_lasso) {
            const double ms = static_cast<double>(g.m) / static_cast<double>(g.s);
            cones["probability_floor"] = 1.0 - 2.0 / (2.0 * cfg.xi * cfg.xi * std::log(ms) * std::pow(ms, cfg.xi));
        }
        entry["cone_membership"] = cones;

        if (cfg.kind == ExperimentKind::risk_identity) {
            entry["risk_identity"] = json{
                {"ratio", metric_summary(collect([](const ReplicationRecord& r) { return r.risk->ratio; }))},
                {"ratio_within_0.15",
                 frequency(count([](const ReplicationRecord& r) { return std::abs(r.risk->ratio - 1.0) <= 0.15; }),
                           n_ok)},
                {"bound_holds", frequency(count([](const ReplicationRecord& r) { return r.risk->bound_holds; }), n_ok)},
                {"bound_probability_floor", 1.0 - 2.0 * std::exp(-0.5 * cfg.t * cfg.t)}};
        }
        if (cfg.kind == ExperimentKind::coverage) {
            json cov = frequency(count([](const ReplicationRecord& r) { return r.coverage->covered; }), n_ok);
            cov["coverage"] = cov["frequency"];
            cov["t_stat"] = metric_summary(collect([](const ReplicationRecord& r) { return r.coverage->t_stat; }));
            entry["coverage"] = cov;
        }
        if (cfg.kind == ExperimentKind::sparsity_check && !ok.empty()) {
            const bool grouped = cfg.penalty == PenaltyKind::group_lasso;
            entry["sparsity"] = json{
                {"bound", *ok.front()->sparsity_bound},
                {"counted", grouped ? "groups" : "coordinates"},
                {"within_bound", frequency(count([grouped](const ReplicationRecord& r) {
                                               const auto c = grouped ? r.groups_eta : r.nnz_eta;
                                               return static_cast<double>(c) <= *r.sparsity_bound;
                                           }),
                                           n_ok)}};
        }
        points.push_back(entry);

        rates.push_back(r_n);
        med_diff.push_back(quantile(diff, 0.5));
        med_err.push_back(quantile(err, 0.5));
        plot_diff += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\r\n", r_n, quantile(diff, 0.1),
                                 quantile(diff, 0.25), quantile(diff, 0.5), quantile(diff, 0.75), quantile(diff, 0.9));
        plot_ratio += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\r\n", g.n, quantile(ratio, 0.1),
                                  quantile(ratio, 0.25), quantile(ratio, 0.5), quantile(ratio, 0.75),
                                  quantile(ratio, 0.9));
    }
    write_file(cfg.output_dir / "plots" / "diff_vs_rate.csv", plot_diff);
    write_file(cfg.output_dir / "plots" / "ratio_vs_n.csv", plot_ratio);

    std::string rates_csv = "metric,slope,intercept,stderr,points\r\n";
    json fits = json::object();
    auto add_fit = [&](const std::string& name, const std::vector<double>& med) {
        try {
            const RateFit f = rate_fit(rates, med);
            rates_csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{}\r\n", name, f.slope, f.intercept, f.stderr_slope,
                                     f.points);
            fits[name] = json{{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_slope}};
        } catch (const std::invalid_argument&) {
            // fewer than three usable grid points
        }
    };
    add_fit("diff_K", med_diff);
    add_fit("err_beta_K", med_err);
    write_file(cfg.output_dir / "rates.csv", rates_csv);

    json summary{{"experiment", to_string(cfg.kind)},
                 {"loss", to_string(cfg.loss)},
                 {"penalty", to_string(cfg.penalty)},
                 {"design", to_string(cfg.design)},
                 {"covariance", cfg.covariance},
                 {"xi", cfg.xi},
                 {"replications", cfg.replications},
                 {"master_seed", cfg.master_seed},
                 {"failures", outcome.failures},
                 {"failure_threshold_exceeded", outcome.failure_threshold_exceeded},
                 {"points", points},
                 {"rate_fits", fits}};
    write_file(cfg.output_dir / "summary.json", sanitize(summary).dump(2) + "\n");
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config)
{
    config.validate();
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<unsigned>(config.threads > 0 ? config.threads : static_cast<int>(hw));

    ExperimentOutcome outcome;
    const auto reps = static_cast<std::size_t>(config.replications);
    outcome.records.resize(config.grid.size() * reps);

    // Points run one after another so only one curvature matrix is alive at a time.
    for (std::size_t pi = 0; pi < config.grid.size(); ++pi) {
        const PointContext ctx = make_context(config, static_cast<Index>(pi));
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto work = [&] {
            while (true) {
                const std::size_t rep = next.fetch_add(1);
                if (rep >= reps) return;
                try {
                    outcome.records[pi * reps + rep] =
                        run_with_context(config, ctx, static_cast<Index>(pi), static_cast<Index>(rep));
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(reps);
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned w = 1; w < std::min<std::size_t>(workers, reps); ++w) pool.emplace_back(work);
        work();
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    for (const auto& r : outcome.records) outcome.failures += r.converged ? 0 : 1;
    outcome.failure_threshold_exceeded = static_cast<double>(outcome.failures) >
                                         config.max_failure_fraction * static_cast<double>(outcome.records.size());
    write_outputs(config, outcome);
    return outcome;
}

}  // namespace penex
