// Acceptance suite: one check per criterion, one PASS/FAIL line each.
//
//   acceptance            run everything
//   acceptance --only 7   run a single criterion
//
// Exit status is nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "penex/cones.hpp"
#include "penex/diagnostics.hpp"
#include "penex/harness.hpp"
#include "penex/solver.hpp"

namespace fs = std::filesystem;
using namespace penex;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

fs::path g_workdir;
int g_threads = 0;

ExperimentOutcome run(const std::string& name, const std::string& text)
{
    ExperimentConfig c = ExperimentConfig::parse(text);
    c.output_dir = g_workdir / name;
    c.threads = g_threads;
    c.validate();
    return run_experiment(c);
}

std::vector<const ReplicationRecord*> converged_at(const ExperimentOutcome& o, Index point)
{
    std::vector<const ReplicationRecord*> out;
    for (const auto& r : o.records)
        if (r.point == point && r.converged) out.push_back(&r);
    return out;
}

template <class F>
double median_at(const ExperimentOutcome& o, Index point, F f)
{
    std::vector<double> v;
    for (const auto* r : converged_at(o, point)) v.push_back(f(*r));
    return quantile(v, 0.5);
}

template <class F>
double fraction_at(const ExperimentOutcome& o, Index point, F pred)
{
    const auto rs = converged_at(o, point);
    if (rs.empty()) return 0.0;
    return static_cast<double>(std::count_if(rs.begin(), rs.end(), [&](const auto* r) { return pred(*r); })) /
           static_cast<double>(rs.size());
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// Residual of 0 in grad + dh(beta), written independently of the library.
double oracle_residual(const PenaltySpec& spec, const VectorXd& b, const VectorXd& g)
{
    if (const auto* h = std::get_if<L1Penalized>(&spec)) {
        double worst = 0.0;
        for (Index j = 0; j < b.size(); ++j) {
            const double lo = b(j) > 0 ? h->lambda : -h->lambda;
            const double hi = b(j) < 0 ? -h->lambda : h->lambda;
            worst = std::max(worst, oracle::interval_distance(-g(j), lo, hi));
        }
        return worst;
    }
    if (const auto* h = std::get_if<GroupLasso>(&spec)) {
        double worst = 0.0;
        for (Index k = 0; k < h->groups.num_groups(); ++k) {
            VectorXd bg(h->groups.group_size()), gg(h->groups.group_size());
            Index i = 0;
            for (Index j : h->groups.group(k)) bg(i) = b(j), gg(i++) = g(j);
            const double nb = bg.norm();
            worst = std::max(worst, nb > 0 ? (gg + h->lambda * bg / nb).norm() : std::max(0.0, gg.norm() - h->lambda));
        }
        return worst;
    }
    // l1 ball: -g must lie in the normal cone {mu v : mu >= 0, v in d||b||_1}; minimise over mu by ternary search
    const auto& h = std::get<L1Constrained>(spec);
    if (b.lpNorm<1>() > h.radius * (1 + 1e-9)) return INFINITY;
    const bool boundary = b.lpNorm<1>() >= h.radius * (1 - 1e-9);
    auto resid = [&](double mu) {
        double worst = 0.0;
        for (Index j = 0; j < b.size(); ++j) {
            const double lo = b(j) > 0 ? mu : -mu, hi = b(j) < 0 ? -mu : mu;
            worst = std::max(worst, oracle::interval_distance(-g(j), lo, hi));
        }
        return worst;
    };
    if (!boundary) return resid(0.0);
    double lo = 0.0, hi = 2.0 * g.lpNorm<Eigen::Infinity>() + 1.0;
    for (int it = 0; it < 300; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (resid(m1) <= resid(m2)) hi = m2;
        else lo = m1;
    }
    return resid(0.5 * (lo + hi));
}

// 1. prox / solver exactness
Outcome criterion1()
{
    const Index n = 200, p = 50;
    const MatrixXd g = generate_design(CovarianceModel::identity(p), n, DesignKind::gaussian, 101);
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ() * MatrixXd::Identity(n, p);
    const MatrixXd x = std::sqrt(static_cast<double>(n)) * q;
    const GroundTruth t = sparse_ground_truth(p, 5, 1.0);
    const Dataset d = generate_linear(x, t.beta_star, 1.0, 101);
    const double lambda = 0.15;
    SolverConfig cfg;
    cfg.kkt_tol = 1e-12;
    const SolverResult r = fit_beta_hat(d, LossKind::squared, make_l1_penalized(lambda), cfg);
    const VectorXd c = x.transpose() * d.y / static_cast<double>(n);
    double err1 = 0.0;
    for (Index j = 0; j < p; ++j) {
        const double st = c(j) > lambda ? c(j) - lambda : (c(j) < -lambda ? c(j) + lambda : 0.0);
        err1 = std::max(err1, std::abs(r.solution(j) - st));
    }

    const Index n2 = 500, p2 = 1000;
    const GroundTruth t2 = sparse_ground_truth(p2, 5, 1.0);
    const CovarianceModel id = CovarianceModel::identity(p2);
    const Dataset d2 = generate_linear(generate_design(id, n2, DesignKind::gaussian, 102), t2.beta_star, 1.0, 102);
    const double lam2 = lambda_lasso(LossKind::squared, 1.0, sigma_star(d2), 0.5, p2, 5, n2);
    const SolverResult e = fit_eta(d2, LossKind::squared, curvature_matrix(LossKind::squared, id, t2.beta_star),
                                   t2.beta_star, make_l1_penalized(lam2), cfg);
    const VectorXd center = t2.beta_star + d2.X.transpose() * d2.noise / static_cast<double>(n2);
    double err2 = 0.0;
    for (Index j = 0; j < p2; ++j) {
        const double v = center(j);
        const double st = v > lam2 ? v - lam2 : (v < -lam2 ? v + lam2 : 0.0);
        err2 = std::max(err2, std::abs(e.solution(j) - st));
    }
    return {err1 <= 1e-8 && err2 <= 1e-10 && r.converged && e.converged,
            fmt::format("lasso vs soft-threshold {:.2e} (tol 1e-8), eta vs prox {:.2e} (tol 1e-10)", err1, err2)};
}

// 2. KKT certification on 100 random instances
Outcome criterion2()
{
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<Index> pick_p(20, 500);
    int ok = 0;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const LossKind loss = i % 2 ? LossKind::logistic : LossKind::squared;
        const int which = (i / 2) % 3;
        Index p = pick_p(rng);
        const Index d = 4;
        if (which == 2) p = std::max<Index>(d * 5, p - p % d);
        const Index n = std::max<Index>(50, p / 2 + static_cast<Index>(rng() % 200));
        const Index s = 3;
        const CovarianceModel cov = i % 4 < 2 ? CovarianceModel::identity(p) : CovarianceModel::ar1(p, 0.4);
        std::optional<GroupStructure> groups;
        GroundTruth truth;
        if (which == 2) {
            groups = GroupStructure::contiguous(p, d);
            truth = group_sparse_ground_truth(*groups, 2, loss == LossKind::logistic ? 0.25 : 1.0);
        } else {
            truth = sparse_ground_truth(p, s, loss == LossKind::logistic ? 0.5 : 1.0);
        }
        const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(i);
        const MatrixXd x = generate_design(cov, n, DesignKind::gaussian, seed);
        const Dataset data = loss == LossKind::logistic ? generate_logistic(x, truth.beta_star, seed)
                                                        : generate_linear(x, truth.beta_star, 1.0, seed);
        const double sstar = loss == LossKind::logistic ? 0.5 : sigma_star(data);
        PenaltySpec pen = make_l1_penalized(lambda_lasso(loss, 1.0, sstar, 0.5, p, s, n));
        if (which == 1) pen = make_l1_constrained(truth.beta_star.lpNorm<1>());
        if (which == 2) pen = make_group_lasso(lambda_group(1.0, sstar, 0.5, d, p / d, 2, n), *groups);
        const SolverResult r = fit_beta_hat(data, loss, pen);
        const double res = oracle_residual(pen, r.solution, smooth_gradient(data, loss, r.solution));
        worst = std::max(worst, std::max(res, r.kkt_residual));
        if (r.converged && r.kkt_residual <= 1e-8 && res <= 1e-8) ++ok;
    }
    return {ok == 100, fmt::format("{}/100 certified, worst residual {:.2e} (tol 1e-8)", ok, worst)};
}

Outcome rates_check(const std::string& name, const std::string& penalty, double lo, double hi, bool check_ratio)
{
    const ExperimentOutcome o = run(name, "experiment = rates\n"
                                          "penalty = " + penalty + "\n"
                                          "grid = 400,800,5; 800,1600,5; 1600,3200,5; 3200,6400,5\n"
                                          "replications = 100\n"
                                          "master_seed = 2024\n");
    std::vector<double> rate, diff, ratio;
    for (Index pt = 0; pt < 4; ++pt) {
        rate.push_back(median_at(o, pt, [](const ReplicationRecord& r) { return r.r_n; }));
        diff.push_back(median_at(o, pt, [](const ReplicationRecord& r) { return r.diff_k; }));
        ratio.push_back(median_at(o, pt, [](const ReplicationRecord& r) { return r.ratio; }));
    }
    const RateFit f = rate_fit(rate, diff);
    bool pass = f.slope >= lo && f.slope <= hi && o.failures == 0;
    std::string detail = fmt::format("slope {:.3f} +- {:.3f} (band [{}, {}]), {} unconverged", f.slope,
                                     f.stderr_slope, lo, hi, o.failures);
    if (check_ratio) {
        bool decreasing = true;
        for (std::size_t i = 1; i < ratio.size(); ++i) decreasing = decreasing && ratio[i] < ratio[i - 1];
        pass = pass && decreasing && ratio.back() < 0.35;
        detail += fmt::format("; median ratio {:.4f} {:.4f} {:.4f} {:.4f} (strictly decreasing, last < 0.35)",
                              ratio[0], ratio[1], ratio[2], ratio[3]);
    }
    return {pass, detail};
}

// 3. first-order expansion for the penalized Lasso
Outcome criterion3() { return rates_check("c3_rates_penalized", "l1_penalized", 1.2, 2.4, true); }

// 4. constrained Lasso slow rate
Outcome criterion4() { return rates_check("c4_rates_constrained", "l1_constrained", 1.1, 1.9, false); }

// 5. exact risk identity
Outcome criterion5()
{
    const ExperimentOutcome o = run("c5_risk_identity", "experiment = risk_identity\n"
                                                        "grid = 2000,1000,5\n"
                                                        "replications = 200\n"
                                                        "mc_inner = 4000\n"
                                                        "t = 2\n"
                                                        "master_seed = 505\n");
    const double within = fraction_at(o, 0, [](const ReplicationRecord& r) { return std::abs(r.risk->ratio - 1.0) <= 0.15; });
    const double bound = fraction_at(o, 0, [](const ReplicationRecord& r) { return r.risk->bound_holds; });
    const double med = median_at(o, 0, [](const ReplicationRecord& r) { return r.risk->ratio; });
    return {within >= 0.90 && bound >= 0.93 && o.failures == 0,
            fmt::format("|ratio-1| <= 0.15 in {:.3f} of reps (need 0.90), bound holds in {:.3f} (need 0.93), "
                        "median ratio {:.4f}",
                        within, bound, med)};
}

// 6. block James-Stein prox risk vs an independent blockwise Monte Carlo
Outcome criterion6()
{
    const Index d = 4, m = 200, n = 2000;
    const GroupStructure groups = GroupStructure::contiguous(m * d, d);
    const VectorXd b = group_sparse_ground_truth(groups, 5, 1.0).beta_star;
    const double sstar = 1.0;
    const double lambda = lambda_group(1.0, sstar, 0.5, d, m, 5, n);
    const ProxRisk lib = mc_prox_risk(make_group_lasso(lambda, groups), b, sstar, n, 20000, 606);

    std::mt19937_64 rng(607);
    std::normal_distribution<double> normal;
    const double tau = sstar / std::sqrt(static_cast<double>(n));
    std::vector<double> draws;
    draws.reserve(20000);
    for (int r = 0; r < 20000; ++r) {
        double loss = 0.0;
        for (Index k = 0; k < m; ++k) {
            double x[4], nx = 0.0;
            for (Index j = 0; j < d; ++j) x[j] = b(k * d + j) + tau * normal(rng), nx += x[j] * x[j];
            nx = std::sqrt(nx);
            const double f = nx > lambda ? 1.0 - lambda / nx : 0.0;
            for (Index j = 0; j < d; ++j) loss += (f * x[j] - b(k * d + j)) * (f * x[j] - b(k * d + j));
        }
        draws.push_back(loss);
    }
    const auto o = oracle::moments(draws);
    const double se = std::hypot(lib.mc_se, o.se);
    const double gap = std::abs(lib.risk - o.mean);
    return {gap <= 3.0 * se, fmt::format("library {:.6f} vs oracle {:.6f}, gap {:.2e} (3 se = {:.2e})", lib.risk,
                                         o.mean, gap, 3.0 * se)};
}

// 7. coverage of the de-biased interval
Outcome criterion7()
{
    const ExperimentOutcome o = run("c7_coverage", "experiment = coverage\n"
                                                   "grid = 1000,2000,5\n"
                                                   "replications = 500\n"
                                                   "master_seed = 707\n");
    const double cov = fraction_at(o, 0, [](const ReplicationRecord& r) { return r.coverage->covered; });
    return {cov >= 0.92 && cov <= 0.975 && o.failures == 0,
            fmt::format("coverage {:.3f} over {} reps (band [0.92, 0.975])", cov, converged_at(o, 0).size())};
}

// 8. cone membership frequency vs the probability floor
Outcome criterion8()
{
    const double xi = 0.5;
    const ExperimentOutcome l = run("c8_cone_lasso", "experiment = cone_check\n"
                                                     "grid = 1000,1000,5\n"
                                                     "replications = 300\n"
                                                     "xi = 0.5\n"
                                                     "master_seed = 808\n");
    const ExperimentOutcome g = run("c8_cone_group", "experiment = cone_check\n"
                                                     "penalty = group_lasso\n"
                                                     "grid = 1000,1000,5,250,4\n"
                                                     "replications = 300\n"
                                                     "xi = 0.5\n"
                                                     "master_seed = 809\n");
    auto joint = [](const ReplicationRecord& r) { return r.cone_beta && r.cone_eta; };
    const double fl = fraction_at(l, 0, joint), fg = fraction_at(g, 0, joint);
    const double ps = 1000.0 / 5.0, ms = 250.0 / 5.0;
    const double floor_l = 1.0 - 2.0 / (xi * xi * std::log(ps) * std::pow(ps, xi));
    const double floor_g = 1.0 - 2.0 / (2.0 * xi * xi * std::log(ms) * std::pow(ms, xi));
    auto se = [](double f, std::size_t n) { return std::sqrt(std::max(f * (1 - f), 0.0) / static_cast<double>(n)); };
    const double need_l = floor_l - 3.0 * se(fl, converged_at(l, 0).size());
    const double need_g = floor_g - 3.0 * se(fg, converged_at(g, 0).size());
    return {fl >= need_l && fg >= need_g && l.failures == 0 && g.failures == 0,
            fmt::format("lasso {:.3f} (need {:.3f}), group {:.3f} (need {:.3f})", fl, need_l, fg, need_g)};
}

// 9. sparsity of eta for the Group-Lasso
Outcome criterion9()
{
    const ExperimentOutcome o = run("c9_sparsity", "experiment = sparsity_check\n"
                                                   "penalty = group_lasso\n"
                                                   "grid = 2000,800,5,200,4\n"
                                                   "replications = 200\n"
                                                   "master_seed = 909\n");
    const double frac = fraction_at(o, 0, [](const ReplicationRecord& r) {
        return static_cast<double>(r.groups_eta) <= *r.sparsity_bound;
    });
    const double med = median_at(o, 0, [](const ReplicationRecord& r) { return static_cast<double>(r.groups_eta); });
    const double bound = o.records.empty() ? NAN : *o.records.front().sparsity_bound;
    return {frac >= 0.90 && o.failures == 0,
            fmt::format("count <= C s in {:.3f} of reps (need 0.90); median nonzero groups {:.0f}, C s = {:.1f}", frac,
                        med, bound)};
}

// 10. loss regularity numerics
Outcome criterion10()
{
    // |d l''/du| maximised on a fine grid, derivative by central differences of l''
    double best = 0.0;
    for (double u = -10.0; u <= 10.0; u += 1e-4) {
        const double v = std::abs(oracle::central_difference(
            [](double t) { return loss_d2(LossKind::logistic, 0.0, t); }, u, 1e-4));
        best = std::max(best, v);
    }
    const double b = 1.0 / (6.0 * std::sqrt(3.0));
    const bool b_ok = std::abs(best - b) <= 1e-6 && std::abs(loss_constants(LossKind::logistic).b - b) <= 1e-15;

    std::mt19937_64 rng(1010);
    std::normal_distribution<double> normal;
    double worst = -INFINITY;
    for (int rep = 0; rep < 100; ++rep) {
        VectorXd bs(5), bb(5);
        for (Index j = 0; j < 5; ++j) bs(j) = 0.5 * normal(rng), bb(j) = bs(j) + 2.0 * normal(rng);
        const Dataset d = generate_logistic(
            generate_design(CovarianceModel::identity(5), 100, DesignKind::gaussian, 2000 + rep), bs, 2000 + rep);
        worst = std::max(worst, taylor_remainder(d, LossKind::logistic, bb, bs).max_violation);
    }
    const bool taylor_ok = worst <= 1e-10;

    const StabilityReport st = stability_ratio_check(LossKind::logistic, StabilityGrid{});
    return {b_ok && taylor_ok && st.holds(),
            fmt::format("grid max {:.9f} vs B {:.9f}; Taylor worst violation {:.2e} over 1e4 triples; stability "
                        "quotient {:.6f} over {} pairs",
                        best, b, worst, st.worst_quotient, st.pairs_checked)};
}

// 11. logistic K by quadrature vs an independent Monte Carlo
Outcome criterion11()
{
    const Index p = 5;
    // equicorrelated Sigma keeps every entry of K well away from zero
    MatrixXd sigma = MatrixXd::Constant(p, p, 0.5);
    sigma.diagonal().setOnes();
    const CovarianceModel cov = CovarianceModel::explicit_matrix(sigma);
    VectorXd b(p);
    b << 0.6, -0.4, 0.3, 0.0, 0.5;
    const MatrixXd k = curvature_matrix(LossKind::logistic, cov, b).k.dense();

    const Eigen::LLT<MatrixXd> llt(sigma);
    const MatrixXd lower = llt.matrixL();
    std::mt19937_64 rng(1111);
    std::normal_distribution<double> normal;
    MatrixXd acc = MatrixXd::Zero(p, p);
    const int draws = 4000000;
    VectorXd g(p), x(p);
    for (int i = 0; i < draws; ++i) {
        for (Index j = 0; j < p; ++j) g(j) = normal(rng);
        x.noalias() = lower * g;
        const double e = std::exp(-std::abs(x.dot(b)));
        const double w = e / ((1.0 + e) * (1.0 + e));
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x, w);
    }
    acc = acc.selfadjointView<Eigen::Lower>();
    acc /= draws;
    const double rel = ((acc - k).array().abs() / k.array().abs()).maxCoeff();
    return {rel <= 0.01, fmt::format("max entrywise relative gap {:.4f} (tol 0.01)", rel)};
}

// 12. determinism across thread counts
Outcome criterion12()
{
    const std::string base = "grid = 200,400,5; 400,800,5\nreplications = 6\nmaster_seed = 1212\n";
    bool same = true;
    std::string detail;
    for (const auto& [kind, extra] : std::vector<std::pair<std::string, std::string>>{
             {"rates", ""}, {"risk_identity", "mc_inner = 500\n"}, {"coverage", ""}}) {
        std::vector<std::string> files;
        for (int threads : {1, 2, 4}) {
            ExperimentConfig c = ExperimentConfig::parse("experiment = " + kind + "\n" + base + extra);
            c.threads = threads;
            c.output_dir = g_workdir / fmt::format("c12_{}_{}", kind, threads);
            run_experiment(c);
            files.push_back(slurp(c.output_dir / "records.csv"));
        }
        const bool eq = files[0] == files[1] && files[1] == files[2] && !files[0].empty();
        same = same && eq;
        detail += fmt::format("{}{}: {}", detail.empty() ? "" : ", ", kind, eq ? "identical" : "DIFFERENT");
    }
    return {same, detail + " (threads 1, 2, 4)"};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acceptance criteria"};
    int only = 0;
    std::string workdir = (fs::temp_directory_path() / "penex_acceptance").string();
    app.add_option("--only", only, "run a single criterion (1-12)");
    app.add_option("--workdir", workdir, "directory for experiment outputs");
    app.add_option("--threads", g_threads, "worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);
    g_workdir = workdir;
    fs::create_directories(g_workdir);

    const std::vector<Criterion> all = {
        {1, "prox/solver exactness", criterion1},
        {2, "KKT certification", criterion2},
        {3, "first-order expansion rate (penalized Lasso)", criterion3},
        {4, "constrained Lasso slow rate", criterion4},
        {5, "exact risk identity", criterion5},
        {6, "block James-Stein prox risk", criterion6},
        {7, "de-biased interval coverage", criterion7},
        {8, "cone membership", criterion8},
        {9, "sparsity of eta (Group-Lasso)", criterion9},
        {10, "loss regularity numerics", criterion10},
        {11, "K quadrature vs Monte Carlo", criterion11},
        {12, "determinism across thread counts", criterion12},
    };
    if (only != 0 && (only < 1 || only > 12)) {
        std::cerr << "--only must be in 1..12\n";
        return 2;
    }

    int failed = 0;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << fmt::format("{} criterion {:2d} ({}): {} [{:.1f}s]", out.pass ? "PASS" : "FAIL", c.id, c.title,
                                 out.detail, secs)
                  << std::endl;
        failed += !out.pass;
    }
    return failed == 0 ? 0 : 1;
}
