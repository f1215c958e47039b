#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "penex/harness.hpp"
#include "penex/io.hpp"

using namespace penex;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("penex_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST(Config, ParsesKeysAndGrid)
{
    const ExperimentConfig c = ExperimentConfig::parse(
        "# comment\n"
        "experiment = rates\n"
        "grid = 100,200,5; 200,400,5\n"
        "penalty = l1_constrained\n"
        "replications = 7\n"
        "master_seed = 42\n"
        "xi = 0.25\n"
        "tol = 1e-9\n");
    EXPECT_EQ(c.kind, ExperimentKind::rates);
    ASSERT_EQ(c.grid.size(), 2u);
    EXPECT_EQ(c.grid[1].n, 200);
    EXPECT_EQ(c.grid[1].p, 400);
    EXPECT_EQ(c.penalty, PenaltyKind::l1_constrained);
    EXPECT_EQ(c.replications, 7);
    EXPECT_EQ(c.master_seed, 42u);
    EXPECT_DOUBLE_EQ(c.xi, 0.25);
    EXPECT_DOUBLE_EQ(c.solver.kkt_tol, 1e-9);
    EXPECT_NO_THROW(c.validate());

    const ExperimentConfig g = ExperimentConfig::parse("penalty = group_lasso\ngrid = 100,40,2,10,4\n");
    EXPECT_EQ(g.grid[0].m, 10);
    EXPECT_EQ(g.grid[0].d, 4);
    EXPECT_NO_THROW(g.validate());
}

TEST(Config, RejectsInvalidInput)
{
    EXPECT_THROW(ExperimentConfig::parse("bogus = 1\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::parse("replications = many\n"), ConfigError);
    EXPECT_THROW(ExperimentConfig::parse("grid = 100,200\n"), ConfigError);
    auto invalid = [](const std::string& text) {
        const ExperimentConfig c = ExperimentConfig::parse(text);
        c.validate();
    };
    EXPECT_THROW(invalid("grid = 100,200,5\nreplications = 0\n"), ConfigError);
    EXPECT_THROW(invalid("grid = 100,5,5\n"), ConfigError);
    EXPECT_THROW(invalid("penalty = group_lasso\ngrid = 100,40,2,10,3\n"), ConfigError);
    EXPECT_THROW(invalid("penalty = group_lasso\ngrid = 100,40,10,10,4\n"), ConfigError);
    EXPECT_THROW(invalid("experiment = risk_identity\ngrid = 100,200,5\nloss = logistic\n"), ConfigError);
    EXPECT_THROW(invalid("experiment = risk_identity\ngrid = 100,200,5\ncovariance = ar1:0.3\n"), ConfigError);
    EXPECT_THROW(invalid("loss = logistic\ndesign = rademacher\ngrid = 100,200,5\n"), ConfigError);
    EXPECT_THROW(invalid("grid = \n"), ConfigError);
}

TEST(RateFit, ExactPowerLaws)
{
    const std::vector<double> r = {0.4, 0.2, 0.1, 0.05};
    std::vector<double> m2, m15;
    for (double x : r) m2.push_back(3.0 * x * x), m15.push_back(0.7 * std::pow(x, 1.5));
    const RateFit f2 = rate_fit(r, m2);
    EXPECT_NEAR(f2.slope, 2.0, 1e-12);
    EXPECT_NEAR(f2.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f2.stderr_slope, 0.0, 1e-10);
    EXPECT_NEAR(rate_fit(r, m15).slope, 1.5, 1e-12);
    EXPECT_THROW(rate_fit({0.1, 0.2}, {0.1, 0.2}), std::invalid_argument);
}

TEST(RateFit, FromRecordsUsesMedianPerPoint)
{
    std::vector<ReplicationRecord> recs;
    const std::vector<double> rates = {0.4, 0.2, 0.1};
    for (Index pt = 0; pt < 3; ++pt) {
        for (Index rep = 0; rep < 3; ++rep) {
            ReplicationRecord r;
            r.point = pt;
            r.rep = rep;
            r.grid = {100 * (pt + 1), 200 * (pt + 1), 5, 0, 0};
            r.converged = true;
            r.r_n = rates[pt];
            // median across reps is r^2; the outliers must not move the fit
            r.diff_k = rates[pt] * rates[pt] * (rep == 0 ? 1.0 : (rep == 1 ? 100.0 : 0.01));
            recs.push_back(r);
        }
    }
    // an unconverged row with a wild value is skipped
    ReplicationRecord bad = recs.back();
    bad.rep = 3;
    bad.converged = false;
    bad.diff_k = 1e6;
    recs.push_back(bad);
    const fs::path dir = scratch("ratefit");
    std::ofstream(dir / "records.csv", std::ios::binary) << format_records_csv(recs);
    const RateFit f = rate_fit_csv(dir / "records.csv");
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_EQ(f.points, 3);
}

TEST(Quantile, LinearInterpolation)
{
    EXPECT_DOUBLE_EQ(quantile({3, 1, 2, 4}, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile({5}, 0.9), 5.0);
    EXPECT_DOUBLE_EQ(quantile({1, NAN, 3}, 0.5), 2.0);
    EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(Records, HeaderAndCrlf)
{
    const std::string csv = format_records_csv({});
    EXPECT_EQ(csv.substr(0, 10), "point,rep,");
    EXPECT_EQ(csv.substr(csv.size() - 2), "\r\n");
    EXPECT_EQ(record_columns().size(), static_cast<std::size_t>(std::count(csv.begin(), csv.end(), ',') + 1));
}

TEST(Io, DatasetRoundTrip)
{
    const fs::path dir = scratch("io");
    const GroundTruth t = sparse_ground_truth(12, 2, 1.5);
    const CovarianceModel cov = CovarianceModel::ar1(12, 0.25);
    Dataset d = generate_linear(generate_design(cov, 9, DesignKind::gaussian, 3), t.beta_star, 0.5, 3);
    d.covariance = cov.describe();
    save_dataset(dir, d, Index{3});
    const Dataset e = load_dataset(dir);
    EXPECT_EQ(e.X, d.X);
    EXPECT_EQ(e.y, d.y);
    EXPECT_EQ(e.noise, d.noise);
    EXPECT_EQ(e.beta_star, d.beta_star);
    EXPECT_EQ(e.covariance, "ar1:0.25");
    EXPECT_EQ(e.noise_sd, 0.5);
    EXPECT_EQ(load_group_size(dir), Index{3});
    EXPECT_THROW(load_dataset(dir / "missing"), std::exception);
}

TEST(Experiment, DeterministicAcrossThreadCounts)
{
    ExperimentConfig c = ExperimentConfig::parse("experiment = rates\ngrid = 60,120,3; 120,240,3\nreplications = 4\n");
    c.master_seed = 17;
    c.output_dir = scratch("det1");
    c.threads = 1;
    const ExperimentOutcome a = run_experiment(c);
    c.output_dir = scratch("det3");
    c.threads = 3;
    const ExperimentOutcome b = run_experiment(c);
    EXPECT_EQ(a.records.size(), 8u);
    EXPECT_EQ(slurp(fs::temp_directory_path() / "penex_test_det1" / "records.csv"),
              slurp(fs::temp_directory_path() / "penex_test_det3" / "records.csv"));
    EXPECT_TRUE(fs::exists(c.output_dir / "summary.json"));
    EXPECT_TRUE(fs::exists(c.output_dir / "timings.csv"));
    EXPECT_TRUE(fs::exists(c.output_dir / "plots" / "ratio_vs_n.csv"));

    // single replication reproduces the corresponding record
    const ReplicationRecord r = run_replication(c, 1, 2);
    EXPECT_EQ(r.seed, a.records[6].seed);
    EXPECT_EQ(r.diff_k, a.records[6].diff_k);
}

TEST(Experiment, CoverageAndSparsityKinds)
{
    ExperimentConfig c = ExperimentConfig::parse("experiment = coverage\ngrid = 80,100,3\nreplications = 2\n");
    c.output_dir = scratch("cov");
    const ExperimentOutcome o = run_experiment(c);
    ASSERT_EQ(o.records.size(), 2u);
    EXPECT_TRUE(o.records[0].coverage.has_value());

    ExperimentConfig s = ExperimentConfig::parse(
        "experiment = sparsity_check\npenalty = group_lasso\ngrid = 100,80,2,20,4\nreplications = 2\n");
    s.output_dir = scratch("sp");
    const ExperimentOutcome so = run_experiment(s);
    ASSERT_TRUE(so.records[0].sparsity_bound.has_value());
    EXPECT_LE(so.records[0].groups_eta, 20);
}
