// Python bindings for the penex core.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "penex/cones.hpp"
#include "penex/diagnostics.hpp"
#include "penex/harness.hpp"
#include "penex/solver.hpp"

namespace py = pybind11;
using namespace penex;

namespace {

LossKind loss_of(const std::string& s) { return parse_loss_kind(s); }

}  // namespace

PYBIND11_MODULE(_penex, m)
{
    m.doc() = "Penalized M-estimators, first-order expansions and their diagnostics";

    py::class_<CovarianceModel>(m, "CovarianceModel")
        .def_static("identity", &CovarianceModel::identity, py::arg("p"))
        .def_static("ar1", &CovarianceModel::ar1, py::arg("p"), py::arg("rho"))
        .def_static("explicit_matrix", &CovarianceModel::explicit_matrix, py::arg("sigma"))
        .def_static("parse", &CovarianceModel::parse, py::arg("descriptor"), py::arg("p"))
        .def_property_readonly("dim", &CovarianceModel::dim)
        .def("describe", &CovarianceModel::describe)
        .def("dense", [](const CovarianceModel& c) { return c.matrix().dense(); })
        .def("__repr__", [](const CovarianceModel& c) { return "CovarianceModel(" + c.describe() + ")"; });

    py::class_<GroupStructure>(m, "GroupStructure")
        .def_static("contiguous", &GroupStructure::contiguous, py::arg("p"), py::arg("group_size"))
        .def_static("from_groups", &GroupStructure::from_groups, py::arg("p"), py::arg("groups"))
        .def_property_readonly("dim", &GroupStructure::dim)
        .def_property_readonly("num_groups", &GroupStructure::num_groups)
        .def_property_readonly("group_size", &GroupStructure::group_size)
        .def_property_readonly("groups", &GroupStructure::groups);

    py::class_<GroundTruth>(m, "GroundTruth")
        .def_readonly("beta_star", &GroundTruth::beta_star)
        .def_readonly("support", &GroundTruth::support)
        .def_readonly("sparsity", &GroundTruth::sparsity)
        .def_readonly("group_sparsity", &GroundTruth::group_sparsity);
    m.def("sparse_ground_truth", &sparse_ground_truth, py::arg("p"), py::arg("s"), py::arg("magnitude") = 1.0);
    m.def("group_sparse_ground_truth", &group_sparse_ground_truth, py::arg("groups"), py::arg("s"),
          py::arg("magnitude") = 1.0);

    py::class_<Dataset>(m, "Dataset")
        .def_readonly("X", &Dataset::X)
        .def_readonly("y", &Dataset::y)
        .def_readonly("noise", &Dataset::noise)
        .def_readonly("beta_star", &Dataset::beta_star)
        .def_readonly("seed", &Dataset::seed)
        .def_readonly("noise_sd", &Dataset::noise_sd)
        .def_property_readonly("n", &Dataset::n)
        .def_property_readonly("p", &Dataset::p)
        .def_property_readonly("model", [](const Dataset& d) { return to_string(d.model_kind); });

    m.def(
        "generate_design",
        [](const CovarianceModel& cov, Index n, const std::string& design, std::uint64_t seed) {
            return generate_design(cov, n, parse_design_kind(design), seed);
        },
        py::arg("cov"), py::arg("n"), py::arg("design") = "gaussian", py::arg("seed") = 1);
    m.def(
        "generate_linear",
        [](const MatrixXd& x, const VectorXd& beta, double noise_sd, std::uint64_t seed, const CovarianceModel* cov) {
            Dataset d = generate_linear(x, beta, noise_sd, seed);
            if (cov) d.covariance = cov->describe();
            return d;
        },
        py::arg("X"), py::arg("beta_star"), py::arg("noise_sd") = 1.0, py::arg("seed") = 1,
        py::arg("cov") = nullptr);
    m.def(
        "generate_logistic",
        [](const MatrixXd& x, const VectorXd& beta, std::uint64_t seed) { return generate_logistic(x, beta, seed); },
        py::arg("X"), py::arg("beta_star"), py::arg("seed") = 1);
    m.def("sigma_star", &sigma_star, py::arg("data"));

    // loss
    m.def(
        "loss_value", [](const std::string& k, double y, double u) { return loss_value(loss_of(k), y, u); },
        py::arg("loss"), py::arg("y"), py::arg("u"));
    m.def(
        "loss_d1", [](const std::string& k, double y, double u) { return loss_d1(loss_of(k), y, u); },
        py::arg("loss"), py::arg("y"), py::arg("u"));
    m.def(
        "loss_d2", [](const std::string& k, double y, double u) { return loss_d2(loss_of(k), y, u); },
        py::arg("loss"), py::arg("y"), py::arg("u"));
    m.def(
        "loss_constants",
        [](const std::string& k) {
            const LossConstants c = loss_constants(loss_of(k));
            py::dict d;
            d["B"] = c.b;
            d["B2_sharp"] = c.b2_sharp;
            d["B2_reported"] = c.b2_reported;
            return d;
        },
        py::arg("loss"));

    py::class_<CurvatureMatrix>(m, "CurvatureMatrix")
        .def("dense", [](const CurvatureMatrix& k) { return k.k.dense(); })
        .def("norm", &CurvatureMatrix::norm, py::arg("u"))
        .def_property_readonly("provenance", [](const CurvatureMatrix& k) { return to_string(k.provenance); });
    m.def(
        "curvature_matrix",
        [](const std::string& loss, const CovarianceModel& cov, const VectorXd& beta, const std::string& design) {
            return curvature_matrix(loss_of(loss), cov, beta, parse_design_kind(design));
        },
        py::arg("loss"), py::arg("cov"), py::arg("beta_star"), py::arg("design") = "gaussian");
    m.def("b3_constant", &b3_constant, py::arg("cov"), py::arg("k"));

    // penalties: the three variants are separate classes, accepted wherever a penalty is expected
    py::class_<L1Penalized>(m, "L1Penalized")
        .def(py::init([](double lambda) { return std::get<L1Penalized>(make_l1_penalized(lambda)); }), py::arg("lam"))
        .def_readonly("lam", &L1Penalized::lambda);
    py::class_<L1Constrained>(m, "L1Constrained")
        .def(py::init([](double r) { return std::get<L1Constrained>(make_l1_constrained(r)); }), py::arg("radius"))
        .def_readonly("radius", &L1Constrained::radius);
    py::class_<GroupLasso>(m, "GroupLasso")
        .def(py::init([](double lambda, GroupStructure g) {
                 return std::get<GroupLasso>(make_group_lasso(lambda, std::move(g)));
             }),
             py::arg("lam"), py::arg("groups"))
        .def_readonly("lam", &GroupLasso::lambda)
        .def_readonly("groups", &GroupLasso::groups);
    m.def("penalty_value", &penalty_value, py::arg("penalty"), py::arg("beta"));
    m.def("prox", &prox, py::arg("penalty"), py::arg("x"), py::arg("step") = 1.0);
    m.def("soft_threshold", py::vectorize(&soft_threshold), py::arg("x"), py::arg("threshold"));
    m.def("project_l1_ball", &project_l1_ball, py::arg("x"), py::arg("radius"));
    m.def("subdifferential_residual", &subdifferential_residual, py::arg("penalty"), py::arg("beta"), py::arg("grad"));

    // solver
    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init<>())
        .def_readwrite("max_iters", &SolverConfig::max_iters)
        .def_readwrite("kkt_tol", &SolverConfig::kkt_tol)
        .def_readwrite("objective_rel_tol", &SolverConfig::objective_rel_tol)
        .def_readwrite("shrink", &SolverConfig::shrink);
    py::class_<SolverResult>(m, "SolverResult")
        .def_readonly("solution", &SolverResult::solution)
        .def_readonly("objective", &SolverResult::objective)
        .def_readonly("kkt_residual", &SolverResult::kkt_residual)
        .def_readonly("iterations", &SolverResult::iterations)
        .def_readonly("converged", &SolverResult::converged)
        .def_readonly("wall_time", &SolverResult::wall_time);
    m.def(
        "fit_beta_hat",
        [](const Dataset& d, const std::string& loss, const PenaltySpec& pen, const SolverConfig& cfg) {
            py::gil_scoped_release release;
            return fit_beta_hat(d, loss_of(loss), pen, cfg);
        },
        py::arg("data"), py::arg("loss"), py::arg("penalty"), py::arg("config") = SolverConfig{});
    m.def(
        "fit_eta",
        [](const Dataset& d, const std::string& loss, const CurvatureMatrix& k, const VectorXd& beta_star,
           const PenaltySpec& pen, const SolverConfig& cfg) {
            py::gil_scoped_release release;
            return fit_eta(d, loss_of(loss), k, beta_star, pen, cfg);
        },
        py::arg("data"), py::arg("loss"), py::arg("k"), py::arg("beta_star"), py::arg("penalty"),
        py::arg("config") = SolverConfig{});
    m.def(
        "smooth_gradient",
        [](const Dataset& d, const std::string& loss, const VectorXd& b) { return smooth_gradient(d, loss_of(loss), b); },
        py::arg("data"), py::arg("loss"), py::arg("beta"));

    // cones and tuning
    m.def(
        "lambda_lasso",
        [](const std::string& loss, double l, double sstar, double xi, Index p, Index s, Index n) {
            return lambda_lasso(loss_of(loss), l, sstar, xi, p, s, n);
        },
        py::arg("loss"), py::arg("L"), py::arg("sigma_star"), py::arg("xi"), py::arg("p"), py::arg("s"),
        py::arg("n"));
    m.def("lambda_group", &lambda_group, py::arg("L"), py::arg("sigma_star"), py::arg("xi"), py::arg("d"),
          py::arg("M"), py::arg("s"), py::arg("n"));
    m.def("rate_lasso", &rate_lasso, py::arg("n"), py::arg("p"), py::arg("s"));
    m.def("rate_group", &rate_group, py::arg("n"), py::arg("d"), py::arg("M"), py::arg("s"));
    py::class_<LassoCone>(m, "LassoCone")
        .def(py::init([](double k) { return std::get<LassoCone>(make_lasso_cone(k)); }), py::arg("k"))
        .def_readonly("k", &LassoCone::k);
    py::class_<GroupCone>(m, "GroupCone")
        .def(py::init([](double c, Index s, GroupStructure g) {
                 return std::get<GroupCone>(make_group_cone(c, s, std::move(g)));
             }),
             py::arg("c"), py::arg("s"), py::arg("groups"));
    py::class_<SupportCone>(m, "SupportCone")
        .def(py::init([](std::vector<Index> s) { return std::get<SupportCone>(make_support_cone(std::move(s))); }),
             py::arg("support"));
    m.def("cone_member", &cone_member, py::arg("cone"), py::arg("u"), py::arg("tol") = 1e-9);
    m.def(
        "gamma_estimate",
        [](const ConeSpec& cone, const CovarianceModel& cov, Index n_mc, std::uint64_t seed) {
            const GammaEstimate g = gamma_estimate(cone, cov, n_mc, seed);
            return py::make_tuple(g.estimate, g.mc_se);
        },
        py::arg("cone"), py::arg("cov"), py::arg("n_mc"), py::arg("seed") = 1);
    m.def("phi_lower_bound", &phi_lower_bound, py::arg("cone"), py::arg("cov"));

    // diagnostics
    m.def(
        "mc_prox_risk",
        [](const PenaltySpec& pen, const VectorXd& b, double sstar, Index n, Index n_mc, std::uint64_t seed) {
            const ProxRisk r = mc_prox_risk(pen, b, sstar, n, n_mc, seed);
            return py::make_tuple(r.risk, r.mc_se);
        },
        py::arg("penalty"), py::arg("beta_star"), py::arg("sigma_star"), py::arg("n"), py::arg("n_mc"),
        py::arg("seed") = 1);
    m.def("prox_risk_l1_quadrature", &prox_risk_l1_quadrature, py::arg("lam"), py::arg("beta_star"),
          py::arg("noise_scale"));
    m.def(
        "debiased_estimate",
        [](const Dataset& d, const VectorXd& bh, const CovarianceModel& cov, const VectorXd& a) {
            const InferenceReport r = debiased_estimate(d, bh, cov, a);
            py::dict out;
            out["theta_hat"] = r.theta_hat;
            out["target"] = r.target;
            out["ci"] = py::make_tuple(r.ci_low, r.ci_high);
            out["covered"] = r.covered;
            out["t_stat"] = r.t_stat;
            return out;
        },
        py::arg("data"), py::arg("beta_hat"), py::arg("cov"), py::arg("a"));
    m.def("sparsity_constant", &sparsity_constant, py::arg("c_max"), py::arg("xi"), py::arg("b3"), py::arg("phi"));

    // harness
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    m.def(
        "run_experiment",
        [](const std::string& config_text, const std::filesystem::path& output_dir, int threads) {
            ExperimentConfig c = ExperimentConfig::parse(config_text);
            c.output_dir = output_dir;
            c.threads = threads;
            c.validate();
            ExperimentOutcome o;
            {
                py::gil_scoped_release release;
                o = run_experiment(c);
            }
            py::dict out;
            out["records"] = o.records.size();
            out["failures"] = o.failures;
            out["failure_threshold_exceeded"] = o.failure_threshold_exceeded;
            return out;
        },
        py::arg("config"), py::arg("output_dir"), py::arg("threads") = 0);
    m.def(
        "rate_fit",
        [](const std::vector<double>& rate, const std::vector<double>& metric) {
            const RateFit f = rate_fit(rate, metric);
            return py::make_tuple(f.slope, f.intercept, f.stderr_slope);
        },
        py::arg("rate"), py::arg("metric"));
}
