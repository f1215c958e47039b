#include "penex/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace penex {

void SolverConfig::validate() const
{
    if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
    if (!(kkt_tol > 0.0) || !(objective_rel_tol > 0.0))
        throw std::invalid_argument("solver: tolerances must be > 0");
    if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("solver: shrink must lie in (0, 1)");
    if (initial_step && !(*initial_step > 0.0)) throw std::invalid_argument("solver: initial step must be > 0");
}

namespace {

void check_dataset(const Dataset& data, Index p)
{
    if (data.X.rows() != data.y.size()) throw std::invalid_argument("dataset: X and y disagree on n");
    if (data.X.cols() != p) throw std::invalid_argument("dataset: dimension mismatch");
}

// X v, touching only the nonzero columns of v when it is sparse.
VectorXd predictor(const MatrixXd& x, const VectorXd& v)
{
    Index nnz = 0;
    for (Index j = 0; j < v.size(); ++j) nnz += v(j) != 0.0;
    if (3 * nnz > v.size()) return x * v;
    VectorXd u = VectorXd::Zero(x.rows());
    for (Index j = 0; j < v.size(); ++j)
        if (v(j) != 0.0) u.noalias() += v(j) * x.col(j);
    return u;
}

double mean_loss(const Dataset& data, LossKind loss, const VectorXd& u)
{
    double acc = 0.0;
    for (Index i = 0; i < u.size(); ++i) acc += loss_value(loss, data.y(i), u(i));
    return acc / static_cast<double>(u.size());
}

VectorXd loss_gradient_from_predictor(const Dataset& data, LossKind loss, const VectorXd& u)
{
    VectorXd w(u.size());
    for (Index i = 0; i < u.size(); ++i) w(i) = loss_d1(loss, data.y(i), u(i));
    return data.X.transpose() * w / static_cast<double>(u.size());
}

// Smooth part of the empirical problem. A state carries x and the linear
// predictor X x, which is linear in x so momentum combinations are cheap.
struct EmpiricalProblem {
    const Dataset& data;
    LossKind loss;

    struct State {
        VectorXd x;
        VectorXd u;
    };

    State make_state(const VectorXd& x) const { return {x, predictor(data.X, x)}; }
    State combine(const State& cur, const State& prev, double w) const
    {
        return {cur.x + w * (cur.x - prev.x), cur.u + w * (cur.u - prev.u)};
    }
    double value(const State& s) const { return mean_loss(data, loss, s.u); }
    VectorXd gradient(const State& s) const { return loss_gradient_from_predictor(data, loss, s.u); }
};

// (x - z)^T K (x - z) / 2 with the residual r = K (x - z) cached.
struct QuadraticProblem {
    const SpdMatrix& k;
    const VectorXd& center;

    struct State {
        VectorXd x;
        VectorXd r;
    };

    State make_state(const VectorXd& x) const { return {x, k.apply(x - center)}; }
    State combine(const State& cur, const State& prev, double w) const
    {
        return {cur.x + w * (cur.x - prev.x), cur.r + w * (cur.r - prev.r)};
    }
    double value(const State& s) const { return 0.5 * (s.x - center).dot(s.r); }
    VectorXd gradient(const State& s) const { return s.r; }
};

constexpr int kCheckEvery = 20;

template <class Problem>
SolverResult run_fista(const Problem& problem, const PenaltySpec& penalty, const VectorXd& start,
                       double lipschitz, bool backtrack, const SolverConfig& config)
{
    using State = typename Problem::State;
    const auto t0 = std::chrono::steady_clock::now();

    double l = lipschitz;
    State x_state = problem.make_state(start);
    double f_x = problem.value(x_state) + penalty_value(penalty, x_state.x);
    State prev_state = x_state;
    State y_state = x_state;
    double momentum = 1.0;
    bool momentum_active = false;

    SolverResult result;
    for (int it = 1; it <= config.max_iters; ++it) {
        result.iterations = it;
        const VectorXd grad_y = problem.gradient(y_state);
        const double smooth_y = problem.value(y_state);

        State cand;
        double smooth_cand = 0.0;
        VectorXd step_dir;
        while (true) {
            cand = problem.make_state(prox(penalty, y_state.x - grad_y / l, 1.0 / l));
            smooth_cand = problem.value(cand);
            step_dir = cand.x - y_state.x;
            if (!backtrack) break;
            const double model = smooth_y + grad_y.dot(step_dir) + 0.5 * l * step_dir.squaredNorm();
            // Relative slack keeps rounding noise in the loss sum from inflating l.
            if (smooth_cand <= model + 1e-12 * std::abs(smooth_y)) break;
            l /= config.shrink;
            if (!std::isfinite(l)) throw std::runtime_error("solver: backtracking diverged");
        }
        const double f_cand = smooth_cand + penalty_value(penalty, cand.x);

        if (momentum_active && f_cand > f_x + config.objective_rel_tol * std::abs(f_x)) {
            // Objective went up: drop momentum and redo from the current iterate.
            momentum = 1.0;
            momentum_active = false;
            y_state = x_state;
            continue;
        }

        // Gradient restart; still works once objective differences sink below rounding.
        const bool gradient_restart = momentum_active && (y_state.x - cand.x).dot(cand.x - x_state.x) > 0.0;

        prev_state = std::move(x_state);
        x_state = std::move(cand);
        f_x = f_cand;

        const double gradient_map = l * step_dir.norm();
        if (gradient_map <= config.kkt_tol || it % kCheckEvery == 0) {
            const double res = subdifferential_residual(penalty, x_state.x, problem.gradient(x_state));
            if (res <= config.kkt_tol) {
                result.converged = true;
                break;
            }
        }

        if (gradient_restart) momentum = 1.0;
        const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        const double w = (momentum - 1.0) / next;
        momentum = next;
        momentum_active = w > 0.0;
        y_state = momentum_active ? problem.combine(x_state, prev_state, w) : x_state;
    }

    result.solution = x_state.x;
    result.objective = f_x;
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace

double power_iteration(const std::function<VectorXd(const VectorXd&)>& op, Index dim, double rel_tol,
                       int max_iters)
{
    VectorXd v(dim);
    for (Index j = 0; j < dim; ++j) v(j) = 1.0 + 0.5 * static_cast<double>(j % 7) / 7.0;
    v.normalize();
    double estimate = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        VectorXd w = op(v);
        const double next = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        v = w / norm;
        if (it > 0 && std::abs(next - estimate) <= rel_tol * std::abs(next)) return next;
        estimate = next;
    }
    return estimate;
}

double smooth_objective(const Dataset& data, LossKind loss, const VectorXd& beta)
{
    check_dataset(data, beta.size());
    return mean_loss(data, loss, data.X * beta);
}

VectorXd smooth_gradient(const Dataset& data, LossKind loss, const VectorXd& beta)
{
    check_dataset(data, beta.size());
    return loss_gradient_from_predictor(data, loss, data.X * beta);
}

VectorXd expansion_center(const Dataset& data, LossKind loss, const CurvatureMatrix& k,
                          const VectorXd& beta_star)
{
    if (k.dim() != beta_star.size()) throw std::invalid_argument("expansion_center: dimension mismatch");
    return beta_star - k.k.apply_inverse(smooth_gradient(data, loss, beta_star));
}

SolverResult fit_beta_hat(const Dataset& data, LossKind loss, const PenaltySpec& penalty,
                          const SolverConfig& config)
{
    config.validate();
    check_dataset(data, data.p());
    if ((loss == LossKind::logistic) != (data.model_kind == ModelKind::logistic))
        throw std::invalid_argument("fit_beta_hat: loss kind does not match the dataset model");
    double lipschitz = 0.0;
    if (config.initial_step) {
        lipschitz = 1.0 / *config.initial_step;
    } else {
        const double n = static_cast<double>(data.n());
        const double gram_max = power_iteration(
            [&](const VectorXd& v) { return VectorXd(data.X.transpose() * (data.X * v) / n); }, data.p(), 1e-4,
            100);
        lipschitz = std::max(gram_max * loss_constants(loss).b2_sharp, 1e-12);
    }
    EmpiricalProblem problem{data, loss};
    SolverResult result = run_fista(problem, penalty, VectorXd::Zero(data.p()), lipschitz, true, config);
    result.kkt_residual =
        subdifferential_residual(penalty, result.solution, smooth_gradient(data, loss, result.solution));
    result.converged = result.converged && result.kkt_residual <= config.kkt_tol;
    return result;
}

SolverResult minimize_quadratic_surrogate(const CurvatureMatrix& k, const VectorXd& center,
                                          const PenaltySpec& penalty, const SolverConfig& config)
{
    config.validate();
    if (k.dim() != center.size()) throw std::invalid_argument("surrogate: dimension mismatch");
    const double lipschitz = config.initial_step ? 1.0 / *config.initial_step : k.k.lambda_max();
    QuadraticProblem problem{k.k, center};
    SolverResult result = run_fista(problem, penalty, center, lipschitz, config.initial_step.has_value(), config);
    result.kkt_residual = subdifferential_residual(penalty, result.solution, k.k.apply(result.solution - center));
    result.converged = result.converged && result.kkt_residual <= config.kkt_tol;
    return result;
}

SolverResult fit_eta(const Dataset& data, LossKind loss, const CurvatureMatrix& k, const VectorXd& beta_star,
                     const PenaltySpec& penalty, const SolverConfig& config, bool allow_mc_curvature)
{
    if (k.provenance == CurvatureProvenance::mc_estimate && !allow_mc_curvature)
        throw std::invalid_argument("fit_eta: curvature is a Monte Carlo estimate; pass the override to use it");
    return minimize_quadratic_surrogate(k, expansion_center(data, loss, k, beta_star), penalty, config);
}

}  // namespace penex
