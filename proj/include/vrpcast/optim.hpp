#pragma once

// Generic second-order and conjugate-gradient minimizers.
//
// levenberg_marquardt() minimizes F = beta * E_D + alpha * E_w where
// E_D = sum r_i(theta)^2 and E_w = sum theta_j^2. With alpha = 0, beta = 1 and
// no re-estimation it is the classic damped Gauss-Newton method; with
// re-estimation it is Gauss-Newton Bayesian regularization, updating alpha
// and beta from the effective number of parameters after every accepted step.
//
// scaled_conjugate_gradient() is Moller's SCG on any differentiable objective.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/error.hpp"
#include "vrpcast/mlp.hpp"

namespace vrpcast {

enum class Algorithm { lm, scg, brnn };

NLOHMANN_JSON_SERIALIZE_ENUM(Algorithm, {{Algorithm::lm, "lm"}, {Algorithm::scg, "scg"}, {Algorithm::brnn, "brnn"}})

[[nodiscard]] inline std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::lm: return "lm";
    case Algorithm::scg: return "scg";
    case Algorithm::brnn: return "brnn";
    }
    return "?";
}

[[nodiscard]] inline Algorithm parse_algorithm(const std::string& s)
{
    if (s == "lm") return Algorithm::lm;
    if (s == "scg") return Algorithm::scg;
    if (s == "brnn") return Algorithm::brnn;
    throw std::invalid_argument("unknown training algorithm '" + s + "' (expected lm, scg or brnn)");
}

struct TrainConfig {
    Algorithm algorithm = Algorithm::brnn;
    int max_epochs = 1000;
    double objective_tolerance = 1e-7;  ///< relative change of the objective
    double gradient_tolerance = 1e-6;   ///< infinity norm of the objective gradient
    double mu_init = 1e-3;
    double mu_factor = 10.0;
    double mu_max = 1e10;
    std::uint64_t seed = 42;

    void validate() const
    {
        detail::require(max_epochs >= 0, "TrainConfig: max_epochs must be >= 0");
        detail::require(objective_tolerance > 0.0 && gradient_tolerance > 0.0,
                        "TrainConfig: tolerances must be positive");
        detail::require(mu_init > 0.0 && mu_max > mu_init, "TrainConfig: need 0 < mu_init < mu_max");
        detail::require(mu_factor > 1.0, "TrainConfig: mu_factor must exceed 1");
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = nlohmann::json{{"algorithm", c.algorithm},
                       {"max_epochs", c.max_epochs},
                       {"objective_tolerance", c.objective_tolerance},
                       {"gradient_tolerance", c.gradient_tolerance},
                       {"mu_init", c.mu_init},
                       {"mu_factor", c.mu_factor},
                       {"mu_max", c.mu_max},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c)
{
    TrainConfig d;
    c.algorithm = j.value("algorithm", d.algorithm);
    c.max_epochs = j.value("max_epochs", d.max_epochs);
    c.objective_tolerance = j.value("objective_tolerance", d.objective_tolerance);
    c.gradient_tolerance = j.value("gradient_tolerance", d.gradient_tolerance);
    c.mu_init = j.value("mu_init", d.mu_init);
    c.mu_factor = j.value("mu_factor", d.mu_factor);
    c.mu_max = j.value("mu_max", d.mu_max);
    c.seed = j.value("seed", d.seed);
}

enum class StopReason { max_epochs, objective_tolerance, gradient_tolerance, goal_reached, mu_overflow, no_direction };

NLOHMANN_JSON_SERIALIZE_ENUM(StopReason, {{StopReason::max_epochs, "max_epochs"},
                                          {StopReason::objective_tolerance, "objective_tolerance"},
                                          {StopReason::gradient_tolerance, "gradient_tolerance"},
                                          {StopReason::goal_reached, "goal_reached"},
                                          {StopReason::mu_overflow, "mu_overflow"},
                                          {StopReason::no_direction, "no_direction"}})

/// One accepted LM/BRNN step. objective_before/after are both evaluated with
/// the hyperparameters the step was taken under; alpha/beta/gamma are the
/// values re-estimated afterwards.
struct EpochRecord {
    double objective_before = 0.0;
    double objective_after = 0.0;
    double mu = 0.0;
    double alpha = 0.0;
    double beta = 1.0;
    double gamma = 0.0;
};

struct TrainReport {
    Algorithm algorithm = Algorithm::lm;
    double final_objective = 0.0;
    std::vector<double> epoch_trace;  ///< [0] initial objective, then one entry per epoch
    std::vector<EpochRecord> epochs;  ///< LM and BRNN only
    bool converged = false;
    StopReason stop_reason = StopReason::max_epochs;
    int epochs_used = 0;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> gamma_effective;
    double e_d = 0.0;
    double e_w = 0.0;
    std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const TrainReport& r)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"algorithm", r.algorithm},
                       {"final_objective", r.final_objective},
                       {"epoch_trace", r.epoch_trace},
                       {"converged", r.converged},
                       {"stop_reason", r.stop_reason},
                       {"epochs_used", r.epochs_used},
                       {"alpha", opt(r.alpha)},
                       {"beta", opt(r.beta)},
                       {"gamma_effective", opt(r.gamma_effective)},
                       {"e_d", r.e_d},
                       {"e_w", r.e_w},
                       {"seed", r.seed}};
    if (!r.epochs.empty()) {
        std::vector<double> gamma, alpha, beta;
        for (const auto& e : r.epochs) {
            gamma.push_back(e.gamma);
            alpha.push_back(e.alpha);
            beta.push_back(e.beta);
        }
        if (r.algorithm == Algorithm::brnn) {
            j["gamma_trace"] = gamma;
            j["alpha_trace"] = alpha;
            j["beta_trace"] = beta;
        }
    }
}

// ---------------------------------------------------------------------------
// Problem concepts

/// Residual vector r(theta) with Jacobian dr/dtheta.
template <class P>
concept LeastSquaresProblem = requires(const P& p, const Eigen::VectorXd& theta) {
    { p.residuals(theta) } -> std::convertible_to<Eigen::VectorXd>;
    { p.linearize(theta) } -> std::same_as<Linearization>;
};

/// Scalar objective with gradient.
template <class P>
concept DifferentiableObjective = requires(const P& p, const Eigen::VectorXd& theta) {
    { p.value(theta) } -> std::convertible_to<double>;
    { p.gradient(theta) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Sum-of-squares view of a least-squares problem: value = sum r^2,
/// gradient = 2 J^T r.
template <LeastSquaresProblem P>
class SumOfSquares {
public:
    explicit SumOfSquares(const P& problem) : problem_(problem) {}
    [[nodiscard]] double value(const Eigen::VectorXd& theta) const { return problem_.residuals(theta).squaredNorm(); }
    [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const
    {
        const Linearization lin = problem_.linearize(theta);
        return 2.0 * (lin.jacobian.transpose() * lin.residuals);
    }

private:
    const P& problem_;
};

// ---------------------------------------------------------------------------
// Levenberg-Marquardt / Bayesian regularization

struct Regularization {
    bool enabled = false;     ///< include alpha * E_w and report alpha/beta/gamma
    bool reestimate = true;   ///< update alpha, beta after each accepted step
    double alpha_init = 0.0;
    double beta_init = 1.0;
};

struct MinimizeResult {
    Eigen::VectorXd theta;
    TrainReport report;
};

namespace detail {

inline bool relatively_stable(double before, double after, double tol)
{
    return std::abs(after - before) <= tol * std::max(std::abs(before), std::numeric_limits<double>::min());
}

}  // namespace detail

template <LeastSquaresProblem P>
[[nodiscard]] MinimizeResult levenberg_marquardt(const P& problem, Eigen::VectorXd theta, const TrainConfig& cfg,
                                                 const Regularization& reg = {})
{
    cfg.validate();
    constexpr double kMuFloor = 1e-20;
    const Eigen::Index n_w = theta.size();

    Linearization lin = problem.linearize(theta);
    const auto n_d = static_cast<double>(lin.residuals.size());
    double alpha = reg.enabled ? reg.alpha_init : 0.0;
    double beta = reg.enabled ? reg.beta_init : 1.0;
    detail::require(alpha >= 0.0 && beta > 0.0, "levenberg_marquardt: need alpha >= 0 and beta > 0");
    double e_d = lin.residuals.squaredNorm();
    double e_w = theta.squaredNorm();
    double objective = beta * e_d + alpha * e_w;
    if (!std::isfinite(objective)) throw Error("levenberg_marquardt: initial objective is not finite");

    MinimizeResult out;
    TrainReport& rep = out.report;
    rep.algorithm = reg.enabled ? Algorithm::brnn : Algorithm::lm;
    rep.seed = cfg.seed;
    rep.epoch_trace.push_back(objective);
    double gamma = static_cast<double>(n_w);

    double mu = cfg.mu_init;
    bool stopped = false;
    for (int epoch = 0; epoch < cfg.max_epochs && !stopped; ++epoch) {
        if (objective == 0.0) {
            rep.stop_reason = StopReason::goal_reached;
            rep.converged = true;
            break;
        }
        Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(n_w, n_w);
        jtj.selfadjointView<Eigen::Lower>().rankUpdate(lin.jacobian.transpose());
        jtj.triangularView<Eigen::StrictlyUpper>() = jtj.transpose();
        // Half gradient of F.
        const Eigen::VectorXd half_grad = beta * (lin.jacobian.transpose() * lin.residuals) + alpha * theta;
        if (2.0 * half_grad.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
            rep.stop_reason = StopReason::gradient_tolerance;
            rep.converged = true;
            break;
        }

        bool accepted = false;
        Eigen::VectorXd trial;
        Eigen::VectorXd trial_residuals;
        double trial_objective = 0.0;
        while (!accepted) {
            Eigen::MatrixXd system = beta * jtj;
            system.diagonal().array() += beta * mu + alpha;
            Eigen::LLT<Eigen::MatrixXd> llt(system);
            if (llt.info() == Eigen::Success) {
                trial = theta - llt.solve(half_grad);
                trial_residuals = problem.residuals(trial);
                trial_objective = beta * trial_residuals.squaredNorm() + alpha * trial.squaredNorm();
                accepted = std::isfinite(trial_objective) && trial_objective < objective;
            }
            if (accepted) break;
            mu *= cfg.mu_factor;
            if (mu > cfg.mu_max) {
                rep.stop_reason = StopReason::mu_overflow;
                stopped = true;
                break;
            }
        }
        if (!accepted) break;

        EpochRecord record;
        record.objective_before = objective;
        record.objective_after = trial_objective;
        record.mu = mu;
        theta = std::move(trial);
        mu = std::max(mu / cfg.mu_factor, kMuFloor);
        lin = problem.linearize(theta);
        e_d = lin.residuals.squaredNorm();
        e_w = theta.squaredNorm();

        bool hyper_stable = true;
        if (reg.enabled && reg.reestimate) {
            // gamma = N_w - 2 alpha tr(H^-1), H = 2 (beta J^T J + alpha I).
            if (alpha > 0.0) {
                Eigen::MatrixXd hessian_half = Eigen::MatrixXd::Zero(n_w, n_w);
                hessian_half.selfadjointView<Eigen::Lower>().rankUpdate(lin.jacobian.transpose(), beta);
                hessian_half.triangularView<Eigen::StrictlyUpper>() = hessian_half.transpose();
                hessian_half.diagonal().array() += alpha;
                Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian_half);
                const double trace_inv = ldlt.solve(Eigen::MatrixXd::Identity(n_w, n_w)).trace();
                gamma = static_cast<double>(n_w) - alpha * trace_inv;
            } else {
                gamma = static_cast<double>(n_w);
            }
            if (!std::isfinite(gamma)) throw Error("brnn: effective parameter count is not finite");
            gamma = std::clamp(gamma, 0.0, static_cast<double>(n_w));
            const double new_alpha = e_w > 0.0 ? gamma / (2.0 * e_w) : alpha;
            const double new_beta = e_d > 0.0 ? (n_d - std::min(gamma, n_d - 1.0)) / (2.0 * e_d) : beta;
            hyper_stable = detail::relatively_stable(alpha, new_alpha, cfg.objective_tolerance) &&
                           detail::relatively_stable(beta, new_beta, cfg.objective_tolerance);
            alpha = new_alpha;
            beta = new_beta;
        }
        record.alpha = alpha;
        record.beta = beta;
        record.gamma = gamma;
        rep.epochs.push_back(record);
        rep.epoch_trace.push_back(record.objective_after);
        ++rep.epochs_used;

        objective = beta * e_d + alpha * e_w;
        if (!std::isfinite(objective)) throw Error("levenberg_marquardt: objective became non-finite");
        if (hyper_stable &&
            detail::relatively_stable(record.objective_before, record.objective_after, cfg.objective_tolerance)) {
            rep.stop_reason = StopReason::objective_tolerance;
            rep.converged = true;
            break;
        }
    }

    rep.final_objective = objective;
    rep.e_d = e_d;
    rep.e_w = e_w;
    if (reg.enabled) {
        rep.alpha = alpha;
        rep.beta = beta;
        rep.gamma_effective = gamma;
    }
    out.theta = std::move(theta);
    return out;
}

// ---------------------------------------------------------------------------
// Scaled conjugate gradient (Moller, 1993)

struct ScgSettings {
    double sigma = 1e-4;
    double lambda_init = 1e-6;
};

template <DifferentiableObjective O>
[[nodiscard]] MinimizeResult scaled_conjugate_gradient(const O& objective, Eigen::VectorXd w, const TrainConfig& cfg,
                                                       const ScgSettings& settings = {})
{
    cfg.validate();
    const Eigen::Index n = w.size();
    MinimizeResult out;
    TrainReport& rep = out.report;
    rep.algorithm = Algorithm::scg;
    rep.seed = cfg.seed;

    double value = objective.value(w);
    if (!std::isfinite(value)) throw Error("scg: initial objective is not finite");
    Eigen::VectorXd r = -objective.gradient(w);
    Eigen::VectorXd p = r;
    double lambda = settings.lambda_init;
    double lambda_bar = 0.0;
    bool success = true;
    int since_restart = 0;
    double delta = 0.0;
    Eigen::VectorXd s;
    rep.epoch_trace.push_back(value);

    for (int k = 0; k < cfg.max_epochs; ++k) {
        if (value == 0.0) {
            rep.stop_reason = StopReason::goal_reached;
            rep.converged = true;
            break;
        }
        if (r.lpNorm<Eigen::Infinity>() < cfg.gradient_tolerance) {
            rep.stop_reason = StopReason::gradient_tolerance;
            rep.converged = true;
            break;
        }
        const double p_sq = p.squaredNorm();
        if (!(p_sq > 0.0)) {
            rep.stop_reason = StopReason::no_direction;
            break;
        }
        if (success) {
            // Second-order information along p by a finite difference of gradients.
            const double sigma_k = settings.sigma / std::sqrt(p_sq);
            s = (objective.gradient(w + sigma_k * p) + r) / sigma_k;
            delta = p.dot(s);
        }
        delta += (lambda - lambda_bar) * p_sq;
        if (delta <= 0.0) {
            // Make the local Hessian estimate positive definite.
            lambda_bar = 2.0 * (lambda - delta / p_sq);
            delta = -delta + lambda * p_sq;
            lambda = lambda_bar;
        }
        const double mu = p.dot(r);
        const double step = mu / delta;
        const Eigen::VectorXd w_new = w + step * p;
        const double value_new = objective.value(w_new);
        const double comparison = std::isfinite(value_new) ? 2.0 * delta * (value - value_new) / (mu * mu)
                                                           : -1.0;

        ++rep.epochs_used;
        bool tolerance_hit = false;
        if (comparison >= 0.0) {
            tolerance_hit = detail::relatively_stable(value, value_new, cfg.objective_tolerance);
            w = w_new;
            value = value_new;
            const Eigen::VectorXd r_new = -objective.gradient(w);
            lambda_bar = 0.0;
            success = true;
            if (++since_restart >= n) {
                p = r_new;
                since_restart = 0;
            } else {
                const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
                p = r_new + beta * p;
            }
            r = r_new;
            if (comparison >= 0.75) lambda *= 0.25;
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if (comparison < 0.25) lambda += delta * (1.0 - comparison) / p_sq;
        rep.epoch_trace.push_back(value);
        if (tolerance_hit) {
            rep.stop_reason = StopReason::objective_tolerance;
            rep.converged = true;
            break;
        }
    }
    if (rep.epochs_used >= cfg.max_epochs && !rep.converged) rep.stop_reason = StopReason::max_epochs;

    rep.final_objective = value;
    rep.e_d = value;
    rep.e_w = w.squaredNorm();
    out.theta = std::move(w);
    return out;
}

}  // namespace vrpcast
