#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/error.hpp"
#include "vrpcast/mlp.hpp"
#include "vrpcast/optim.hpp"
#include "vrpcast/series_ops.hpp"

namespace vrpcast {

/// Least-squares view of an MLP over fixed training data.
class MlpLeastSquares {
public:
    MlpLeastSquares(int input_dim, int hidden_dim, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                    const Eigen::Ref<const Eigen::VectorXd>& targets)
        : p_(input_dim), h_(hidden_dim), inputs_(inputs), targets_(targets)
    {
        if (inputs_.rows() != targets_.size()) throw std::invalid_argument("MlpLeastSquares: row/target mismatch");
        if (inputs_.cols() != p_) throw std::invalid_argument("MlpLeastSquares: input width mismatch");
        if (inputs_.rows() == 0) throw std::invalid_argument("MlpLeastSquares: no training patterns");
    }

    [[nodiscard]] Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const
    {
        return targets_ - predict(unflatten(theta, p_, h_), inputs_);
    }

    [[nodiscard]] Linearization linearize(const Eigen::VectorXd& theta) const
    {
        return residuals_and_jacobian(unflatten(theta, p_, h_), inputs_, targets_);
    }

private:
    int p_;
    int h_;
    Eigen::MatrixXd inputs_;
    Eigen::VectorXd targets_;
};

struct TrainResult {
    MlpModel model;
    TrainReport report;
};

namespace detail {

inline TrainResult finish(const MlpModel& start, MinimizeResult&& r)
{
    return {unflatten(r.theta, start.input_dim, start.hidden_dim), std::move(r.report)};
}

}  // namespace detail

/// Levenberg-Marquardt on E_D = sum of squared residuals.
[[nodiscard]] inline TrainResult train_lm(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                          const Eigen::Ref<const Eigen::VectorXd>& targets, const TrainConfig& config)
{
    MlpLeastSquares problem(model.input_dim, model.hidden_dim, inputs, targets);
    return detail::finish(model, levenberg_marquardt(problem, flatten(model), config));
}

/// Scaled conjugate gradient on E_D.
[[nodiscard]] inline TrainResult train_scg(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                           const Eigen::Ref<const Eigen::VectorXd>& targets, const TrainConfig& config,
                                           const ScgSettings& settings = {})
{
    MlpLeastSquares problem(model.input_dim, model.hidden_dim, inputs, targets);
    SumOfSquares objective(problem);
    return detail::finish(model, scaled_conjugate_gradient(objective, flatten(model), config, settings));
}

/// Bayesian-regularized training: LM steps on F = beta E_D + alpha E_w with
/// alpha, beta re-estimated from the Gauss-Newton Hessian after each accepted
/// step, starting from alpha = 0, beta = 1.
[[nodiscard]] inline TrainResult train_brnn(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                            const Eigen::Ref<const Eigen::VectorXd>& targets,
                                            const TrainConfig& config, Regularization reg = {})
{
    reg.enabled = true;
    MlpLeastSquares problem(model.input_dim, model.hidden_dim, inputs, targets);
    return detail::finish(model, levenberg_marquardt(problem, flatten(model), config, reg));
}

/// Dispatch on config.algorithm.
[[nodiscard]] inline TrainResult train(const MlpModel& model, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                       const Eigen::Ref<const Eigen::VectorXd>& targets, const TrainConfig& config)
{
    switch (config.algorithm) {
    case Algorithm::lm: return train_lm(model, inputs, targets, config);
    case Algorithm::scg: return train_scg(model, inputs, targets, config);
    case Algorithm::brnn: return train_brnn(model, inputs, targets, config);
    }
    throw std::invalid_argument("train: unknown algorithm");
}

/// Trains on the training block of a pattern set.
[[nodiscard]] inline TrainResult train(const MlpModel& model, const PatternSet& patterns, const TrainConfig& config)
{
    return train(model, patterns.train_inputs(), patterns.train_targets(), config);
}

// ---------------------------------------------------------------------------
// Hidden-layer grid search

struct GridEntry {
    int hidden = 0;
    bool ok = false;
    double objective = std::numeric_limits<double>::quiet_NaN();  ///< training MSE, normalized units
    std::string error;
    TrainReport report;
};

struct GridSearchResult {
    int best_hidden = 0;
    double best_objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<GridEntry> entries;
};

/// Relative band above the lowest objective inside which hidden sizes count
/// as tied; the smallest tied size wins. 0 gives a strict argmin.
inline constexpr double kDefaultPlateauTolerance = 0.05;

/// Trains one network per hidden size in [h_min, h_max], each from
/// init_mlp(p, h, config.seed + h), and picks the smallest size whose
/// training MSE is within `plateau_tolerance` (relative) of the lowest one,
/// i.e. where the objective has stabilized. A size whose training throws is
/// recorded and excluded. Candidates are independent, so the outcome does
/// not depend on evaluation order.
[[nodiscard]] inline GridSearchResult grid_search_hidden(const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                                         const Eigen::Ref<const Eigen::VectorXd>& targets, int h_min,
                                                         int h_max, const TrainConfig& config,
                                                         double plateau_tolerance = kDefaultPlateauTolerance)
{
    detail::require(h_min >= 1 && h_min <= h_max, "grid_search_hidden: need 1 <= h_min <= h_max");
    detail::require(plateau_tolerance >= 0.0, "grid_search_hidden: plateau_tolerance must be >= 0");
    const int p = static_cast<int>(inputs.cols());
    GridSearchResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int h = h_min; h <= h_max; ++h) {
        GridEntry entry;
        entry.hidden = h;
        try {
            auto trained = train(init_mlp(p, h, config.seed + static_cast<std::uint64_t>(h)), inputs, targets, config);
            entry.report = trained.report;
            entry.objective = (targets - predict(trained.model, inputs)).squaredNorm() /
                              static_cast<double>(targets.size());
            entry.ok = std::isfinite(entry.objective);
            if (!entry.ok) entry.error = "non-finite training objective";
        } catch (const std::exception& e) {
            entry.error = e.what();
            detail::logger()->warn("grid search: h = {} failed: {}", h, e.what());
        }
        if (entry.ok) best = std::min(best, entry.objective);
        result.entries.push_back(std::move(entry));
    }
    if (!std::isfinite(best)) throw Error("grid_search_hidden: every candidate failed to train");
    for (const auto& e : result.entries) {
        if (e.ok && e.objective <= best * (1.0 + plateau_tolerance)) {
            result.best_hidden = e.hidden;
            result.best_objective = e.objective;
            break;
        }
    }
    return result;
}

[[nodiscard]] inline GridSearchResult grid_search_hidden(const PatternSet& patterns, int h_min, int h_max,
                                                         const TrainConfig& config,
                                                         double plateau_tolerance = kDefaultPlateauTolerance)
{
    return grid_search_hidden(patterns.train_inputs(), patterns.train_targets(), h_min, h_max, config,
                              plateau_tolerance);
}

inline void to_json(nlohmann::json& j, const GridEntry& e)
{
    j = nlohmann::json{{"hidden", e.hidden},
                       {"ok", e.ok},
                       {"objective", e.ok ? nlohmann::json(e.objective) : nlohmann::json(nullptr)},
                       {"error", e.error},
                       {"epochs_used", e.report.epochs_used},
                       {"converged", e.report.converged}};
}

inline void to_json(nlohmann::json& j, const GridSearchResult& g)
{
    j = nlohmann::json{{"best_hidden", g.best_hidden}, {"best_objective", g.best_objective}, {"entries", g.entries}};
}

inline void write_csv(std::ostream& out, const GridSearchResult& g)
{
    out << "hidden,objective,ok\n";
    out.precision(17);
    for (const auto& e : g.entries) {
        out << e.hidden << ',';
        if (e.ok) out << e.objective;
        out << ',' << (e.ok ? 1 : 0) << '\n';
    }
}

}  // namespace vrpcast
