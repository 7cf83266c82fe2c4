#pragma once

// Single-hidden-layer regression network p -> h -> 1 with tanh hidden units
// and a linear output, plus the analytic Jacobian consumed by the
// least-squares trainers.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/error.hpp"

namespace vrpcast {

struct MlpModel {
    int input_dim = 0;
    int hidden_dim = 0;
    Eigen::MatrixXd w1;  ///< hidden_dim x input_dim
    Eigen::VectorXd b1;  ///< hidden_dim
    Eigen::VectorXd w2;  ///< hidden_dim
    double b2 = 0.0;

    MlpModel() = default;
    MlpModel(int p, int h)
        : input_dim(p), hidden_dim(h), w1(Eigen::MatrixXd::Zero(h, p)), b1(Eigen::VectorXd::Zero(h)),
          w2(Eigen::VectorXd::Zero(h))
    {
        detail::require(p >= 1 && h >= 1, "MlpModel: dimensions must be >= 1");
    }

    /// N_w = h*p + h + h + 1.
    [[nodiscard]] Eigen::Index parameter_count() const
    {
        return static_cast<Eigen::Index>(hidden_dim) * input_dim + 2 * hidden_dim + 1;
    }
};

[[nodiscard]] inline Eigen::Index parameter_count(int p, int h)
{
    return static_cast<Eigen::Index>(h) * p + 2 * h + 1;
}

/// Flat parameter order: w1 row-major, b1, w2, b2.
[[nodiscard]] inline Eigen::VectorXd flatten(const MlpModel& m)
{
    Eigen::VectorXd theta(m.parameter_count());
    Eigen::Index k = 0;
    for (int j = 0; j < m.hidden_dim; ++j)
        for (int i = 0; i < m.input_dim; ++i) theta(k++) = m.w1(j, i);
    theta.segment(k, m.hidden_dim) = m.b1;
    k += m.hidden_dim;
    theta.segment(k, m.hidden_dim) = m.w2;
    k += m.hidden_dim;
    theta(k) = m.b2;
    return theta;
}

[[nodiscard]] inline MlpModel unflatten(const Eigen::VectorXd& theta, int p, int h)
{
    MlpModel m(p, h);
    if (theta.size() != m.parameter_count())
        throw std::invalid_argument("unflatten: expected " + std::to_string(m.parameter_count()) + " parameters, got " +
                                    std::to_string(theta.size()));
    Eigen::Index k = 0;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < p; ++i) m.w1(j, i) = theta(k++);
    m.b1 = theta.segment(k, h);
    k += h;
    m.w2 = theta.segment(k, h);
    k += h;
    m.b2 = theta(k);
    return m;
}

/// Glorot-uniform weights, zero biases; deterministic in `seed`.
[[nodiscard]] inline MlpModel init_mlp(int p, int h, std::uint64_t seed)
{
    MlpModel m(p, h);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> hidden(-1.0, 1.0);
    const double r1 = std::sqrt(6.0 / (p + h));
    const double r2 = std::sqrt(6.0 / (h + 1));
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < p; ++i) m.w1(j, i) = r1 * hidden(rng);
    for (int j = 0; j < h; ++j) m.w2(j) = r2 * hidden(rng);
    return m;
}

[[nodiscard]] inline double forward(const MlpModel& m, std::span<const double> input)
{
    if (input.size() != static_cast<std::size_t>(m.input_dim))
        throw std::invalid_argument("forward: expected " + std::to_string(m.input_dim) + " inputs, got " +
                                    std::to_string(input.size()));
    Eigen::Map<const Eigen::VectorXd> x(input.data(), m.input_dim);
    return m.w2.dot((m.w1 * x + m.b1).array().tanh().matrix()) + m.b2;
}

/// Outputs for every row of `inputs` (n x p).
[[nodiscard]] inline Eigen::VectorXd predict(const MlpModel& m, const Eigen::Ref<const Eigen::MatrixXd>& inputs)
{
    if (inputs.cols() != m.input_dim) throw std::invalid_argument("predict: input width does not match the model");
    Eigen::MatrixXd hidden = ((inputs * m.w1.transpose()).rowwise() + m.b1.transpose()).array().tanh();
    return (hidden * m.w2).array() + m.b2;
}

struct Linearization {
    Eigen::VectorXd residuals;  ///< target - output
    Eigen::MatrixXd jacobian;   ///< d residual_i / d theta_j, flat parameter order
};

/// Residuals and their exact Jacobian by backpropagation through the tanh
/// layer. Since residual = target - output, every column is the negated
/// output derivative; the b2 column is -1.
[[nodiscard]] inline Linearization residuals_and_jacobian(const MlpModel& m,
                                                          const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                                          const Eigen::Ref<const Eigen::VectorXd>& targets)
{
    if (inputs.rows() != targets.size()) throw std::invalid_argument("residuals_and_jacobian: row/target mismatch");
    if (inputs.cols() != m.input_dim) throw std::invalid_argument("residuals_and_jacobian: input width mismatch");
    const Eigen::Index n = inputs.rows();
    const int p = m.input_dim;
    const int h = m.hidden_dim;

    const Eigen::MatrixXd act = ((inputs * m.w1.transpose()).rowwise() + m.b1.transpose()).array().tanh();
    Linearization lin;
    lin.residuals = targets - ((act * m.w2).array() + m.b2).matrix();
    lin.jacobian.resize(n, m.parameter_count());

    // d out / d pre_j = w2_j (1 - a_j^2)
    const Eigen::MatrixXd delta = (1.0 - act.array().square()).rowwise() * m.w2.transpose().array();
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < p; ++i)
            lin.jacobian.col(static_cast<Eigen::Index>(j) * p + i) = -(delta.col(j).array() * inputs.col(i).array());
    const Eigen::Index b1_at = static_cast<Eigen::Index>(h) * p;
    lin.jacobian.middleCols(b1_at, h) = -delta;
    lin.jacobian.middleCols(b1_at + h, h) = -act;
    lin.jacobian.col(b1_at + 2 * h).setConstant(-1.0);
    return lin;
}

inline void to_json(nlohmann::json& j, const MlpModel& m)
{
    const Eigen::VectorXd theta = flatten(m);
    j = nlohmann::json{{"input_dim", m.input_dim},
                       {"hidden_dim", m.hidden_dim},
                       {"hidden_activation", "tanh"},
                       {"output_activation", "linear"},
                       {"parameters", std::vector<double>(theta.begin(), theta.end())}};
}

inline void from_json(const nlohmann::json& j, MlpModel& m)
{
    if (j.value("hidden_activation", "tanh") != "tanh" || j.value("output_activation", "linear") != "linear")
        throw Error("model JSON: only tanh hidden / linear output activations are supported");
    const int p = j.at("input_dim").get<int>();
    const int h = j.at("hidden_dim").get<int>();
    auto params = j.at("parameters").get<std::vector<double>>();
    for (double v : params)
        if (!std::isfinite(v)) throw Error("model JSON: non-finite parameter");
    m = unflatten(Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size())), p, h);
}

}  // namespace vrpcast
