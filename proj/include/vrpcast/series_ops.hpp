#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/data_ingest.hpp"
#include "vrpcast/error.hpp"

namespace vrpcast {

/// First differences of a series plus the first observation, so the original
/// is `anchor + cumsum(residuals)`.
struct DifferencedSeries {
    std::vector<double> residuals;
    double anchor = 0.0;
};

[[nodiscard]] inline DifferencedSeries difference(std::span<const double> values)
{
    if (values.size() < 2) throw Error("difference: series needs at least 2 values");
    DifferencedSeries out;
    out.anchor = values.front();
    out.residuals.resize(values.size() - 1);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) out.residuals[i] = values[i + 1] - values[i];
    return out;
}

[[nodiscard]] inline DifferencedSeries difference(const TimeSeries& series) { return difference(series.values); }

/// Cumulative sum of `increments` started at `last_observed`; the inverse of
/// difference() when given its residuals and anchor.
[[nodiscard]] inline std::vector<double> undifference(std::span<const double> increments, double last_observed)
{
    if (!std::isfinite(last_observed)) throw std::invalid_argument("undifference: non-finite starting value");
    std::vector<double> out;
    out.reserve(increments.size());
    double level = last_observed;
    for (double inc : increments) {
        if (!std::isfinite(inc)) throw std::invalid_argument("undifference: non-finite increment");
        level += inc;
        out.push_back(level);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Min-max normalization

struct NormParams {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double apply(double x) const { return (x - min) / (max - min); }
    [[nodiscard]] double invert(double n) const { return min + n * (max - min); }
    [[nodiscard]] double span() const { return max - min; }
};

inline void to_json(nlohmann::json& j, const NormParams& n) { j = nlohmann::json{{"min", n.min}, {"max", n.max}}; }
inline void from_json(const nlohmann::json& j, NormParams& n)
{
    j.at("min").get_to(n.min);
    j.at("max").get_to(n.max);
}

[[nodiscard]] inline NormParams fit_normalizer(std::span<const double> values)
{
    if (values.empty()) throw Error("fit_normalizer: no values");
    NormParams p{values.front(), values.front()};
    for (double v : values) {
        if (!std::isfinite(v)) throw Error("fit_normalizer: non-finite value");
        p.min = std::min(p.min, v);
        p.max = std::max(p.max, v);
    }
    if (!(p.max > p.min)) throw Error("fit_normalizer: degenerate range (all values equal)");
    return p;
}

// ---------------------------------------------------------------------------
// Lagged patterns

/// Lag windows and one-step targets, normalized with parameters fit on the
/// training block. Rows [0, split_index) are training patterns, the rest test.
struct PatternSet {
    Eigen::MatrixXd inputs;   ///< n_patterns x lag
    Eigen::VectorXd targets;  ///< n_patterns
    int lag = 0;
    NormParams norm;
    Eigen::Index split_index = 0;
    std::size_t out_of_range_test_values = 0;

    [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
    [[nodiscard]] Eigen::Index test_size() const { return size() - split_index; }
    [[nodiscard]] auto train_inputs() const { return inputs.topRows(split_index); }
    [[nodiscard]] auto train_targets() const { return targets.head(split_index); }
    [[nodiscard]] auto test_inputs() const { return inputs.bottomRows(test_size()); }
    [[nodiscard]] auto test_targets() const { return targets.tail(test_size()); }
};

/// Number of training patterns for a chronological split.
[[nodiscard]] inline Eigen::Index split_point(Eigen::Index n_patterns, double train_fraction)
{
    return static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n_patterns)));
}

namespace detail {

inline PatternSet window(std::span<const double> residuals, int lag, double train_fraction)
{
    require(lag >= 1, "extract_patterns: lag must be >= 1");
    require(train_fraction > 0.0 && train_fraction < 1.0, "extract_patterns: train_fraction must be in (0, 1)");
    if (residuals.size() <= static_cast<std::size_t>(lag) + 1)
        throw Error("extract_patterns: " + std::to_string(residuals.size()) + " residuals are too few for lag " +
                    std::to_string(lag));
    const auto n = static_cast<Eigen::Index>(residuals.size()) - lag;
    PatternSet set;
    set.lag = lag;
    set.inputs.resize(n, lag);
    set.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int k = 0; k < lag; ++k) set.inputs(i, k) = residuals[static_cast<std::size_t>(i + k)];
        set.targets(i) = residuals[static_cast<std::size_t>(i + lag)];
    }
    set.split_index = split_point(n, train_fraction);
    if (set.split_index <= 0 || set.split_index >= n)
        throw Error("extract_patterns: split leaves an empty training or test block");
    return set;
}

inline void normalize_in_place(PatternSet& set, const NormParams& norm)
{
    set.norm = norm;
    set.inputs = set.inputs.unaryExpr([&](double v) { return norm.apply(v); });
    set.targets = set.targets.unaryExpr([&](double v) { return norm.apply(v); });
    std::size_t outside = 0;
    for (Eigen::Index i = set.split_index; i < set.size(); ++i) {
        for (Eigen::Index k = 0; k < set.inputs.cols(); ++k)
            if (set.inputs(i, k) < 0.0 || set.inputs(i, k) > 1.0) ++outside;
        if (set.targets(i) < 0.0 || set.targets(i) > 1.0) ++outside;
    }
    set.out_of_range_test_values = outside;
    if (outside > 0)
        logger()->info("{} normalized test values fall outside [0, 1] (left unclamped)", outside);
}

}  // namespace detail

/// Windows `residuals` into (lag-vector, next value) patterns, splits them
/// chronologically, and min-max normalizes with parameters fit on the values
/// that appear in training patterns only.
[[nodiscard]] inline PatternSet extract_patterns(std::span<const double> residuals, int lag, double train_fraction)
{
    PatternSet set = detail::window(residuals, lag, train_fraction);
    // Training patterns touch residuals [0, split_index + lag).
    auto norm = fit_normalizer(residuals.first(static_cast<std::size_t>(set.split_index + lag)));
    detail::normalize_in_place(set, norm);
    return set;
}

/// Same windowing and split, but with externally supplied normalization
/// (e.g. the parameters stored with a trained model).
[[nodiscard]] inline PatternSet extract_patterns(std::span<const double> residuals, int lag, double train_fraction,
                                                 const NormParams& norm)
{
    detail::require(norm.max > norm.min, "extract_patterns: degenerate normalization");
    PatternSet set = detail::window(residuals, lag, train_fraction);
    detail::normalize_in_place(set, norm);
    return set;
}

inline void to_json(nlohmann::json& j, const PatternSet& s)
{
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(s.inputs.size()));
    for (Eigen::Index i = 0; i < s.inputs.rows(); ++i)
        for (Eigen::Index k = 0; k < s.inputs.cols(); ++k) flat.push_back(s.inputs(i, k));
    j = nlohmann::json{{"lag", s.lag},
                       {"norm", s.norm},
                       {"split_index", s.split_index},
                       {"n_patterns", s.size()},
                       {"inputs", flat},
                       {"targets", std::vector<double>(s.targets.begin(), s.targets.end())}};
}

inline void from_json(const nlohmann::json& j, PatternSet& s)
{
    s.lag = j.at("lag").get<int>();
    s.norm = j.at("norm").get<NormParams>();
    s.split_index = j.at("split_index").get<Eigen::Index>();
    auto n = j.at("n_patterns").get<Eigen::Index>();
    auto flat = j.at("inputs").get<std::vector<double>>();
    auto targets = j.at("targets").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != n * s.lag || static_cast<Eigen::Index>(targets.size()) != n)
        throw Error("pattern JSON: inputs/targets do not match n_patterns and lag");
    s.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), n, s.lag);
    s.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
}

// ---------------------------------------------------------------------------
// Autocorrelation

/// Biased sample autocorrelation (autocovariances divided by n) for lags
/// 0..max_lag.
[[nodiscard]] inline std::vector<double> acf(std::span<const double> values, std::size_t max_lag)
{
    const std::size_t n = values.size();
    if (n <= max_lag) throw Error("acf: series length must exceed max_lag");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : values) c0 += (v - mean) * (v - mean);
    if (!(c0 > 0.0)) throw Error("acf: zero-variance series");
    std::vector<double> out(max_lag + 1);
    out[0] = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t) ck += (values[t] - mean) * (values[t - k] - mean);
        out[k] = ck / c0;
    }
    return out;
}

}  // namespace vrpcast
