#pragma once

// End-to-end forecasting experiment: load -> KPSS -> difference -> KPSS ->
// lag selection -> patterns -> (grid search) -> train -> one-step forecasts
// in watts -> evaluation, plus iterated multi-step forecasting and the
// three-algorithm comparison.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/data_ingest.hpp"
#include "vrpcast/error.hpp"
#include "vrpcast/lag_select.hpp"
#include "vrpcast/mlp.hpp"
#include "vrpcast/optim.hpp"
#include "vrpcast/series_ops.hpp"
#include "vrpcast/stat_tests.hpp"
#include "vrpcast/trainers.hpp"

namespace vrpcast {

NLOHMANN_JSON_SERIALIZE_ENUM(LoadMode, {{LoadMode::power, "power"}, {LoadMode::radiance, "radiance"}})

struct HiddenRange {
    int min = 9;
    int max = 9;
    [[nodiscard]] bool is_search() const { return min != max; }
};

/// Parses "9" or "2:25".
[[nodiscard]] inline HiddenRange parse_hidden_range(const std::string& text)
{
    auto colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            const int h = std::stoi(text);
            detail::require(h >= 1, "hidden size must be >= 1");
            return {h, h};
        }
        HiddenRange r{std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
        detail::require(r.min >= 1 && r.min <= r.max, "hidden range must satisfy 1 <= a <= b");
        return r;
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("bad hidden size '" + text + "' (expected N or A:B)");
    } catch (const std::out_of_range&) {
        throw std::invalid_argument("bad hidden size '" + text + "'");
    }
}

struct PipelineConfig {
    std::string input_path;
    LoadMode mode = LoadMode::power;
    double train_fraction = 0.8;
    std::optional<int> lag;  ///< nullopt: choose from the entropy profile
    LagSelectConfig lag_select;
    HiddenRange hidden;
    double plateau_tolerance = kDefaultPlateauTolerance;
    TrainConfig train;
    int horizon = 0;  ///< multi-step forecast length past the end of the series
    std::size_t acf_lags = 20;
    std::string out_dir;
    std::uint64_t seed = 42;
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c)
{
    j = nlohmann::json{{"input", c.input_path},
                       {"mode", c.mode},
                       {"train_fraction", c.train_fraction},
                       {"lag", c.lag ? nlohmann::json(*c.lag) : nlohmann::json("auto")},
                       {"max_lag", c.lag_select.max_lag},
                       {"bins", c.lag_select.bins},
                       {"stabilization", c.lag_select.stabilization},
                       {"noise_sigmas", c.lag_select.noise_sigmas},
                       {"hidden", c.hidden.is_search()
                                      ? nlohmann::json(std::to_string(c.hidden.min) + ":" + std::to_string(c.hidden.max))
                                      : nlohmann::json(c.hidden.min)},
                       {"plateau_tolerance", c.plateau_tolerance},
                       {"train", c.train},
                       {"horizon", c.horizon},
                       {"acf_lags", c.acf_lags},
                       {"out", c.out_dir},
                       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c)
{
    PipelineConfig d;
    c.input_path = j.value("input", d.input_path);
    c.mode = j.value("mode", d.mode);
    c.train_fraction = j.value("train_fraction", d.train_fraction);
    c.lag = std::nullopt;
    if (j.contains("lag") && j["lag"].is_number_integer()) c.lag = j["lag"].get<int>();
    c.lag_select.max_lag = j.value("max_lag", d.lag_select.max_lag);
    c.lag_select.bins = j.value("bins", d.lag_select.bins);
    c.lag_select.stabilization = j.value("stabilization", d.lag_select.stabilization);
    c.lag_select.noise_sigmas = j.value("noise_sigmas", d.lag_select.noise_sigmas);
    if (j.contains("hidden")) {
        const auto& h = j["hidden"];
        c.hidden = h.is_string() ? parse_hidden_range(h.get<std::string>()) : HiddenRange{h.get<int>(), h.get<int>()};
    }
    c.plateau_tolerance = j.value("plateau_tolerance", d.plateau_tolerance);
    if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
    c.horizon = j.value("horizon", d.horizon);
    c.acf_lags = j.value("acf_lags", d.acf_lags);
    c.out_dir = j.value("out", d.out_dir);
    c.seed = j.value("seed", d.seed);
}

// ---------------------------------------------------------------------------
// Stage helpers

namespace detail {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error(std::string("stage '") + name + "': " + e.what());
    }
}

}  // namespace detail

/// Everything up to and including pattern extraction.
struct PreparedData {
    TimeSeries series;
    KpssResult raw_kpss;
    KpssResult residual_kpss;
    DifferencedSeries diff;
    std::optional<EntropyProfile> profile;
    int lag = 0;
    PatternSet patterns;
};

/// Residuals [0, n_train) seen by lag selection: the chronological training
/// share of the differenced series.
[[nodiscard]] inline std::size_t training_prefix_length(std::size_t n_residuals, double train_fraction)
{
    return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_residuals)));
}

[[nodiscard]] inline PreparedData prepare(const TimeSeries& series, const PipelineConfig& config)
{
    PreparedData d;
    d.series = series;
    d.raw_kpss = detail::stage("kpss-raw", [&] { return kpss_level(series.values); });
    if (!d.raw_kpss.reject_at_5pct)
        detail::logger()->warn("raw series is already level-stationary at 5% (KPSS {:.4g}); differencing anyway",
                               d.raw_kpss.statistic);
    d.diff = detail::stage("difference", [&] { return difference(series); });
    d.residual_kpss = detail::stage("kpss-residuals", [&] { return kpss_level(d.diff.residuals); });
    if (d.residual_kpss.reject_at_5pct)
        throw Error("stage 'kpss-residuals': differenced series is still non-stationary at 5% (KPSS statistic " +
                    std::to_string(d.residual_kpss.statistic) + "); second-order differencing is not supported");

    if (config.lag) {
        d.lag = *config.lag;
    } else {
        d.profile = detail::stage("lag-selection", [&] {
            const auto n_train = training_prefix_length(d.diff.residuals.size(), config.train_fraction);
            return entropy_profile(std::span<const double>(d.diff.residuals).first(n_train), config.lag_select);
        });
        d.lag = d.profile->selected_lag;
    }
    d.patterns =
        detail::stage("patterns", [&] { return extract_patterns(d.diff.residuals, d.lag, config.train_fraction); });
    return d;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Provenance {
    Algorithm algorithm = Algorithm::brnn;
    std::uint64_t seed = 0;
    int lag = 0;
    int hidden = 0;
    Eigen::Index n_patterns = 0;
    Eigen::Index split_index = 0;
    int epochs_used = 0;
    bool converged = false;
    StopReason stop_reason = StopReason::max_epochs;
    double final_objective = 0.0;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::optional<double> gamma_effective;
};

inline void to_json(nlohmann::json& j, const Provenance& p)
{
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j = nlohmann::json{{"algorithm", p.algorithm},       {"seed", p.seed},
                       {"lag", p.lag},                   {"hidden", p.hidden},
                       {"n_patterns", p.n_patterns},     {"split_index", p.split_index},
                       {"epochs_used", p.epochs_used},   {"converged", p.converged},
                       {"stop_reason", p.stop_reason},   {"final_objective", p.final_objective},
                       {"alpha", opt(p.alpha)},          {"beta", opt(p.beta)},
                       {"gamma_effective", opt(p.gamma_effective)}};
}

inline void from_json(const nlohmann::json& j, Provenance& p)
{
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    };
    p.algorithm = j.value("algorithm", Algorithm::brnn);
    p.seed = j.value("seed", std::uint64_t{0});
    p.lag = j.value("lag", 0);
    p.hidden = j.value("hidden", 0);
    p.n_patterns = j.value("n_patterns", Eigen::Index{0});
    p.split_index = j.value("split_index", Eigen::Index{0});
    p.epochs_used = j.value("epochs_used", 0);
    p.converged = j.value("converged", false);
    p.stop_reason = j.value("stop_reason", StopReason::max_epochs);
    p.final_objective = j.value("final_objective", 0.0);
    p.alpha = opt("alpha");
    p.beta = opt("beta");
    p.gamma_effective = opt("gamma_effective");
}

[[nodiscard]] inline Provenance make_provenance(const TrainReport& r, std::uint64_t seed, const PatternSet& patterns,
                                                int hidden)
{
    Provenance p;
    p.algorithm = r.algorithm;
    p.seed = seed;
    p.lag = patterns.lag;
    p.hidden = hidden;
    p.n_patterns = patterns.size();
    p.split_index = patterns.split_index;
    p.epochs_used = r.epochs_used;
    p.converged = r.converged;
    p.stop_reason = r.stop_reason;
    p.final_objective = r.final_objective;
    p.alpha = r.alpha;
    p.beta = r.beta;
    p.gamma_effective = r.gamma_effective;
    return p;
}

/// One-step forecasts for every pattern, in watts.
struct Predictions {
    std::vector<Timestamp> timestamps;
    std::vector<double> actual;
    std::vector<double> predicted;
    Eigen::Index split_index = 0;

    [[nodiscard]] std::span<const double> train_actual() const { return std::span(actual).first(split()); }
    [[nodiscard]] std::span<const double> train_predicted() const { return std::span(predicted).first(split()); }
    [[nodiscard]] std::span<const double> test_actual() const { return std::span(actual).subspan(split()); }
    [[nodiscard]] std::span<const double> test_predicted() const { return std::span(predicted).subspan(split()); }

private:
    [[nodiscard]] std::size_t split() const { return static_cast<std::size_t>(split_index); }
};

/// Pattern i predicts level values[i + p + 1] as the previous observed level
/// values[i + p] plus the de-normalized residual output.
[[nodiscard]] inline Predictions one_step_predictions(const MlpModel& model, const TimeSeries& series,
                                                      const PatternSet& patterns)
{
    const Eigen::VectorXd out = predict(model, patterns.inputs);
    Predictions pr;
    pr.split_index = patterns.split_index;
    const auto p = static_cast<std::size_t>(patterns.lag);
    if (series.size() != static_cast<std::size_t>(patterns.size()) + p + 1)
        throw std::invalid_argument("one_step_predictions: series and pattern set do not line up");
    for (Eigen::Index i = 0; i < patterns.size(); ++i) {
        const auto level_at = static_cast<std::size_t>(i) + p + 1;
        pr.timestamps.push_back(series.timestamps[level_at]);
        pr.actual.push_back(series.values[level_at]);
        pr.predicted.push_back(series.values[level_at - 1] + patterns.norm.invert(out(i)));
        if (!std::isfinite(pr.predicted.back())) throw Error("one-step prediction is not finite");
    }
    return pr;
}

struct EvalReport {
    ErrorStats train;
    ErrorStats test;
    std::vector<double> acf_actual;    ///< test partition, watt levels
    std::vector<double> acf_forecast;
    double acf_fidelity = 0.0;         ///< mean |acf_actual[k] - acf_forecast[k]|, k >= 1
    TTestResult paired_train;          ///< actual vs predicted, training partition
    TTestResult paired_test;           ///< actual vs predicted, test partition
    TTestResult two_sample;            ///< training vs test target residuals (watts)
    Provenance provenance;
};

inline void to_json(nlohmann::json& j, const EvalReport& r)
{
    j = nlohmann::json{{"train", r.train},
                       {"test", r.test},
                       {"acf_actual", r.acf_actual},
                       {"acf_forecast", r.acf_forecast},
                       {"acf_fidelity", r.acf_fidelity},
                       {"paired_ttest_train", r.paired_train},
                       {"paired_ttest", r.paired_test},
                       {"two_sample_ttest", r.two_sample},
                       {"provenance", r.provenance}};
}

[[nodiscard]] inline EvalReport evaluate(const Predictions& pr, const PatternSet& patterns, const Provenance& provenance,
                                         std::size_t acf_lags = 20)
{
    EvalReport r;
    r.provenance = provenance;
    r.train = error_stats(pr.train_actual(), pr.train_predicted());
    r.test = error_stats(pr.test_actual(), pr.test_predicted());
    r.acf_actual = acf(pr.test_actual(), acf_lags);
    r.acf_forecast = acf(pr.test_predicted(), acf_lags);
    double sum = 0.0;
    for (std::size_t k = 1; k <= acf_lags; ++k) sum += std::abs(r.acf_actual[k] - r.acf_forecast[k]);
    r.acf_fidelity = acf_lags > 0 ? sum / static_cast<double>(acf_lags) : 0.0;
    r.paired_train = paired_ttest(pr.train_actual(), pr.train_predicted());
    r.paired_test = paired_ttest(pr.test_actual(), pr.test_predicted());

    std::vector<double> train_targets, test_targets;
    for (Eigen::Index i = 0; i < patterns.size(); ++i)
        (i < patterns.split_index ? train_targets : test_targets).push_back(patterns.norm.invert(patterns.targets(i)));
    r.two_sample = two_sample_ttest(train_targets, test_targets);
    return r;
}

// ---------------------------------------------------------------------------
// Multi-step forecasting and persisted forecasters

/// Iterated forecast: each normalized one-step output is fed back into the
/// lag window. `last_window` holds the most recent `p` residuals in watts
/// (oldest first); the returned path is in watt levels starting from
/// `last_observed`.
[[nodiscard]] inline std::vector<double> forecast_multi_step(const MlpModel& model,
                                                             std::span<const double> last_window, int horizon,
                                                             const NormParams& norm, double last_observed)
{
    detail::require(horizon >= 1, "forecast_multi_step: horizon must be >= 1");
    if (last_window.size() != static_cast<std::size_t>(model.input_dim))
        throw std::invalid_argument("forecast_multi_step: window length must equal the model's lag");
    std::vector<double> window(last_window.size());
    for (std::size_t i = 0; i < window.size(); ++i) window[i] = norm.apply(last_window[i]);

    std::vector<double> increments;
    increments.reserve(static_cast<std::size_t>(horizon));
    for (int step = 0; step < horizon; ++step) {
        const double out = forward(model, window);
        if (!std::isfinite(out))
            throw Error("forecast_multi_step: non-finite prediction at horizon " + std::to_string(step + 1));
        increments.push_back(norm.invert(out));
        window.erase(window.begin());
        window.push_back(out);
    }
    return undifference(increments, last_observed);
}

struct ForecastContext {
    NormParams norm;
    std::vector<double> last_window;  ///< residual watts, oldest first
    double last_observed = 0.0;
    Timestamp last_timestamp{};
    std::int64_t step_seconds = 86400;
};

/// A trained forecaster as persisted to model.json.
struct ModelBundle {
    MlpModel model;
    ForecastContext context;
    Provenance provenance;
};

inline void to_json(nlohmann::json& j, const ModelBundle& b)
{
    j = nlohmann::json{{"format", "vrpcast-model/1"},
                       {"network", b.model},
                       {"provenance", b.provenance},
                       {"forecast_context",
                        {{"norm", b.context.norm},
                         {"last_window", b.context.last_window},
                         {"last_observed", b.context.last_observed},
                         {"last_timestamp", format_timestamp(b.context.last_timestamp)},
                         {"step_seconds", b.context.step_seconds}}}};
}

inline void from_json(const nlohmann::json& j, ModelBundle& b)
{
    if (j.value("format", "") != "vrpcast-model/1") throw Error("model file: unrecognised format tag");
    b.model = j.at("network").get<MlpModel>();
    b.provenance = j.value("provenance", Provenance{});
    const auto& ctx = j.at("forecast_context");
    b.context.norm = ctx.at("norm").get<NormParams>();
    b.context.last_window = ctx.at("last_window").get<std::vector<double>>();
    b.context.last_observed = ctx.at("last_observed").get<double>();
    auto ts = parse_timestamp(ctx.at("last_timestamp").get<std::string>());
    if (!ts) throw Error("model file: bad last_timestamp");
    b.context.last_timestamp = *ts;
    b.context.step_seconds = ctx.value("step_seconds", std::int64_t{86400});
    if (b.context.last_window.size() != static_cast<std::size_t>(b.model.input_dim))
        throw Error("model file: last_window length does not match input_dim");
}

[[nodiscard]] inline ModelBundle load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open model file '" + path + "'");
    try {
        return nlohmann::json::parse(in).get<ModelBundle>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("model file '" + path + "': " + e.what());
    }
}

/// Median sampling interval, used to stamp forecasts.
[[nodiscard]] inline std::int64_t typical_step_seconds(const TimeSeries& series)
{
    if (series.size() < 2) return 86400;
    std::vector<std::int64_t> steps;
    for (std::size_t i = 1; i < series.size(); ++i)
        steps.push_back((series.timestamps[i] - series.timestamps[i - 1]).count());
    std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2), steps.end());
    return steps[steps.size() / 2];
}

[[nodiscard]] inline ForecastContext make_forecast_context(const PreparedData& d)
{
    ForecastContext c;
    c.norm = d.patterns.norm;
    const auto& res = d.diff.residuals;
    c.last_window.assign(res.end() - d.lag, res.end());
    c.last_observed = d.series.values.back();
    c.last_timestamp = d.series.timestamps.back();
    c.step_seconds = typical_step_seconds(d.series);
    return c;
}

[[nodiscard]] inline std::vector<double> forecast(const ModelBundle& b, int horizon)
{
    return forecast_multi_step(b.model, b.context.last_window, horizon, b.context.norm, b.context.last_observed);
}

// ---------------------------------------------------------------------------
// Full runs

struct PipelineResult {
    PreparedData data;
    std::optional<GridSearchResult> grid;
    int hidden = 0;
    ModelBundle bundle;
    TrainReport train_report;
    Predictions predictions;
    EvalReport eval;
    std::vector<double> forecast;  ///< config.horizon steps past the end, watts
};

namespace detail {

inline int choose_hidden(const PreparedData& d, const PipelineConfig& config, std::optional<GridSearchResult>& grid)
{
    if (!config.hidden.is_search()) return config.hidden.min;
    TrainConfig grid_config = config.train;
    grid_config.algorithm = Algorithm::brnn;
    grid_config.seed = config.seed;
    grid = stage("grid-search", [&] {
        return grid_search_hidden(d.patterns, config.hidden.min, config.hidden.max, grid_config,
                                  config.plateau_tolerance);
    });
    return grid->best_hidden;
}

inline TrainConfig effective_train_config(const PipelineConfig& config, Algorithm algorithm)
{
    TrainConfig c = config.train;
    c.algorithm = algorithm;
    c.seed = config.seed;
    return c;
}

}  // namespace detail

/// Trains `algorithm` on already-prepared data with `hidden` units and
/// evaluates it.
[[nodiscard]] inline PipelineResult fit_and_evaluate(const PreparedData& data, const PipelineConfig& config,
                                                     Algorithm algorithm, int hidden)
{
    PipelineResult r;
    r.data = data;
    r.hidden = hidden;
    const TrainConfig tc = detail::effective_train_config(config, algorithm);
    auto trained = detail::stage("train", [&] {
        return train(init_mlp(data.lag, hidden, tc.seed), data.patterns, tc);
    });
    r.train_report = trained.report;
    r.bundle.model = trained.model;
    r.bundle.provenance = make_provenance(trained.report, tc.seed, data.patterns, hidden);
    r.bundle.context = make_forecast_context(data);
    r.predictions = detail::stage("predict", [&] { return one_step_predictions(r.bundle.model, data.series, data.patterns); });
    r.eval = detail::stage("evaluate", [&] {
        return evaluate(r.predictions, data.patterns, r.bundle.provenance, config.acf_lags);
    });
    if (config.horizon > 0)
        r.forecast = detail::stage("forecast", [&] { return forecast(r.bundle, config.horizon); });
    return r;
}

[[nodiscard]] inline PipelineResult run_pipeline(const TimeSeries& series, const PipelineConfig& config)
{
    PreparedData data = prepare(series, config);
    std::optional<GridSearchResult> grid;
    const int hidden = detail::choose_hidden(data, config, grid);
    PipelineResult r = fit_and_evaluate(data, config, config.train.algorithm, hidden);
    r.grid = std::move(grid);
    return r;
}

[[nodiscard]] inline TimeSeries load_input(const PipelineConfig& config)
{
    if (config.input_path.empty()) throw std::invalid_argument("no input file given");
    return detail::stage("load", [&] { return load_csv(config.input_path, config.mode).series; });
}

struct BundleEvaluation {
    PatternSet patterns;
    Predictions predictions;
    EvalReport eval;
};

/// Scores a persisted forecaster on a series, reusing its lag and the
/// normalization fitted at training time.
[[nodiscard]] inline BundleEvaluation evaluate_bundle(const ModelBundle& bundle, const TimeSeries& series,
                                                      const PipelineConfig& config)
{
    BundleEvaluation r;
    const auto diff = detail::stage("difference", [&] { return difference(series); });
    r.patterns = detail::stage("patterns", [&] {
        return extract_patterns(diff.residuals, bundle.model.input_dim, config.train_fraction, bundle.context.norm);
    });
    r.predictions = detail::stage("predict", [&] { return one_step_predictions(bundle.model, series, r.patterns); });
    Provenance prov = bundle.provenance;
    prov.n_patterns = r.patterns.size();
    prov.split_index = r.patterns.split_index;
    r.eval = detail::stage("evaluate", [&] { return evaluate(r.predictions, r.patterns, prov, config.acf_lags); });
    return r;
}

// ---------------------------------------------------------------------------
// Algorithm comparison

struct ComparisonRow {
    Algorithm algorithm = Algorithm::lm;
    bool ok = false;
    std::string error;
    ErrorStats train;
    ErrorStats test;
    double acf_fidelity = 0.0;
    Provenance provenance;
};

struct Comparison {
    int lag = 0;
    int hidden = 0;
    std::uint64_t seed = 0;
    Eigen::Index n_patterns = 0;
    Eigen::Index split_index = 0;
    std::optional<GridSearchResult> grid;
    std::vector<ComparisonRow> rows;
};

inline void to_json(nlohmann::json& j, const ComparisonRow& r)
{
    j = nlohmann::json{{"algorithm", r.algorithm}, {"ok", r.ok}, {"error", r.error}};
    if (r.ok) {
        j["train"] = r.train;
        j["test"] = r.test;
        j["acf_fidelity"] = r.acf_fidelity;
        j["provenance"] = r.provenance;
    }
}

inline void to_json(nlohmann::json& j, const Comparison& c)
{
    j = nlohmann::json{{"lag", c.lag},
                       {"hidden", c.hidden},
                       {"seed", c.seed},
                       {"n_patterns", c.n_patterns},
                       {"split_index", c.split_index},
                       {"rows", c.rows}};
    if (c.grid) j["grid_search"] = *c.grid;
}

/// Runs SCG, LM, and BRNN on identical patterns, hidden size, and initial
/// weights. A failing algorithm is recorded in its row; the others still run.
[[nodiscard]] inline Comparison compare_algorithms(const TimeSeries& series, const PipelineConfig& config)
{
    PreparedData data = prepare(series, config);
    Comparison c;
    c.hidden = detail::choose_hidden(data, config, c.grid);
    c.lag = data.lag;
    c.seed = config.seed;
    c.n_patterns = data.patterns.size();
    c.split_index = data.patterns.split_index;
    for (Algorithm a : {Algorithm::scg, Algorithm::lm, Algorithm::brnn}) {
        ComparisonRow row;
        row.algorithm = a;
        try {
            auto r = fit_and_evaluate(data, config, a, c.hidden);
            row.ok = true;
            row.train = r.eval.train;
            row.test = r.eval.test;
            row.acf_fidelity = r.eval.acf_fidelity;
            row.provenance = r.eval.provenance;
        } catch (const std::exception& e) {
            row.error = e.what();
            detail::logger()->warn("compare: {} failed: {}", to_string(a), e.what());
        }
        c.rows.push_back(std::move(row));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& dir, const std::string& name)
{
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw Error("cannot write '" + (dir / name).string() + "'");
    out.precision(17);
    return out;
}

inline void write_json(const std::filesystem::path& dir, const std::string& name, const nlohmann::json& j)
{
    open_artifact(dir, name) << j.dump(2) << '\n';
}

}  // namespace detail

inline void write_forecast_csv(std::ostream& out, const ForecastContext& ctx, std::span<const double> path)
{
    out << "step,timestamp,vrp_watts\n";
    out.precision(17);
    for (std::size_t k = 0; k < path.size(); ++k)
        out << k + 1 << ','
            << format_timestamp(ctx.last_timestamp +
                                std::chrono::seconds{ctx.step_seconds * static_cast<std::int64_t>(k + 1)})
            << ',' << path[k] << '\n';
}

inline void write_prepared_artifacts(const std::filesystem::path& dir, const PreparedData& d)
{
    {
        auto out = detail::open_artifact(dir, "series.csv");
        write_csv(out, d.series);
    }
    {
        auto out = detail::open_artifact(dir, "residuals.csv");
        out << "timestamp,residual_watts\n";
        for (std::size_t i = 0; i < d.diff.residuals.size(); ++i)
            out << format_timestamp(d.series.timestamps[i + 1]) << ',' << d.diff.residuals[i] << '\n';
    }
    detail::write_json(dir, "stationarity.json",
                       {{"raw", d.raw_kpss}, {"differenced", d.residual_kpss}, {"n", d.series.size()}});
    if (d.profile) {
        auto out = detail::open_artifact(dir, "entropy_profile.csv");
        write_csv(out, *d.profile);
    }
    detail::write_json(dir, "patterns.json", d.patterns);
}

/// Writes every artifact of a run into `dir`. Contents are a pure function
/// of the inputs and configuration.
inline void write_artifacts(const std::filesystem::path& dir, const PipelineResult& r, const PipelineConfig& config)
{
    write_prepared_artifacts(dir, r.data);
    if (r.grid) {
        auto out = detail::open_artifact(dir, "grid_search.csv");
        write_csv(out, *r.grid);
    }
    detail::write_json(dir, "config.json", config);
    detail::write_json(dir, "model.json", r.bundle);
    detail::write_json(dir, "train_report.json", r.train_report);
    detail::write_json(dir, "eval_report.json", r.eval);
    {
        auto out = detail::open_artifact(dir, "predictions.csv");
        out << "timestamp,partition,actual_watts,predicted_watts\n";
        for (std::size_t i = 0; i < r.predictions.actual.size(); ++i)
            out << format_timestamp(r.predictions.timestamps[i]) << ','
                << (static_cast<Eigen::Index>(i) < r.predictions.split_index ? "train" : "test") << ','
                << r.predictions.actual[i] << ',' << r.predictions.predicted[i] << '\n';
    }
    {
        auto out = detail::open_artifact(dir, "acf.csv");
        out << "lag,actual,forecast\n";
        for (std::size_t k = 0; k < r.eval.acf_actual.size(); ++k)
            out << k << ',' << r.eval.acf_actual[k] << ',' << r.eval.acf_forecast[k] << '\n';
    }
    if (!r.forecast.empty()) {
        auto out = detail::open_artifact(dir, "forecast.csv");
        write_forecast_csv(out, r.bundle.context, r.forecast);
    }
}

inline void write_comparison(const std::filesystem::path& dir, const Comparison& c)
{
    detail::write_json(dir, "comparison.json", c);
    auto out = detail::open_artifact(dir, "comparison.csv");
    out << "algorithm,ok,mean_error,mean_squared_error,r_squared\n";
    for (const auto& row : c.rows) {
        out << to_string(row.algorithm) << ',' << (row.ok ? 1 : 0) << ',';
        if (row.ok) {
            out << row.test.mean_error << ',' << row.test.mean_squared_error << ',';
            if (row.test.r_squared) out << *row.test.r_squared;
        } else {
            out << ",,";
        }
        out << '\n';
    }
    if (c.grid) {
        auto g = detail::open_artifact(dir, "grid_search.csv");
        write_csv(g, *c.grid);
    }
}

}  // namespace vrpcast
