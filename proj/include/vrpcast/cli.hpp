#pragma once

// Command-line front end. Every subcommand parses flags, calls one library
// entry point, prints a short summary, and writes artifacts under --out.
//
// Exit codes: 0 success, 1 usage error, 2 data or numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>

#include "vrpcast/data_ingest.hpp"
#include "vrpcast/error.hpp"
#include "vrpcast/lag_select.hpp"
#include "vrpcast/pipeline.hpp"
#include "vrpcast/series_ops.hpp"
#include "vrpcast/stat_tests.hpp"

namespace vrpcast::cli {

inline constexpr std::uint64_t kDefaultSeed = 42;

enum ExitCode : int { ok = 0, usage = 1, failure = 2 };

namespace detail {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raw flag values; unset optionals fall back to --config, then defaults.
struct Flags {
    std::optional<std::string> input;
    std::optional<std::string> mode;
    std::optional<std::string> out;
    std::optional<std::string> lag;
    std::optional<int> bins;
    std::optional<int> max_lag;
    std::optional<std::string> hidden;
    std::optional<std::string> algo;
    std::optional<double> train_fraction;
    std::optional<int> steps;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_epochs;
    std::optional<std::string> config;
    std::optional<std::string> model;
};

inline LoadMode parse_mode(const std::string& s)
{
    if (s == "power") return LoadMode::power;
    if (s == "radiance") return LoadMode::radiance;
    throw UsageError("--mode must be 'power' or 'radiance'");
}

inline void add_data_flags(CLI::App* sub, Flags& f)
{
    sub->add_option("--input", f.input, "CSV file (timestamp,vrp_watts or timestamp,l_mir,l_mir_bk)");
    sub->add_option("--mode", f.mode, "power | radiance")->check(CLI::IsMember({"power", "radiance"}));
    sub->add_option("--config", f.config, "JSON pipeline configuration; flags take precedence");
    sub->add_option("--out", f.out, "output directory for artifacts");
}

inline void add_lag_flags(CLI::App* sub, Flags& f)
{
    sub->add_option("--train-fraction", f.train_fraction, "chronological training share (default 0.8)");
    sub->add_option("--bins", f.bins, "histogram bins for entropy estimates (default 16)");
    sub->add_option("--max-lag", f.max_lag, "largest lag scanned by the entropy profile (default 12)");
}

inline void add_train_flags(CLI::App* sub, Flags& f)
{
    add_lag_flags(sub, f);
    sub->add_option("--lag", f.lag, "lag window p, or 'auto' (default 6)");
    sub->add_option("--hidden", f.hidden, "hidden units N, or grid range A:B (default 9)");
    sub->add_option("--algo", f.algo, "lm | scg | brnn (default brnn)")->check(CLI::IsMember({"lm", "scg", "brnn"}));
    sub->add_option("--seed", f.seed, "RNG seed for initialization (default 42)");
    sub->add_option("--max-epochs", f.max_epochs, "training epoch budget (default 1000)");
}

inline PipelineConfig default_config()
{
    PipelineConfig c;
    c.lag = 6;
    c.seed = kDefaultSeed;
    return c;
}

/// Defaults, overlaid by --config, overlaid by explicit flags.
inline PipelineConfig resolve_config(const Flags& f)
{
    PipelineConfig c = default_config();
    if (f.config) {
        std::ifstream in(*f.config);
        if (!in) throw UsageError("cannot open config file '" + *f.config + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            nlohmann::json merged = c;
            merged.merge_patch(j);
            c = merged.get<PipelineConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config file '" + *f.config + "': " + e.what());
        }
    }
    try {
        if (f.input) c.input_path = *f.input;
        if (f.mode) c.mode = parse_mode(*f.mode);
        if (f.out) c.out_dir = *f.out;
        if (f.lag) {
            if (*f.lag == "auto") c.lag = std::nullopt;
            else c.lag = std::stoi(*f.lag);
        }
        if (f.bins) c.lag_select.bins = *f.bins;
        if (f.max_lag) c.lag_select.max_lag = *f.max_lag;
        if (f.hidden) c.hidden = parse_hidden_range(*f.hidden);
        if (f.algo) c.train.algorithm = parse_algorithm(*f.algo);
        if (f.train_fraction) c.train_fraction = *f.train_fraction;
        if (f.steps) c.horizon = *f.steps;
        if (f.seed) c.seed = *f.seed;
        if (f.max_epochs) c.train.max_epochs = *f.max_epochs;
        c.train.seed = c.seed;
        c.train.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const std::out_of_range& e) {
        throw UsageError(std::string("value out of range: ") + e.what());
    }
    if (c.lag && *c.lag < 1) throw UsageError("--lag must be >= 1 or 'auto'");
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw UsageError("--train-fraction must be in (0, 1)");
    return c;
}

inline void require_input(const PipelineConfig& c)
{
    if (c.input_path.empty()) throw UsageError("--input is required");
}

inline std::string sci(double v) { return fmt::format("{:.4e}", v); }

inline void print_kpss(std::ostream& out, const char* label, const KpssResult& k)
{
    out << fmt::format("{:<12} KPSS = {:.4f}  lag = {}  5% critical = {:.3f}  -> {}\n", label, k.statistic,
                       k.truncation_lag, k.critical_values.at(0.05),
                       k.reject_at_5pct ? "non-stationary (reject)" : "stationary (fail to reject)");
}

inline void print_stats_row(std::ostream& out, const std::string& label, const ErrorStats& s)
{
    out << fmt::format("{:<8} ME = {:>11}  MSE = {:>11}  R2 = {}\n", label, sci(s.mean_error),
                       sci(s.mean_squared_error), s.r_squared ? fmt::format("{:.4f}", *s.r_squared) : "n/a");
}

// ---------------------------------------------------------------------------
// Subcommands

inline int run_ingest(const Flags& f, std::ostream& out)
{
    auto c = resolve_config(f);
    require_input(c);
    auto loaded = vrpcast::detail::stage("load", [&] { return load_csv(c.input_path, c.mode); });
    out << fmt::format("rows read {}, dropped {}, duplicate timestamps {}, kept {}\n", loaded.rows_read,
                       loaded.rows_dropped, loaded.duplicates, loaded.series.size());
    if (!loaded.series.empty())
        out << "span " << format_timestamp(loaded.series.timestamps.front()) << " .. "
            << format_timestamp(loaded.series.timestamps.back()) << '\n';
    if (!c.out_dir.empty()) {
        auto csv = vrpcast::detail::open_artifact(c.out_dir, "series.csv");
        write_csv(csv, loaded.series);
        vrpcast::detail::write_json(c.out_dir, "ingest.json",
                                    {{"rows_read", loaded.rows_read},
                                     {"rows_dropped", loaded.rows_dropped},
                                     {"duplicates", loaded.duplicates},
                                     {"rows_kept", loaded.series.size()}});
    }
    return ok;
}

inline int run_stationarity(const Flags& f, std::ostream& out)
{
    auto c = resolve_config(f);
    require_input(c);
    const auto series = load_input(c);
    const auto raw = kpss_level(series.values);
    const auto diff = difference(series);
    const auto res = kpss_level(diff.residuals);
    print_kpss(out, "raw", raw);
    print_kpss(out, "differenced", res);
    if (!c.out_dir.empty())
        vrpcast::detail::write_json(c.out_dir, "stationarity.json",
                                    {{"raw", raw}, {"differenced", res}, {"n", series.size()}});
    return ok;
}

inline int run_lags(const Flags& f, std::ostream& out)
{
    auto c = resolve_config(f);
    require_input(c);
    const auto series = load_input(c);
    const auto diff = difference(series);
    const auto n_train = training_prefix_length(diff.residuals.size(), c.train_fraction);
    const auto profile =
        entropy_profile(std::span<const double>(diff.residuals).first(n_train), c.lag_select);
    out << "lag  delta       pairwise\n";
    for (std::size_t i = 0; i < profile.lags.size(); ++i)
        out << fmt::format("{:>3}  {:.6f}  {:.6f}\n", profile.lags[i], profile.delta[i], profile.pairwise[i]);
    out << "selected lag " << profile.selected_lag << " (stability threshold " << fmt::format("{:.3g}", profile.threshold)
        << ")\n";
    if (!c.out_dir.empty()) {
        auto csv = vrpcast::detail::open_artifact(c.out_dir, "entropy_profile.csv");
        write_csv(csv, profile);
    }
    return ok;
}

inline void print_eval(std::ostream& out, const EvalReport& e)
{
    print_stats_row(out, "train", e.train);
    print_stats_row(out, "test", e.test);
    out << fmt::format("ACF fidelity {:.4f}\n", e.acf_fidelity);
    out << fmt::format("paired t (test)     t = {:.4f}  p = {:.4f}\n", e.paired_test.t_statistic, e.paired_test.p_value);
    out << fmt::format("two-sample t        t = {:.4f}  p = {:.4f}\n", e.two_sample.t_statistic, e.two_sample.p_value);
}

inline int run_train(const Flags& f, std::ostream& out)
{
    auto c = resolve_config(f);
    require_input(c);
    const auto series = load_input(c);
    const auto r = run_pipeline(series, c);
    print_kpss(out, "raw", r.data.raw_kpss);
    print_kpss(out, "differenced", r.data.residual_kpss);
    out << fmt::format("lag {}  hidden {}  patterns {} (train {}, test {})\n", r.data.lag, r.hidden,
                       r.data.patterns.size(), r.data.patterns.split_index, r.data.patterns.test_size());
    out << fmt::format("{}: {} epochs, stop = {}\n", to_string(r.train_report.algorithm), r.train_report.epochs_used,
                       nlohmann::json(r.train_report.stop_reason).get<std::string>());
    print_eval(out, r.eval);
    if (!r.forecast.empty()) out << "forecast " << fmt::format("{}", fmt::join(r.forecast, " ")) << '\n';
    if (!c.out_dir.empty()) {
        write_artifacts(c.out_dir, r, c);
        out << "artifacts written to " << c.out_dir << '\n';
    }
    return ok;
}

inline int run_forecast(const Flags& f, std::ostream& out)
{
    if (!f.model) throw UsageError("--model is required");
    if (!f.steps) throw UsageError("--steps is required");
    if (*f.steps < 1) throw UsageError("--steps must be >= 1");
    const auto bundle = load_model(*f.model);
    const auto path = forecast(bundle, *f.steps);
    std::ostringstream csv;
    write_forecast_csv(csv, bundle.context, path);
    out << csv.str();
    if (f.out) {
        auto file = vrpcast::detail::open_artifact(*f.out, "forecast.csv");
        file << csv.str();
    }
    return ok;
}

inline int run_evaluate(const Flags& f, std::ostream& out)
{
    if (!f.model) throw UsageError("--model is required");
    auto c = resolve_config(f);
    require_input(c);
    const auto bundle = load_model(*f.model);
    const auto series = load_input(c);
    const auto r = evaluate_bundle(bundle, series, c);
    print_eval(out, r.eval);
    if (!c.out_dir.empty()) vrpcast::detail::write_json(c.out_dir, "eval_report.json", r.eval);
    return ok;
}

inline int run_compare(const Flags& f, std::ostream& out)
{
    auto c = resolve_config(f);
    require_input(c);
    const auto series = load_input(c);
    const auto cmp = compare_algorithms(series, c);
    out << fmt::format("lag {}  hidden {}  seed {}  test patterns {}\n", cmp.lag, cmp.hidden, cmp.seed,
                       cmp.n_patterns - cmp.split_index);
    for (const auto& row : cmp.rows) {
        if (row.ok) print_stats_row(out, to_string(row.algorithm), row.test);
        else out << fmt::format("{:<8} failed: {}\n", to_string(row.algorithm), row.error);
    }
    if (!c.out_dir.empty()) write_comparison(c.out_dir, cmp);
    return ok;
}

struct SynthFlags {
    std::optional<std::string> kind;
    std::optional<std::size_t> n;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::vector<double> coefficients;
    std::optional<double> scale;
};

inline int run_synth(const SynthFlags& f, std::ostream& out)
{
    SyntheticSpec spec;
    if (f.config) {
        std::ifstream in(*f.config);
        if (!in) throw UsageError("cannot open config file '" + *f.config + "'");
        try {
            spec = nlohmann::json::parse(in).get<SyntheticSpec>();
        } catch (const nlohmann::json::exception& e) {
            throw UsageError("config file '" + *f.config + "': " + e.what());
        }
    }
    if (f.kind) spec.kind = nlohmann::json(*f.kind).get<SyntheticKind>();
    if (f.n) spec.n = *f.n;
    if (!f.coefficients.empty()) spec.coefficients = f.coefficients;
    if (f.scale) spec.scale = *f.scale;
    const auto series = generate_synthetic(spec, f.seed.value_or(kDefaultSeed));
    if (f.out) {
        std::ofstream file(*f.out);
        if (!file) throw Error("cannot write '" + *f.out + "'");
        write_csv(file, series);
    } else {
        write_csv(out, series);
    }
    return ok;
}

inline void route_logs_to(std::ostream& err)
{
    auto log = vrpcast::detail::logger();
    log->sinks().clear();
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    sink->set_pattern("[%l] %v");
    log->sinks().push_back(sink);
}

}  // namespace detail

/// Parses `argv` and runs one subcommand.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"vrpcast: volcanic radiative power forecasting with small neural networks", "vrpcast"};
    app.require_subcommand(1, 1);
    std::optional<std::string> log_level;
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off (default warn)");

    detail::Flags f;
    auto* ingest = app.add_subcommand("ingest", "load and clean a CSV series");
    detail::add_data_flags(ingest, f);

    auto* stationarity = app.add_subcommand("stationarity", "KPSS level test on raw and differenced series");
    detail::add_data_flags(stationarity, f);

    auto* lags = app.add_subcommand("lags", "entropy profile and lag selection on the training residuals");
    detail::add_data_flags(lags, f);
    detail::add_lag_flags(lags, f);

    auto* train = app.add_subcommand("train", "full pipeline: train, evaluate, write artifacts");
    detail::add_data_flags(train, f);
    detail::add_train_flags(train, f);
    train->add_option("--steps", f.steps, "multi-step forecast horizon past the series end");

    auto* fc = app.add_subcommand("forecast", "iterated multi-step forecast from a saved model");
    fc->add_option("--model", f.model, "model.json written by train")->required();
    fc->add_option("--steps", f.steps, "forecast horizon")->required();
    fc->add_option("--out", f.out, "output directory");

    auto* evaluate = app.add_subcommand("evaluate", "score a saved model on a series");
    detail::add_data_flags(evaluate, f);
    evaluate->add_option("--model", f.model, "model.json written by train")->required();
    evaluate->add_option("--train-fraction", f.train_fraction, "chronological training share (default 0.8)");

    auto* compare = app.add_subcommand("compare", "SCG vs LM vs BRNN on identical patterns and seeds");
    detail::add_data_flags(compare, f);
    detail::add_train_flags(compare, f);

    detail::SynthFlags sf;
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic series as CSV");
    synth->add_option("--kind", sf.kind, "white_noise | random_walk | ar | bursts")
        ->check(CLI::IsMember({"white_noise", "random_walk", "ar", "bursts"}));
    synth->add_option("--n", sf.n, "number of samples");
    synth->add_option("--coefficients", sf.coefficients, "AR coefficients for lags 1..q");
    synth->add_option("--scale", sf.scale, "innovation standard deviation");
    synth->add_option("--seed", sf.seed, "RNG seed (default 42)");
    synth->add_option("--config", sf.config, "JSON generator spec; flags take precedence");
    synth->add_option("--out", sf.out, "output CSV file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    detail::route_logs_to(err);
    set_log_level(spdlog::level::warn);
    if (log_level) {
        auto level = spdlog::level::from_str(*log_level);
        if (level == spdlog::level::off && *log_level != "off") {
            err << "error: unknown --log-level '" << *log_level << "'\n";
            return usage;
        }
        set_log_level(level);
    }

    try {
        if (*ingest) return detail::run_ingest(f, out);
        if (*stationarity) return detail::run_stationarity(f, out);
        if (*lags) return detail::run_lags(f, out);
        if (*train) return detail::run_train(f, out);
        if (*fc) return detail::run_forecast(f, out);
        if (*evaluate) return detail::run_evaluate(f, out);
        if (*compare) return detail::run_compare(f, out);
        if (*synth) return detail::run_synth(sf, out);
    } catch (const detail::UsageError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
    return usage;
}

}  // namespace vrpcast::cli
