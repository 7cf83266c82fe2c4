#pragma once

// Loading VRP observations from CSV, radiance-to-power conversion, and the
// seeded synthetic series generator used for fixtures and demos.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "vrpcast/error.hpp"

namespace vrpcast {

using Timestamp = std::chrono::sys_seconds;

/// Observations in watts, sorted by strictly increasing timestamp, all finite.
struct TimeSeries {
    std::vector<Timestamp> timestamps;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] bool empty() const { return values.empty(); }
};

enum class LoadMode { power, radiance };

struct LoadResult {
    TimeSeries series;
    std::size_t rows_read = 0;      ///< data rows in the file (header excluded)
    std::size_t rows_dropped = 0;   ///< blank, NA, or non-finite rows
    std::size_t duplicates = 0;     ///< earlier rows replaced by a later duplicate timestamp
};

/// Conversion constant between excess MIR radiance and radiant power (m^2 sr um).
inline constexpr double kRadianceToPower = 1.89e7;

/// Radiant power in watts from hot-spot and background MIR radiances
/// (W m^-1 sr^-1 um^-1).
[[nodiscard]] inline double radiance_to_vrp(double l_mir, double l_mir_bk)
{
    if (!std::isfinite(l_mir) || !std::isfinite(l_mir_bk))
        throw std::invalid_argument("radiance_to_vrp: non-finite radiance");
    return kRadianceToPower * (l_mir - l_mir_bk);
}

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t width, int& out)
{
    if (pos + width > s.size()) return false;
    auto first = s.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + width, out);
    return ec == std::errc{} && ptr == first + width;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Parses `YYYY-MM-DD` (midnight UTC) or `YYYY-MM-DD[T ]HH:MM[:SS[.fff]]`
/// followed by an optional `Z` or `+HH:MM`/`-HH:MM` offset.
[[nodiscard]] inline std::optional<Timestamp> parse_timestamp(std::string_view text)
{
    using namespace std::chrono;
    text = detail::trim(text);
    int y = 0, mo = 0, d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    if (!detail::parse_fixed_int(text, 0, 4, y) || !detail::parse_fixed_int(text, 5, 2, mo) ||
        !detail::parse_fixed_int(text, 8, 2, d))
        return std::nullopt;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    Timestamp ts = sys_days{ymd};
    std::size_t pos = 10;
    if (pos == text.size()) return ts;

    if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
    ++pos;
    int hh = 0, mm = 0, ss = 0;
    if (!detail::parse_fixed_int(text, pos, 2, hh) || pos + 2 >= text.size() || text[pos + 2] != ':' ||
        !detail::parse_fixed_int(text, pos + 3, 2, mm))
        return std::nullopt;
    pos += 5;
    if (pos < text.size() && text[pos] == ':') {
        if (!detail::parse_fixed_int(text, pos + 1, 2, ss)) return std::nullopt;
        pos += 3;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    ts += hours{hh} + minutes{mm} + seconds{ss};
    if (pos == text.size()) return ts;
    if (text[pos] == 'Z' && pos + 1 == text.size()) return ts;
    if ((text[pos] == '+' || text[pos] == '-') && text.size() == pos + 6 && text[pos + 3] == ':') {
        int oh = 0, om = 0;
        if (!detail::parse_fixed_int(text, pos + 1, 2, oh) || !detail::parse_fixed_int(text, pos + 4, 2, om))
            return std::nullopt;
        auto offset = hours{oh} + minutes{om};
        return text[pos] == '+' ? ts - offset : ts + offset;
    }
    return std::nullopt;
}

/// ISO-8601 UTC rendering, `YYYY-MM-DDTHH:MM:SSZ`.
[[nodiscard]] inline std::string format_timestamp(Timestamp ts)
{
    using namespace std::chrono;
    auto day_point = floor<days>(ts);
    year_month_day ymd{day_point};
    hh_mm_ss tod{ts - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

/// Missing markers recognised in value columns.
inline bool is_missing_token(std::string_view field)
{
    return field.empty() || field == "NA" || field == "N/A" || field == "na" || field == "null" ||
           field == "NULL";
}

// nullopt: malformed. NaN: missing.
inline std::optional<double> parse_value(std::string_view field)
{
    if (is_missing_token(field)) return std::numeric_limits<double>::quiet_NaN();
    if (field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::infinity();
    if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
    return v;
}

}  // namespace detail

/// Reads `timestamp,vrp_watts` (power mode) or `timestamp,l_mir,l_mir_bk`
/// (radiance mode). The first line is a header and is skipped. Rows with a
/// blank, NA, or non-finite value are dropped; a row that cannot be parsed
/// raises an Error naming its line number. Output is sorted by time; for a
/// repeated timestamp the last row in file order wins.
[[nodiscard]] inline LoadResult parse_csv(std::istream& in, LoadMode mode)
{
    const std::size_t expected_fields = mode == LoadMode::power ? 2 : 3;
    std::string line;
    if (!std::getline(in, line)) throw Error("CSV input is empty (a header row is required)");
    if (detail::split_commas(line).size() != expected_fields)
        throw Error("CSV header has " + std::to_string(detail::split_commas(line).size()) +
                    " columns, expected " + std::to_string(expected_fields));

    struct Row {
        Timestamp ts;
        double value;
        std::size_t order;
    };
    std::vector<Row> rows;
    LoadResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        ++result.rows_read;
        auto fields = detail::split_commas(line);
        if (fields.size() != expected_fields)
            throw Error("malformed CSV row at line " + std::to_string(line_no) + ": expected " +
                        std::to_string(expected_fields) + " fields, got " + std::to_string(fields.size()));
        auto ts = parse_timestamp(fields[0]);
        if (!ts) throw Error("malformed timestamp at line " + std::to_string(line_no) + ": '" +
                             std::string(fields[0]) + "'");
        std::vector<double> numbers;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            auto v = detail::parse_value(fields[i]);
            if (!v) throw Error("malformed value at line " + std::to_string(line_no) + ": '" +
                                std::string(fields[i]) + "'");
            numbers.push_back(*v);
        }
        bool usable = std::all_of(numbers.begin(), numbers.end(), [](double v) { return std::isfinite(v); });
        if (!usable) {
            ++result.rows_dropped;
            continue;
        }
        double watts = mode == LoadMode::power ? numbers[0] : radiance_to_vrp(numbers[0], numbers[1]);
        rows.push_back({*ts, watts, rows.size()});
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i + 1 < rows.size() && rows[i + 1].ts == rows[i].ts) {
            ++result.duplicates;
            detail::logger()->warn("duplicate timestamp {}; keeping the later row", format_timestamp(rows[i].ts));
            continue;
        }
        result.series.timestamps.push_back(rows[i].ts);
        result.series.values.push_back(rows[i].value);
    }
    if (result.series.empty()) throw Error("CSV contains no usable rows");
    return result;
}

[[nodiscard]] inline LoadResult load_csv(const std::string& path, LoadMode mode)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    return parse_csv(in, mode);
}

inline void write_csv(std::ostream& out, const TimeSeries& series, std::string_view value_column = "vrp_watts")
{
    out << "timestamp," << value_column << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < series.size(); ++i)
        out << format_timestamp(series.timestamps[i]) << ',' << series.values[i] << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic series

enum class SyntheticKind { white_noise, random_walk, autoregressive, bursts };

NLOHMANN_JSON_SERIALIZE_ENUM(SyntheticKind, {{SyntheticKind::white_noise, "white_noise"},
                                             {SyntheticKind::random_walk, "random_walk"},
                                             {SyntheticKind::autoregressive, "ar"},
                                             {SyntheticKind::bursts, "bursts"}})

/// Generator configuration. `mean`/`scale` shape the Gaussian innovations of
/// every mode; the burst fields are used only by `bursts`, a VRP-like series
/// with a persistent random-walk level, decaying eruptive spikes, and noise.
struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::white_noise;
    std::size_t n = 500;
    double mean = 0.0;
    double scale = 1.0;
    std::vector<double> coefficients;   ///< AR coefficients for lags 1..q
    std::size_t burn_in = 500;
    std::string start = "2000-04-01";
    std::int64_t step_seconds = 86400;

    double level = 2.0e8;
    double level_step = 4.0e6;
    double burst_probability = 0.03;
    double burst_scale = 3.0e8;
    double burst_decay = 0.7;
    double noise = 2.0e7;
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s)
{
    j = nlohmann::json{{"kind", s.kind},
                       {"n", s.n},
                       {"mean", s.mean},
                       {"scale", s.scale},
                       {"coefficients", s.coefficients},
                       {"burn_in", s.burn_in},
                       {"start", s.start},
                       {"step_seconds", s.step_seconds},
                       {"level", s.level},
                       {"level_step", s.level_step},
                       {"burst_probability", s.burst_probability},
                       {"burst_scale", s.burst_scale},
                       {"burst_decay", s.burst_decay},
                       {"noise", s.noise}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s)
{
    SyntheticSpec d;
    s.kind = j.value("kind", d.kind);
    s.n = j.value("n", d.n);
    s.mean = j.value("mean", d.mean);
    s.scale = j.value("scale", d.scale);
    s.coefficients = j.value("coefficients", d.coefficients);
    s.burn_in = j.value("burn_in", d.burn_in);
    s.start = j.value("start", d.start);
    s.step_seconds = j.value("step_seconds", d.step_seconds);
    s.level = j.value("level", d.level);
    s.level_step = j.value("level_step", d.level_step);
    s.burst_probability = j.value("burst_probability", d.burst_probability);
    s.burst_scale = j.value("burst_scale", d.burst_scale);
    s.burst_decay = j.value("burst_decay", d.burst_decay);
    s.noise = j.value("noise", d.noise);
}

/// Spectral radius of the AR companion matrix; the process is stationary iff < 1.
[[nodiscard]] inline double ar_spectral_radius(const std::vector<double>& coefficients)
{
    const auto q = static_cast<Eigen::Index>(coefficients.size());
    if (q == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(q, q);
    for (Eigen::Index i = 0; i < q; ++i) companion(0, i) = coefficients[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < q; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

[[nodiscard]] inline TimeSeries generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed)
{
    detail::require(spec.n >= 1, "generate_synthetic: n must be >= 1");
    detail::require(spec.step_seconds > 0, "generate_synthetic: step_seconds must be positive");
    auto start = parse_timestamp(spec.start);
    detail::require(start.has_value(), "generate_synthetic: bad start timestamp '" + spec.start + "'");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto innovation = [&] { return spec.mean + spec.scale * gauss(rng); };

    TimeSeries out;
    out.values.reserve(spec.n);
    switch (spec.kind) {
    case SyntheticKind::white_noise:
        for (std::size_t t = 0; t < spec.n; ++t) out.values.push_back(innovation());
        break;
    case SyntheticKind::random_walk: {
        double level = 0.0;
        for (std::size_t t = 0; t < spec.n; ++t) {
            level += innovation();
            out.values.push_back(level);
        }
        break;
    }
    case SyntheticKind::autoregressive: {
        detail::require(!spec.coefficients.empty(), "generate_synthetic: AR mode needs coefficients");
        if (ar_spectral_radius(spec.coefficients) >= 1.0)
            throw std::invalid_argument("generate_synthetic: AR coefficients are not stationary "
                                        "(companion spectral radius >= 1)");
        const std::size_t q = spec.coefficients.size();
        std::vector<double> y(spec.n + spec.burn_in + q, 0.0);
        for (std::size_t t = q; t < y.size(); ++t) {
            double v = innovation();
            for (std::size_t i = 0; i < q; ++i) v += spec.coefficients[i] * y[t - 1 - i];
            y[t] = v;
        }
        out.values.assign(y.end() - static_cast<std::ptrdiff_t>(spec.n), y.end());
        break;
    }
    case SyntheticKind::bursts: {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::exponential_distribution<double> expo(1.0);
        double level = spec.level;
        double burst = 0.0;
        for (std::size_t t = 0; t < spec.n; ++t) {
            level = std::abs(level + spec.level_step * gauss(rng));
            burst *= spec.burst_decay;
            if (unit(rng) < spec.burst_probability) burst += spec.burst_scale * expo(rng);
            out.values.push_back(std::max(0.0, level + burst + spec.noise * gauss(rng)));
        }
        break;
    }
    }

    out.timestamps.reserve(spec.n);
    for (std::size_t t = 0; t < spec.n; ++t)
        out.timestamps.push_back(*start + std::chrono::seconds{spec.step_seconds * static_cast<std::int64_t>(t)});
    return out;
}

}  // namespace vrpcast
