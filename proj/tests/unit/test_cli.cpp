#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vrpcast/cli.hpp"

using namespace vrpcast;
using Catch::Matchers::ContainsSubstring;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "vrpcast");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Workdir {
public:
    Workdir() : path_(std::filesystem::temp_directory_path() / "vrpcast_cli_test")
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~Workdir() { std::filesystem::remove_all(path_); }
    [[nodiscard]] std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace

TEST_CASE("usage errors exit with 1")
{
    CHECK(run({}).code == cli::usage);
    CHECK(run({"bogus"}).code == cli::usage);
    auto r = run({"stationarity", "--input", "x.csv", "--frobnicate"});
    CHECK(r.code == cli::usage);
    CHECK_FALSE(r.err.empty());
    CHECK(run({"train", "--algo", "adam", "--input", "x.csv"}).code == cli::usage);
    CHECK(run({"train"}).code == cli::usage);
    CHECK(run({"train", "--input", "x.csv", "--hidden", "9:2"}).code == cli::usage);
    CHECK(run({"forecast", "--model", "m.json"}).code == cli::usage);
    CHECK(run({"--help"}).code == cli::ok);
}

TEST_CASE("data failures exit with 2")
{
    Workdir w;
    auto r = run({"stationarity", "--input", w / "missing.csv"});
    CHECK(r.code == cli::failure);
    CHECK_THAT(r.err, ContainsSubstring("cannot open"));

    std::ofstream(w / "bad.csv") << "timestamp,vrp_watts\n2000-01-01,1\n2000-01-02,oops\n";
    auto bad = run({"ingest", "--input", w / "bad.csv"});
    CHECK(bad.code == cli::failure);
    CHECK_THAT(bad.err, ContainsSubstring("line 3"));
}

TEST_CASE("synth, ingest, stationarity, and lags")
{
    Workdir w;
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "800", "--seed", "3", "--out", w / "s.csv"}).code == cli::ok);

    auto ing = run({"ingest", "--input", w / "s.csv", "--out", w / "ing"});
    CHECK(ing.code == cli::ok);
    CHECK_THAT(ing.out, ContainsSubstring("kept 800"));
    CHECK(slurp(w / "ing/series.csv") == slurp(w / "s.csv"));

    auto st = run({"stationarity", "--input", w / "s.csv", "--out", w / "st"});
    CHECK(st.code == cli::ok);
    CHECK_THAT(st.out, ContainsSubstring("raw"));
    CHECK_THAT(st.out, ContainsSubstring("differenced"));

    // thin wrapper: the artifact equals direct library calls
    const auto series = load_csv(w / "s.csv", LoadMode::power).series;
    nlohmann::json expected{{"raw", kpss_level(series.values)},
                            {"differenced", kpss_level(difference(series).residuals)},
                            {"n", series.size()}};
    CHECK(nlohmann::json::parse(slurp(w / "st/stationarity.json")) == expected);

    auto lg = run({"lags", "--input", w / "s.csv", "--out", w / "lg"});
    CHECK(lg.code == cli::ok);
    CHECK_THAT(lg.out, ContainsSubstring("selected lag"));
    CHECK(std::filesystem::exists(w / "lg/entropy_profile.csv"));
}

TEST_CASE("train, forecast, evaluate")
{
    Workdir w;
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "600", "--seed", "4", "--out", w / "s.csv"}).code == cli::ok);
    auto tr = run({"train", "--input", w / "s.csv", "--lag", "3", "--hidden", "4", "--algo", "lm", "--max-epochs",
                   "30", "--out", w / "run"});
    REQUIRE(tr.code == cli::ok);
    CHECK(std::filesystem::exists(w / "run/model.json"));
    CHECK(std::filesystem::exists(w / "run/eval_report.json"));

    auto fc = run({"forecast", "--model", w / "run/model.json", "--steps", "5", "--out", w / "fc"});
    REQUIRE(fc.code == cli::ok);
    CHECK(std::count(fc.out.begin(), fc.out.end(), '\n') == 6);
    CHECK(slurp(w / "fc/forecast.csv") == fc.out);

    // same values as the library entry point
    const auto bundle = load_model(w / "run/model.json");
    std::ostringstream expected;
    write_forecast_csv(expected, bundle.context, forecast(bundle, 5));
    CHECK(fc.out == expected.str());

    auto ev = run({"evaluate", "--model", w / "run/model.json", "--input", w / "s.csv", "--out", w / "ev"});
    REQUIRE(ev.code == cli::ok);
    CHECK(nlohmann::json::parse(slurp(w / "ev/eval_report.json")) ==
          nlohmann::json::parse(slurp(w / "run/eval_report.json")));
}

TEST_CASE("config file values are overridden by flags")
{
    Workdir w;
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "600", "--seed", "5", "--out", w / "s.csv"}).code == cli::ok);
    std::ofstream(w / "cfg.json") << R"({"lag": 2, "hidden": 3, "seed": 7, "train": {"algorithm": "scg", "max_epochs": 20}})";
    auto r = run({"train", "--config", w / "cfg.json", "--input", w / "s.csv", "--lag", "3", "--out", w / "o"});
    REQUIRE(r.code == cli::ok);
    auto model = nlohmann::json::parse(slurp(w / "o/model.json"));
    CHECK(model["network"]["input_dim"] == 3);
    CHECK(model["network"]["hidden_dim"] == 3);
    CHECK(model["provenance"]["seed"] == 7);
    CHECK(model["provenance"]["algorithm"] == "scg");

    std::ofstream(w / "broken.json") << "{not json";
    CHECK(run({"train", "--config", w / "broken.json", "--input", w / "s.csv"}).code == cli::usage);
}

TEST_CASE("seed defaults to a fixed constant")
{
    Workdir w;
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "500", "--out", w / "s.csv"}).code == cli::ok);
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "500", "--seed", "42", "--out", w / "t.csv"}).code == cli::ok);
    CHECK(slurp(w / "s.csv") == slurp(w / "t.csv"));

    REQUIRE(run({"train", "--input", w / "s.csv", "--lag", "2", "--hidden", "3", "--max-epochs", "10", "--out",
                 w / "a"}).code == cli::ok);
    CHECK(nlohmann::json::parse(slurp(w / "a/model.json"))["provenance"]["seed"] == cli::kDefaultSeed);
}

TEST_CASE("compare writes a three-row table and is reproducible")
{
    Workdir w;
    REQUIRE(run({"synth", "--kind", "bursts", "--n", "500", "--seed", "6", "--out", w / "s.csv"}).code == cli::ok);
    const std::vector<std::string> args{"compare", "--input", w / "s.csv", "--lag", "3", "--hidden", "4",
                                        "--max-epochs", "25", "--seed", "42", "--out"};
    auto a = args, b = args;
    a.push_back(w / "a");
    b.push_back(w / "b");
    auto ra = run(a);
    REQUIRE(ra.code == cli::ok);
    REQUIRE(run(b).code == cli::ok);
    CHECK(slurp(w / "a/comparison.json") == slurp(w / "b/comparison.json"));
    auto j = nlohmann::json::parse(slurp(w / "a/comparison.json"));
    CHECK(j["rows"].size() == 3);
    CHECK_THAT(ra.out, ContainsSubstring("brnn"));
}
