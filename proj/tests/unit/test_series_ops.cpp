#include <catch_amalgamated.hpp>

#include <random>

#include "vrpcast/series_ops.hpp"

using namespace vrpcast;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> random_series(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> d(18.0, 2.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

}  // namespace

TEST_CASE("difference and undifference are inverses")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto x = random_series(2 + seed * 37, seed);
        auto d = difference(x);
        REQUIRE(d.residuals.size() == x.size() - 1);
        auto back = undifference(d.residuals, d.anchor);
        REQUIRE(back.size() == x.size() - 1);
        // normwise: cumulative sums carry absolute error set by the largest values
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i) {
            err = std::max(err, std::abs(back[i] - x[i + 1]));
            scale = std::max(scale, std::abs(x[i + 1]));
        }
        CHECK(err <= 1e-12 * scale);
    }
}

TEST_CASE("difference rejects too-short input; undifference rejects non-finite")
{
    CHECK_THROWS_AS(difference(std::vector<double>{1.0}), Error);
    CHECK(undifference(std::vector<double>{}, 5.0).empty());
    CHECK_THROWS_AS(undifference(std::vector<double>{1.0, NAN}, 0.0), std::invalid_argument);
}

TEST_CASE("normalizer maps the fitting range onto [0, 1] and inverts")
{
    std::vector<double> v{-3.0, 2.0, 7.0};
    auto n = fit_normalizer(v);
    CHECK(n.apply(-3.0) == 0.0);
    CHECK(n.apply(7.0) == 1.0);
    CHECK(n.apply(2.0) == 0.5);
    CHECK_THAT(n.invert(n.apply(1.234)), WithinAbs(1.234, 1e-14));
    CHECK_THROWS_AS(fit_normalizer(std::vector<double>{4.0, 4.0}), Error);
    CHECK_THROWS_AS(fit_normalizer(std::vector<double>{}), Error);
}

TEST_CASE("pattern counts, split, and window contents")
{
    std::vector<double> res(30);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] = static_cast<double>(i * i % 17);
    const int p = 4;
    auto set = extract_patterns(res, p, 0.8);
    REQUIRE(set.size() == 30 - p);
    CHECK(set.split_index == std::llround(0.8 * (30 - p)));
    for (Eigen::Index i = 0; i < set.size(); ++i) {
        for (int k = 0; k < p; ++k)
            CHECK_THAT(set.norm.invert(set.inputs(i, k)), WithinAbs(res[static_cast<std::size_t>(i + k)], 1e-12));
        CHECK_THAT(set.norm.invert(set.targets(i)), WithinAbs(res[static_cast<std::size_t>(i + p)], 1e-12));
    }
}

TEST_CASE("normalization uses training values only")
{
    std::vector<double> res{0, 1, 2, 3, 4, 5, 6, 7, 8, 100};
    auto set = extract_patterns(res, 2, 0.5);
    // 8 patterns, 4 train -> training touches residuals [0, 6)
    CHECK(set.split_index == 4);
    CHECK(set.norm.min == 0.0);
    CHECK(set.norm.max == 5.0);
    CHECK(set.out_of_range_test_values > 0);
    CHECK(set.test_targets().maxCoeff() > 1.0);
    CHECK(set.train_inputs().maxCoeff() <= 1.0);
    CHECK(set.train_targets().minCoeff() >= 0.0);

    // Changing only test-region values leaves the normalizer unchanged.
    auto altered = res;
    altered[8] = -50.0;
    CHECK(extract_patterns(altered, 2, 0.5).norm.max == set.norm.max);
    CHECK(extract_patterns(altered, 2, 0.5).norm.min == set.norm.min);
}

TEST_CASE("split point rounds to nearest")
{
    CHECK(split_point(4706, 0.8) == 3765);
    CHECK(split_point(10, 0.8) == 8);
    CHECK(split_point(3, 0.5) == 2);
}

TEST_CASE("pattern set JSON round-trips")
{
    auto res = random_series(40, 2);
    auto set = extract_patterns(res, 3, 0.75);
    nlohmann::json j = set;
    auto back = j.get<PatternSet>();
    CHECK(back.lag == 3);
    CHECK(back.split_index == set.split_index);
    CHECK(back.inputs == set.inputs);
    CHECK(back.targets == set.targets);
    CHECK(back.norm.min == set.norm.min);
}

TEST_CASE("ACF of white noise is near zero, of a line-plus-trend positive")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::vector<double> w(5000);
    for (auto& x : w) x = g(rng);
    auto r = acf(w, 20);
    REQUIRE(r.size() == 21);
    CHECK(r[0] == 1.0);
    for (std::size_t k = 1; k <= 20; ++k) CHECK(std::abs(r[k]) < 4.0 / std::sqrt(5000.0));

    std::vector<double> trend(100);
    for (std::size_t i = 0; i < trend.size(); ++i) trend[i] = static_cast<double>(i);
    auto rt = acf(trend, 5);
    for (std::size_t k = 1; k <= 5; ++k) CHECK(rt[k] > 0.9 - 0.03 * static_cast<double>(k));
    CHECK_THROWS_AS(acf(std::vector<double>(10, 1.0), 3), Error);
    CHECK_THROWS_AS(acf(std::vector<double>{1, 2, 3}, 3), Error);
}

TEST_CASE("biased ACF matches a brute-force definition")
{
    auto v = random_series(64, 8);
    auto r = acf(v, 6);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= 64.0;
    auto cov = [&](std::size_t k) {
        double s = 0;
        for (std::size_t t = 0; t + k < v.size(); ++t) s += (v[t] - mean) * (v[t + k] - mean);
        return s / 64.0;
    };
    for (std::size_t k = 0; k <= 6; ++k) CHECK_THAT(r[k], WithinAbs(cov(k) / cov(0), 1e-12));
}
