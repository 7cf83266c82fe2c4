#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "vrpcast/data_ingest.hpp"
#include "vrpcast/lag_select.hpp"

using namespace vrpcast;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> uniforms(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::vector<double> ar6(std::size_t n, std::uint64_t seed)
{
    SyntheticSpec spec;
    spec.kind = SyntheticKind::autoregressive;
    spec.coefficients = {0.1, 0.05, 0.05, 0.05, 0.05, 0.5};
    spec.n = n;
    return generate_synthetic(spec, seed).values;
}

}  // namespace

TEST_CASE("entropy of an equal-occupancy histogram is log(bins)")
{
    std::vector<double> v;
    for (int rep = 0; rep < 10; ++rep)
        for (int b = 0; b < 16; ++b) v.push_back(b);
    CHECK_THAT(shannon_entropy(v, 16), WithinAbs(std::log(16.0), 1e-12));
}

TEST_CASE("entropy of a constant sample is zero")
{
    CHECK(shannon_entropy(std::vector<double>(100, 3.0), 16) == 0.0);
}

TEST_CASE("entropy is bounded by log(bins) and invariant to affine maps")
{
    auto x = uniforms(2000, 1);
    const double h = shannon_entropy(x, 16);
    CHECK(h <= std::log(16.0) + 1e-12);
    CHECK(h > 0.0);
    auto y = x;
    for (auto& v : y) v = 4.0 * v - 7.0;
    CHECK_THAT(shannon_entropy(y, 16), WithinAbs(h, 1e-12));
}

TEST_CASE("relative entropy identities")
{
    auto x = uniforms(3000, 2);
    auto y = uniforms(3000, 3);
    CHECK(relative_entropy_pair(x, x, 16) == shannon_entropy(x, 16));
    CHECK(relative_entropy_pair(x, y, 16) == relative_entropy_pair(y, x, 16));
    CHECK(relative_entropy_pair(x, y, 16) >= 0.0);
}

TEST_CASE("relative entropy of independent uniforms is small")
{
    auto x = uniforms(10000, 5);
    auto y = uniforms(10000, 6);
    CHECK(relative_entropy_pair(x, y, 16) < 0.05);
}

TEST_CASE("estimator preconditions")
{
    CHECK_THROWS_AS(shannon_entropy(uniforms(63, 1), 16), Error);
    CHECK_NOTHROW(shannon_entropy(uniforms(64, 1), 16));
    CHECK_THROWS_AS(shannon_entropy(uniforms(100, 1), 1), std::invalid_argument);
    CHECK_THROWS_AS(relative_entropy_pair(uniforms(100, 1), uniforms(99, 2)), std::invalid_argument);
    CHECK_THROWS_AS(relative_entropy_pair(uniforms(100, 1), std::vector<double>(100, 1.0)), Error);
}

TEST_CASE("profile is the running mean of lagged pairwise values")
{
    auto y = ar6(1500, 4);
    LagSelectConfig cfg;
    cfg.max_lag = 8;
    auto prof = entropy_profile(y, cfg);
    REQUIRE(prof.lags.size() == 8);
    const std::span<const double> s(y);
    double running = 0.0;
    for (std::size_t k = 1; k <= 8; ++k) {
        const double brute = relative_entropy_pair(s.subspan(k), s.first(y.size() - k), cfg.bins);
        CHECK(prof.pairwise[k - 1] == brute);
        running += brute;
        CHECK_THAT(prof.delta[k - 1], WithinAbs(running / static_cast<double>(k), 1e-15));
        CHECK(prof.lags[k - 1] == static_cast<int>(k));
    }
    CHECK(prof.selected_lag >= 1);
    CHECK(prof.selected_lag <= 8);
}

TEST_CASE("white noise needs no lag beyond 1")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        std::vector<double> w(3000);
        for (auto& v : w) v = g(rng);
        CHECK(entropy_profile(w).selected_lag == 1);
    }
}

TEST_CASE("AR(6) dependence is picked up near lag 6")
{
    auto prof = entropy_profile(ar6(5000, 1));
    CHECK(prof.selected_lag >= 5);
    CHECK(prof.selected_lag <= 8);
    // the lag-6 coefficient dominates the pairwise profile
    auto peak = std::max_element(prof.pairwise.begin(), prof.pairwise.end()) - prof.pairwise.begin();
    CHECK(peak == 5);
}

TEST_CASE("selection rule: smallest p with no later significant gain")
{
    auto y = ar6(2000, 3);
    LagSelectConfig cfg;
    auto prof = entropy_profile(y, cfg);
    const auto p = static_cast<std::size_t>(prof.selected_lag);
    for (std::size_t q = p; q < prof.delta.size(); ++q)
        CHECK(prof.delta[q] - prof.delta[p - 1] <= prof.threshold);
    if (p > 1) {
        double later = *std::max_element(prof.delta.begin() + static_cast<std::ptrdiff_t>(p - 1), prof.delta.end());
        CHECK(later - prof.delta[p - 2] > prof.threshold);
    }
}

TEST_CASE("profile CSV and size errors")
{
    auto prof = entropy_profile(ar6(800, 2));
    std::ostringstream out;
    write_csv(out, prof);
    CHECK(out.str().rfind("lag,delta,pairwise\n", 0) == 0);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 13);

    LagSelectConfig big;
    big.max_lag = 60;
    CHECK_THROWS_AS(entropy_profile(ar6(100, 2), big), Error);
}
