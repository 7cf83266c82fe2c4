#pragma once

// Histogram plug-in entropy estimates and the lag-window choice driven by
// the averaged pairwise relative entropy (mutual information) profile.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vrpcast/error.hpp"

namespace vrpcast {

namespace detail {

/// Equal-width bin index over [lo, hi]; the maximum lands in the last bin.
inline std::vector<int> bin_indices(std::span<const double> x, int bins, bool& degenerate)
{
    auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<int> idx(x.size(), 0);
    degenerate = !(hi > lo);
    if (degenerate) return idx;
    const double width = hi - lo;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw Error("entropy: non-finite sample");
        auto b = static_cast<int>(std::floor((x[i] - lo) / width * bins));
        idx[i] = std::clamp(b, 0, bins - 1);
    }
    return idx;
}

/// Plug-in entropy log N - (1/N) sum c log c. Counts are summed in sorted
/// order so any permutation of the cells (e.g. a transposed joint
/// histogram) gives a bit-identical result.
inline double entropy_from_counts(std::vector<std::size_t> counts, std::size_t total)
{
    std::erase(counts, std::size_t{0});
    std::sort(counts.begin(), counts.end());
    double acc = 0.0;
    for (auto c : counts) acc += static_cast<double>(c) * std::log(static_cast<double>(c));
    const auto n = static_cast<double>(total);
    return std::log(n) - acc / n;
}

inline void check_sample(std::size_t n, int bins, const char* who)
{
    require(bins >= 2, std::string(who) + ": bins must be >= 2");
    if (n < 4 * static_cast<std::size_t>(bins))
        throw Error(std::string(who) + ": need at least 4 samples per bin (" + std::to_string(n) + " samples, " +
                    std::to_string(bins) + " bins)");
}

}  // namespace detail

/// Shannon entropy in nats from an equal-width histogram spanning [min, max].
/// A constant sample has one occupied bin and returns 0.
[[nodiscard]] inline double shannon_entropy(std::span<const double> samples, int bins = 16)
{
    detail::check_sample(samples.size(), bins, "shannon_entropy");
    bool degenerate = false;
    auto idx = detail::bin_indices(samples, bins, degenerate);
    if (degenerate) {
        detail::logger()->debug("shannon_entropy: constant sample (degenerate histogram)");
        return 0.0;
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (int b : idx) ++counts[static_cast<std::size_t>(b)];
    return detail::entropy_from_counts(std::move(counts), samples.size());
}

/// delta(x, y) = H(x) + H(y) - H(x, y) with a bins x bins joint histogram and
/// edges fit to each argument separately.
[[nodiscard]] inline double relative_entropy_pair(std::span<const double> x, std::span<const double> y, int bins = 16)
{
    if (x.size() != y.size()) throw std::invalid_argument("relative_entropy_pair: length mismatch");
    detail::check_sample(x.size(), bins, "relative_entropy_pair");
    bool dx = false, dy = false;
    auto ix = detail::bin_indices(x, bins, dx);
    auto iy = detail::bin_indices(y, bins, dy);
    if (dx || dy) throw Error("relative_entropy_pair: constant marginal");

    const auto b = static_cast<std::size_t>(bins);
    std::vector<std::size_t> cx(b, 0), cy(b, 0), cxy(b * b, 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto bx = static_cast<std::size_t>(ix[i]);
        const auto by = static_cast<std::size_t>(iy[i]);
        ++cx[bx];
        ++cy[by];
        ++cxy[bx * b + by];
    }
    const double hx = detail::entropy_from_counts(std::move(cx), x.size());
    const double hy = detail::entropy_from_counts(std::move(cy), x.size());
    const double hxy = detail::entropy_from_counts(std::move(cxy), x.size());
    return hx + hy - hxy;
}

struct LagSelectConfig {
    int max_lag = 12;
    int bins = 16;
    double stabilization = 0.02;  ///< relative gain, as a fraction of max |delta|
    double noise_sigmas = 3.0;    ///< gains within this many null standard errors are not gains
};

struct EntropyProfile {
    std::vector<int> lags;           ///< 1..max_lag
    std::vector<double> delta;       ///< average of pairwise[1..p]
    std::vector<double> pairwise;    ///< delta(y[t+k], y[t]) for k = lag
    int selected_lag = 1;
    double threshold = 0.0;          ///< gain below which the profile counts as stable
};

/// Null standard error of the plug-in mutual information for independent
/// variables: 2N * MI is approximately chi-square with (B-1)^2 degrees of
/// freedom.
[[nodiscard]] inline double mutual_information_null_sd(std::size_t n, int bins)
{
    const double dof = static_cast<double>(bins - 1) * static_cast<double>(bins - 1);
    return std::sqrt(2.0 * dof) / (2.0 * static_cast<double>(n));
}

/// For p = 1..max_lag, delta[p] is the mean over k = 1..p of
/// delta(y[t+k], y[t]). The selected lag is the smallest p after which the
/// profile never rises by more than max(stabilization * max|delta|,
/// noise_sigmas * null sd): adding further lags brings no significant gain.
[[nodiscard]] inline EntropyProfile entropy_profile(std::span<const double> residuals,
                                                    const LagSelectConfig& config = {})
{
    detail::require(config.max_lag >= 1, "entropy_profile: max_lag must be >= 1");
    detail::require(config.stabilization >= 0.0 && config.noise_sigmas >= 0.0,
                    "entropy_profile: thresholds must be non-negative");
    const std::size_t n = residuals.size();
    const auto max_lag = static_cast<std::size_t>(config.max_lag);
    if (n <= max_lag + 1 || n - max_lag < 4 * static_cast<std::size_t>(config.bins))
        throw Error("entropy_profile: max_lag " + std::to_string(max_lag) + " too large for " + std::to_string(n) +
                    " samples");

    EntropyProfile profile;
    double running = 0.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        const double mi = relative_entropy_pair(residuals.subspan(k), residuals.first(n - k), config.bins);
        running += mi;
        profile.lags.push_back(static_cast<int>(k));
        profile.pairwise.push_back(mi);
        profile.delta.push_back(running / static_cast<double>(k));
    }

    double scale = 0.0;
    for (double d : profile.delta) scale = std::max(scale, std::abs(d));
    profile.threshold = std::max(config.stabilization * scale,
                                 config.noise_sigmas * mutual_information_null_sd(n - max_lag, config.bins));

    profile.selected_lag = config.max_lag;
    for (std::size_t p = 0; p < max_lag; ++p) {
        double later_peak = -std::numeric_limits<double>::infinity();
        for (std::size_t q = p + 1; q < max_lag; ++q) later_peak = std::max(later_peak, profile.delta[q]);
        if (later_peak - profile.delta[p] <= profile.threshold) {
            profile.selected_lag = static_cast<int>(p + 1);
            break;
        }
    }
    return profile;
}

inline void write_csv(std::ostream& out, const EntropyProfile& profile)
{
    out << "lag,delta,pairwise\n";
    out.precision(17);
    for (std::size_t i = 0; i < profile.lags.size(); ++i)
        out << profile.lags[i] << ',' << profile.delta[i] << ',' << profile.pairwise[i] << '\n';
}

}  // namespace vrpcast
