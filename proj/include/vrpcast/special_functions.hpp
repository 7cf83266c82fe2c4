#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vrpcast::special {

namespace detail {

// Continued fraction for I_x(a, b), evaluated with the modified Lentz method.
// Converges quickly for x < (a + 1) / (a + b + 2).
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr int kMaxIterations = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw std::runtime_error("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b) for a, b > 0, x in [0, 1].
[[nodiscard]] inline double incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x must lie in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
[[nodiscard]] inline double student_t_two_sided_p(double t, double df)
{
    if (!(df > 0.0)) throw std::invalid_argument("student_t: degrees of freedom must be positive");
    if (std::isnan(t)) throw std::invalid_argument("student_t: t is NaN");
    if (std::isinf(t)) return 0.0;
    // Direct tail form avoids cancellation in 1 - CDF for large |t|.
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

/// Student's t cumulative distribution function.
[[nodiscard]] inline double student_t_cdf(double t, double df)
{
    const double tail = 0.5 * student_t_two_sided_p(t, df);
    return t >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace vrpcast::special
