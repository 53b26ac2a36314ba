// Small numeric helpers shared across the library.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace l0cert {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Compensated (Kahan) accumulator for alternating or ill-conditioned sums.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// ln(n!) via lgamma; exact enough for volume ratios up to large n.
inline double log_factorial(std::uint64_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

/// Binomial coefficient as long double with saturation; used for cap checks
/// and small-count enumeration bounds, not for exact combinatorics.
inline long double binomial_ld(std::uint64_t n, std::uint64_t r) {
    if (r > n) return 0.0L;
    if (r > n - r) r = n - r;
    long double c = 1.0L;
    for (std::uint64_t i = 0; i < r; ++i) {
        c *= static_cast<long double>(n - i);
        c /= static_cast<long double>(i + 1);
        if (c > 1e30L) return 1e30L;
    }
    return c;
}

/// Shortest decimal form that round-trips a double (up to 17 significant digits).
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace l0cert
