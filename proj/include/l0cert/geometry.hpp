// Geometry of sparse-perturbation neighborhoods over a box domain.
//
// A radius-t ball around a center x is the set of domain points differing
// from x in at most t entries. Its convex hull equals the intersection of the
// domain with an asymmetrically scaled l1-style polytope: the set of points
// whose per-entry scaled distances from x (channel-maximum for multi-channel
// inputs) sum to at most t. This header provides exact membership tests,
// corner enumeration, and closed-form volumes for these sets.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "l0cert/common.hpp"
#include "l0cert/types.hpp"

namespace l0cert {

inline constexpr double kHullEps = 1e-9; // slack on the distance-sum test

// ----------------------------------------------------------------------------
// Scaled distance
// ----------------------------------------------------------------------------

/// Distance of y_i from the center coordinate x_i, normalized by the gap to
/// whichever domain bound lies on y_i's side: 0 at the center, 1 at a bound,
/// +inf when the relevant gap is zero and y_i moved anyway.
inline double scaled_distance(double x, double a, double b, double y) {
    if (a > x || x > b)
        throw std::invalid_argument("scaled_distance: center must satisfy a <= x <= b");
    if (y == x) return 0.0;
    const double gap = (y > x) ? (b - x) : (a - x);
    if (gap == 0.0) return kInf;
    return (y - x) / gap;
}

/// Channel-maximum scaled distance of one multi-channel entry.
inline double scaled_distance_multi(std::span<const double> x, std::span<const double> lo,
                                    std::span<const double> hi, std::span<const double> y) {
    if (x.size() != y.size() || x.size() != lo.size() || x.size() != hi.size())
        throw ShapeError("scaled_distance_multi: channel count mismatch");
    double m = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j)
        m = std::max(m, scaled_distance(x[j], lo[j], hi[j], y[j]));
    return m;
}

/// Channel-maximum scaled distance of entry i of y from the ball center.
inline double entry_scaled_distance(const Ball0Spec& spec, const BoxDomain& domain,
                                    std::span<const double> y, std::size_t entry) {
    const std::size_t off = entry * domain.channels;
    double m = 0.0;
    for (std::size_t j = 0; j < domain.channels; ++j) {
        const std::size_t f = off + j;
        m = std::max(m, scaled_distance(spec.center[f], domain.lo[f], domain.hi[f], y[f]));
    }
    return m;
}

/// Sum over the perturbable set of channel-maximum scaled distances.
inline double scaled_distance_sum(const Ball0Spec& spec, const BoxDomain& domain,
                                  std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i : spec.perturbable) s += entry_scaled_distance(spec, domain, y, i);
    return s;
}

// ----------------------------------------------------------------------------
// Membership
// ----------------------------------------------------------------------------

namespace detail {
/// True when y equals the center on every entry outside the perturbable set.
/// Comparison is exact: ball membership is a combinatorial predicate.
inline bool fixed_entries_match(const Ball0Spec& spec, const BoxDomain& domain,
                                std::span<const double> y) {
    std::size_t next = 0; // cursor into the sorted perturbable list
    for (std::size_t i = 0; i < domain.entries; ++i) {
        if (next < spec.perturbable.size() && spec.perturbable[next] == i) {
            ++next;
            continue;
        }
        for (std::size_t j = 0; j < domain.channels; ++j)
            if (y[domain.flat(i, j)] != spec.center[domain.flat(i, j)]) return false;
    }
    return true;
}
} // namespace detail

/// Exact ball membership: y in the domain, fixed outside the perturbable set,
/// and differing from the center in at most t entries (an entry differs when
/// any of its channels differs).
inline bool in_ball0(const Ball0Spec& spec, const BoxDomain& domain, std::span<const double> y) {
    if (y.size() != domain.size()) throw ShapeError("in_ball0: point size mismatch");
    if (!domain.contains(y)) return false;
    if (!detail::fixed_entries_match(spec, domain, y)) return false;
    int differing = 0;
    for (std::size_t i : spec.perturbable) {
        for (std::size_t j = 0; j < domain.channels; ++j) {
            if (y[domain.flat(i, j)] != spec.center[domain.flat(i, j)]) {
                ++differing;
                break;
            }
        }
        if (differing > spec.radius) return false;
    }
    return differing <= spec.radius;
}

/// Convex-hull membership: y in the domain, fixed outside the perturbable
/// set, and scaled-distance sum at most t (within kHullEps absolute slack so
/// corners, which meet the bound with equality, stay members under rounding).
inline bool in_hull(const Ball0Spec& spec, const BoxDomain& domain, std::span<const double> y) {
    if (y.size() != domain.size()) throw ShapeError("in_hull: point size mismatch");
    if (!domain.contains(y)) return false;
    if (!detail::fixed_entries_match(spec, domain, y)) return false;
    const double sum = scaled_distance_sum(spec, domain, y);
    if (std::isinf(sum)) return false;
    return sum <= static_cast<double>(spec.radius) + kHullEps;
}

// ----------------------------------------------------------------------------
// Corners
// ----------------------------------------------------------------------------

/// Number of corner candidates: sum over s <= t of C(|K|, s) * (2^d)^s.
inline long double corner_count(const Ball0Spec& spec, const BoxDomain& domain) {
    const std::size_t kk = spec.perturbable.size();
    const long double patterns = std::pow(2.0L, static_cast<long double>(domain.channels));
    long double total = 0.0L;
    long double pat_pow = 1.0L;
    for (int s = 0; s <= spec.radius; ++s) {
        total += binomial_ld(kk, static_cast<std::uint64_t>(s)) * pat_pow;
        if (total > 1e30L) return 1e30L;
        pat_pow *= patterns;
    }
    return total;
}

/// Visits corner candidates in a fixed deterministic order (subset size
/// ascending, subsets lexicographic, bound patterns odometer, low bound
/// first) until done or `limit` points were visited. Returns true when the
/// enumeration completed within the limit.
inline bool for_each_corner(const Ball0Spec& spec, const BoxDomain& domain, std::size_t limit,
                            const std::function<void(std::span<const double>)>& fn) {
    const std::size_t kk = spec.perturbable.size();
    const std::size_t d = domain.channels;
    std::vector<double> point(spec.center);
    std::size_t emitted = 0;

    auto emit = [&]() -> bool {
        if (emitted >= limit) return false;
        ++emitted;
        fn(point);
        return true;
    };

    if (!emit()) return false; // the empty subset: the center itself

    std::vector<std::size_t> sel; // positions into spec.perturbable
    for (int s = 1; s <= spec.radius; ++s) {
        if (static_cast<std::size_t>(s) > kk) break;
        sel.resize(s);
        for (int i = 0; i < s; ++i) sel[i] = i;
        for (;;) {
            // odometer over 2^(s*d) low/high patterns
            const std::size_t cells = static_cast<std::size_t>(s) * d;
            std::vector<unsigned char> pat(cells, 0);
            for (;;) {
                for (int i = 0; i < s; ++i) {
                    const std::size_t entry = spec.perturbable[sel[i]];
                    for (std::size_t j = 0; j < d; ++j) {
                        const std::size_t f = domain.flat(entry, j);
                        point[f] = pat[i * d + j] ? domain.hi[f] : domain.lo[f];
                    }
                }
                if (!emit()) return false;
                std::size_t c = cells;
                while (c > 0 && pat[c - 1] == 1) pat[--c] = 0;
                if (c == 0) break;
                pat[c - 1] = 1;
            }
            for (int i = 0; i < s; ++i) { // restore center values
                const std::size_t entry = spec.perturbable[sel[i]];
                for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t f = domain.flat(entry, j);
                    point[f] = spec.center[f];
                }
            }
            // next lexicographic s-subset
            int i = s - 1;
            while (i >= 0 && sel[i] == kk - static_cast<std::size_t>(s - i)) --i;
            if (i < 0) break;
            ++sel[i];
            for (int l = i + 1; l < s; ++l) sel[l] = sel[l - 1] + 1;
        }
    }
    return true;
}

/// All corner candidates of the ball: points agreeing with the center outside
/// a subset S of the perturbable set, |S| <= t, with every channel of every
/// selected entry at one of its bounds. The list is a superset of the hull's
/// extreme points and contains all of them.
inline std::vector<std::vector<double>> enumerate_corners(const Ball0Spec& spec,
                                                          const BoxDomain& domain,
                                                          std::size_t cap = 1000000) {
    if (corner_count(spec, domain) > static_cast<long double>(cap))
        throw CapExceeded("enumerate_corners: candidate count exceeds cap");
    std::vector<std::vector<double>> out;
    for_each_corner(spec, domain, cap, [&](std::span<const double> p) {
        out.emplace_back(p.begin(), p.end());
    });
    return out;
}

// ----------------------------------------------------------------------------
// Volumes (single-channel closed forms)
// ----------------------------------------------------------------------------

namespace detail {
inline double log_binomial(std::uint64_t n, std::uint64_t r) {
    return log_factorial(n) - log_factorial(r) - log_factorial(n - r);
}

/// Signed coefficient (-1)^r C(k,r) (1 - r/t)^k evaluated in log space.
inline double excess_coefficient(std::size_t k, int t, int r) {
    const double mag = std::exp(log_binomial(k, static_cast<std::uint64_t>(r)) +
                                static_cast<double>(k) *
                                    std::log1p(-static_cast<double>(r) / static_cast<double>(t)));
    return (r % 2 == 0) ? mag : -mag;
}

/// sum_{r=0}^{t-1} (-1)^r C(k,r) (1 - r/t)^k, compensated.
inline double hull_fraction_sum(std::size_t k, int t) {
    KahanSum s;
    for (int r = 0; r < t; ++r) s.add(excess_coefficient(k, t, r));
    return s.value();
}
} // namespace detail

/// Volume of the scaled l1-style polytope: vol(D) * t^k / k!. Single-channel;
/// independent of the center. Evaluated in log space to survive large k.
inline double volume_scaled_l1(const BoxDomain& domain, int t) {
    if (domain.channels != 1) throw ShapeError("volume_scaled_l1: single-channel only");
    if (t < 1) throw std::invalid_argument("volume_scaled_l1: t >= 1 required");
    const double k = static_cast<double>(domain.entries);
    return std::exp(domain.log_volume() + k * std::log(static_cast<double>(t)) -
                    log_factorial(domain.entries));
}

/// Volume of the convex hull (domain intersected with the scaled l1-style
/// polytope): vol(D) * t^k/k! * sum_{r=0}^{t-1} (-1)^r C(k,r) (1-r/t)^k,
/// which is vol(D) times the Irwin-Hall CDF at t. Single-channel.
inline double volume_hull(const BoxDomain& domain, int t) {
    if (domain.channels != 1) throw ShapeError("volume_hull: single-channel only");
    const std::size_t k = domain.entries;
    if (t < 1 || static_cast<std::size_t>(t) > k)
        throw std::invalid_argument("volume_hull: 1 <= t <= k required");
    if (static_cast<std::size_t>(t) == k) return domain.volume(); // ball covers the box
    const double frac = detail::hull_fraction_sum(k, t);
    return std::exp(domain.log_volume() + static_cast<double>(k) * std::log(static_cast<double>(t)) -
                    log_factorial(k) + std::log(frac));
}

// ----------------------------------------------------------------------------
// Volumes (multi-channel closed form)
// ----------------------------------------------------------------------------

/// Volume of the convex hull for d-channel inputs:
///   vol(D) * t^(dk) (d!)^k / (dk)! * (1 + sum_{r=1}^{t-1} c_{r,k,d,t})
/// where each c coefficient sums over the d^r tuples (m_1..m_r) in [d]^r.
/// Reduces to volume_hull for d = 1. Throws CapExceeded when d^r would
/// exceed `tuple_cap`.
inline double volume_hull_multichannel(const BoxDomain& domain, int t,
                                       std::size_t tuple_cap = 1000000) {
    const std::size_t k = domain.entries;
    const std::size_t d = domain.channels;
    if (t < 1 || static_cast<std::size_t>(t) > k)
        throw std::invalid_argument("volume_hull_multichannel: 1 <= t <= k required");
    if (static_cast<std::size_t>(t) == k) return domain.volume();

    const double dk = static_cast<double>(d) * static_cast<double>(k);
    KahanSum bracket;
    bracket.add(1.0);
    for (int r = 1; r < t; ++r) {
        long double tuples = std::pow(static_cast<long double>(d), static_cast<long double>(r));
        if (tuples > static_cast<long double>(tuple_cap))
            throw CapExceeded("volume_hull_multichannel: d^r tuple count exceeds cap");
        // odometer over (m_1..m_r) in [d]^r; each term depends on sum(m_i)
        // and the product of (d - m_i)! only
        std::vector<std::size_t> m(r, 1);
        KahanSum inner;
        for (;;) {
            std::size_t msum = 0;
            double log_prod_fact = 0.0;
            for (int i = 0; i < r; ++i) {
                msum += m[i];
                log_prod_fact += log_factorial(d - m[i]);
            }
            const double log_term =
                log_factorial(d * k) +
                dk * std::log1p(-static_cast<double>(r) / static_cast<double>(t)) +
                (static_cast<double>(msum) - static_cast<double>(d) * r) *
                    std::log(static_cast<double>(t - r)) -
                log_factorial(d * (k - static_cast<std::size_t>(r)) + msum) - log_prod_fact;
            inner.add(std::exp(log_term));
            int c = r;
            while (c > 0 && m[c - 1] == d) m[--c] = 1;
            if (c == 0) break;
            ++m[c - 1];
        }
        const double mag =
            std::exp(detail::log_binomial(k, static_cast<std::uint64_t>(r)) + std::log(inner.value()));
        bracket.add((r % 2 == 0) ? mag : -mag);
    }
    return std::exp(domain.log_volume() + dk * std::log(static_cast<double>(t)) +
                    static_cast<double>(k) * log_factorial(d) - log_factorial(d * k) +
                    std::log(bracket.value()));
}

// ----------------------------------------------------------------------------
// Excess volumes
// ----------------------------------------------------------------------------

struct ExcessVolumes {
    double excess_l1 = 0.0;  // (vol(polytope) - vol(hull)) / vol(hull)
    double excess_box = 0.0; // (vol(D) - vol(hull)) / vol(hull)
};

/// Relative excess volumes of the scaled l1-style polytope and of the domain
/// box over the hull, in closed form. Single-channel.
inline ExcessVolumes relative_excess_volumes(const BoxDomain& domain, int t) {
    if (domain.channels != 1) throw ShapeError("relative_excess_volumes: single-channel only");
    const std::size_t k = domain.entries;
    if (t < 1 || static_cast<std::size_t>(t) > k)
        throw std::invalid_argument("relative_excess_volumes: 1 <= t <= k required");
    KahanSum tail; // sum_{r=1}^{t-1} c_r
    for (int r = 1; r < t; ++r) tail.add(detail::excess_coefficient(k, t, r));
    const double denom = 1.0 + tail.value();
    const double box_ratio = std::exp(log_factorial(k) - static_cast<double>(k) *
                                                              std::log(static_cast<double>(t)));
    ExcessVolumes e;
    e.excess_l1 = -tail.value() / denom + 0.0; // +0.0 normalizes -0
    e.excess_box = (box_ratio - denom) / denom;
    return e;
}

} // namespace l0cert
