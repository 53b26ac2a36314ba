// Independent reference implementations used to validate the geometry and
// propagation modules: Monte Carlo volume estimation, brute-force linear
// optimization over ball corners, Frank-Wolfe distance to a finite-vertex
// hull, and constructive ball sampling.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "l0cert/common.hpp"
#include "l0cert/geometry.hpp"
#include "l0cert/parallel.hpp"
#include "l0cert/rng.hpp"
#include "l0cert/types.hpp"

namespace l0cert {

// ----------------------------------------------------------------------------
// Monte Carlo volume
// ----------------------------------------------------------------------------

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

/// Estimates the volume of {y in domain | predicate(y)} by uniform sampling
/// over the domain. The predicate must be pure. Sampling is split into
/// fixed-size chunks whose seeds derive from (seed, chunk index), so the
/// estimate is identical for any job count.
inline McEstimate mc_volume(const std::function<bool(std::span<const double>)>& predicate,
                            const BoxDomain& domain, std::uint64_t samples, std::uint64_t seed,
                            unsigned jobs = 1) {
    if (samples < 1000) throw std::invalid_argument("mc_volume: samples >= 1000 required");
    constexpr std::uint64_t kChunk = 1 << 16;
    const std::size_t chunks = static_cast<std::size_t>((samples + kChunk - 1) / kChunk);
    std::vector<std::uint64_t> hits(chunks, 0);
    const std::size_t n = domain.size();
    parallel_for_chunks(chunks, jobs, [&](std::size_t c) {
        Rng rng(derive_seed(seed, c));
        const std::uint64_t begin = static_cast<std::uint64_t>(c) * kChunk;
        const std::uint64_t count = std::min(kChunk, samples - begin);
        std::vector<double> y(n);
        std::uint64_t h = 0;
        for (std::uint64_t s = 0; s < count; ++s) {
            for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform(domain.lo[i], domain.hi[i]);
            if (predicate(y)) ++h;
        }
        hits[c] = h;
    });
    std::uint64_t total = 0;
    for (std::uint64_t h : hits) total += h;
    const double p = static_cast<double>(total) / static_cast<double>(samples);
    const double vol = domain.volume();
    McEstimate e;
    e.mean = vol * p;
    e.std_error = vol * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    e.samples = samples;
    e.seed = seed;
    return e;
}

// ----------------------------------------------------------------------------
// Brute-force linear optimization over the ball
// ----------------------------------------------------------------------------

struct LinearExtremum {
    double value = 0.0;
    std::vector<double> arg;
};

/// Exact minimum of weights . y + bias over the ball, by evaluating every
/// corner candidate. Valid because a linear function on a compact set attains
/// its extrema at extreme points of the hull, all of which are corners.
inline LinearExtremum min_linear_over_ball0(std::span<const double> weights, double bias,
                                            const Ball0Spec& spec, const BoxDomain& domain,
                                            std::size_t cap = 1000000) {
    if (weights.size() != domain.size())
        throw ShapeError("min_linear_over_ball0: weight size mismatch");
    if (corner_count(spec, domain) > static_cast<long double>(cap))
        throw CapExceeded("min_linear_over_ball0: corner count exceeds cap");
    LinearExtremum best;
    best.value = kInf;
    for_each_corner(spec, domain, cap, [&](std::span<const double> y) {
        const double v = bias + dot(weights, y);
        if (v < best.value) {
            best.value = v;
            best.arg.assign(y.begin(), y.end());
        }
    });
    return best;
}

/// Exact maximum, by negation.
inline LinearExtremum max_linear_over_ball0(std::span<const double> weights, double bias,
                                            const Ball0Spec& spec, const BoxDomain& domain,
                                            std::size_t cap = 1000000) {
    std::vector<double> neg(weights.begin(), weights.end());
    for (double& w : neg) w = -w;
    LinearExtremum r = min_linear_over_ball0(neg, -bias, spec, domain, cap);
    r.value = -r.value;
    return r;
}

// ----------------------------------------------------------------------------
// Frank-Wolfe hull distance
// ----------------------------------------------------------------------------

inline constexpr double kFwMembershipThreshold = 1e-6;

struct FwResult {
    double distance = 0.0; // ||y - z|| at the final iterate (an upper bound)
    bool converged = false;
    std::size_t iterations = 0;

    bool member() const { return distance < kFwMembershipThreshold; }
};

/// Distance from `point` to the convex hull of `vertices`, by Frank-Wolfe
/// minimization of ||y - sum_v lambda_v v||^2 over the simplex of vertex
/// weights, using pairwise steps (mass moves from the worst active vertex to
/// the best vertex) with exact line search and a plain FW fallback. The
/// vertex linear-minimization step scans the finite vertex list exactly.
/// Converged means the returned distance is within tol of the true distance
/// (certified by the duality gap); otherwise the caller should treat the
/// result as inconclusive.
inline FwResult hull_distance_fw(std::span<const double> point,
                                 const std::vector<std::vector<double>>& vertices,
                                 std::size_t max_iters = 100000, double tol = 1e-8) {
    if (vertices.empty()) throw std::invalid_argument("hull_distance_fw: no vertices");
    const std::size_t dim = point.size();
    const std::size_t nv = vertices.size();

    // flat row-major copy keeps the per-iteration vertex scan tight
    std::vector<double> flat(nv * dim);
    for (std::size_t v = 0; v < nv; ++v)
        for (std::size_t i = 0; i < dim; ++i) flat[v * dim + i] = vertices[v][i];

    std::size_t start = 0;
    double best = kInf;
    for (std::size_t v = 0; v < nv; ++v) {
        double f = 0.0;
        const double* row = &flat[v * dim];
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = row[i] - point[i];
            f += d * d;
        }
        if (f < best) {
            best = f;
            start = v;
        }
    }
    std::vector<double> lambda(nv, 0.0);
    lambda[start] = 1.0;
    std::vector<double> z(vertices[start]);
    std::vector<double> g(dim), dir(dim);

    FwResult res;
    for (std::size_t it = 0; it < max_iters; ++it) {
        res.iterations = it;
        double f = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            g[i] = z[i] - point[i]; // gradient / 2
            f += g[i] * g[i];
        }
        // toward vertex: minimize <g, v>; away vertex: maximize over support
        std::size_t s = 0, a = 0;
        double s_val = kInf, a_val = -kInf;
        for (std::size_t v = 0; v < nv; ++v) {
            const double* row = &flat[v * dim];
            double gv = 0.0;
            for (std::size_t i = 0; i < dim; ++i) gv += g[i] * row[i];
            if (gv < s_val) {
                s_val = gv;
                s = v;
            }
            if (lambda[v] > 0.0 && gv > a_val) {
                a_val = gv;
                a = v;
            }
        }
        double gz = 0.0;
        for (std::size_t i = 0; i < dim; ++i) gz += g[i] * z[i];
        const double fw_gap = 2.0 * (gz - s_val);            // certifies f - f* <= fw_gap
        const double lower = std::sqrt(std::max(0.0, f - fw_gap));
        const double upper = std::sqrt(f);
        res.distance = upper;
        if (upper - lower <= tol) {
            res.converged = true;
            return res;
        }
        // pairwise direction: shift weight from the away vertex to the
        // toward vertex
        for (std::size_t i = 0; i < dim; ++i) dir[i] = flat[s * dim + i] - flat[a * dim + i];
        double dd = 0.0, gd = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            dd += dir[i] * dir[i];
            gd += g[i] * dir[i];
        }
        if (dd == 0.0 || gd >= 0.0) {
            // degenerate pair: take a plain FW step toward s instead
            for (std::size_t i = 0; i < dim; ++i) dir[i] = flat[s * dim + i] - z[i];
            dd = gd = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                dd += dir[i] * dir[i];
                gd += g[i] * dir[i];
            }
            if (dd == 0.0) {
                res.converged = upper - lower <= tol;
                return res;
            }
            const double gamma = std::clamp(-gd / dd, 0.0, 1.0);
            if (gamma == 0.0) {
                res.converged = false;
                return res;
            }
            for (double& l : lambda) l *= 1.0 - gamma;
            lambda[s] += gamma;
            for (std::size_t i = 0; i < dim; ++i) z[i] += gamma * dir[i];
        } else {
            const double gamma = std::clamp(-gd / dd, 0.0, lambda[a]);
            if (gamma == 0.0) {
                res.converged = false;
                return res;
            }
            lambda[a] = std::max(0.0, lambda[a] - gamma);
            lambda[s] += gamma;
            for (std::size_t i = 0; i < dim; ++i) z[i] += gamma * dir[i];
        }
        // periodically rebuild z from the weights to cancel drift
        if ((it & 0xff) == 0xff) {
            double wsum = 0.0;
            for (double l : lambda) wsum += l;
            for (double& l : lambda) l /= wsum;
            std::fill(z.begin(), z.end(), 0.0);
            for (std::size_t v = 0; v < nv; ++v) {
                if (lambda[v] == 0.0) continue;
                for (std::size_t i = 0; i < dim; ++i) z[i] += lambda[v] * flat[v * dim + i];
            }
        }
    }
    double f = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = z[i] - point[i];
        f += d * d;
    }
    res.distance = std::sqrt(f);
    res.converged = false;
    return res;
}

// ----------------------------------------------------------------------------
// Ball sampling
// ----------------------------------------------------------------------------

/// Random ball member: subset size uniform on {0..t}, subset uniform over the
/// perturbable set, selected entries uniform in their boxes (all channels),
/// all other entries equal to the center. Constructively satisfies in_ball0.
inline std::vector<double> sample_in_ball0(const Ball0Spec& spec, const BoxDomain& domain,
                                           Rng& rng) {
    std::vector<double> y(spec.center);
    const std::size_t size = static_cast<std::size_t>(
        rng.bounded(static_cast<std::uint64_t>(spec.radius) + 1));
    const auto positions = rng.subset(spec.perturbable.size(), size);
    for (std::size_t p : positions) {
        const std::size_t entry = spec.perturbable[p];
        for (std::size_t j = 0; j < domain.channels; ++j) {
            const std::size_t f = domain.flat(entry, j);
            y[f] = rng.uniform(domain.lo[f], domain.hi[f]);
        }
    }
    return y;
}

inline std::vector<double> sample_in_ball0(const Ball0Spec& spec, const BoxDomain& domain,
                                           std::uint64_t seed) {
    Rng rng(seed);
    return sample_in_ball0(spec, domain, rng);
}

} // namespace l0cert
