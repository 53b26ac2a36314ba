// Backward linear bound propagation with three input-layer concretizations.
//
// Every affine neuron is bounded by a pair of affine expressions over the
// network inputs, obtained by composing layers backward and replacing each
// crossing ReLU with its linear relaxation. The expressions are then
// concretized over one of three input sets built around a center x in a box
// domain D with perturbable entry set K and radius t:
//
//   box:         the sub-box where the K entries range over their full
//                intervals (sum of all entry contributions),
//   top-t:       the radius-t ball / its convex hull (sum of the t extreme
//                entry contributions) — exact for a linear function,
//   t-times-top: the scaled l1-style polytope (t times the single extreme
//                entry contribution).
//
// Concretization happens only at the input layer after full back
// substitution, never at intermediate layers.
#pragma once

#include <algorithm>
#include <cassert>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "l0cert/common.hpp"
#include "l0cert/network.hpp"
#include "l0cert/types.hpp"

namespace l0cert {

/// Linear function over a reference layer's neurons plus a constant.
struct AffineExpr {
    std::vector<double> coeffs;
    double bias = 0.0;
};

/// Tightest lower/upper value of w_i (y_i - x_i) over entry i's intervals,
/// summed over channels for multi-channel inputs.
struct Contribution {
    double d_minus = 0.0; // <= 0
    double d_plus = 0.0;  // >= 0
};

enum class Strategy { box, top_t, t_times_top };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::box: return "box";
        case Strategy::top_t: return "topt";
        case Strategy::t_times_top: return "ttimestop";
    }
    return "?";
}

// ----------------------------------------------------------------------------
// Input-layer concretization
// ----------------------------------------------------------------------------

/// Per-perturbable-entry contribution bounds of an input-layer expression.
/// Entries outside K never appear here; their fixed w*x terms belong to the
/// expression's constant part.
inline std::vector<Contribution> contributions(const AffineExpr& expr, const Ball0Spec& spec,
                                               const BoxDomain& domain) {
    if (expr.coeffs.size() != domain.size())
        throw ShapeError("contributions: expression does not cover the input layer");
    std::vector<Contribution> out(spec.perturbable.size());
    for (std::size_t p = 0; p < spec.perturbable.size(); ++p) {
        const std::size_t i = spec.perturbable[p];
        double dm = 0.0, dp = 0.0;
        for (std::size_t j = 0; j < domain.channels; ++j) {
            const std::size_t f = domain.flat(i, j);
            const double w = expr.coeffs[f];
            const double up = w * (domain.hi[f] - spec.center[f]);
            const double dn = w * (domain.lo[f] - spec.center[f]);
            dm += std::min(up, dn);
            dp += std::max(up, dn);
        }
        out[p] = {dm, dp};
    }
    return out;
}

namespace detail {
/// bias + sum_i w_i * x_i over all entries (perturbable or not).
inline double base_value(const AffineExpr& expr, const Ball0Spec& spec) {
    return expr.bias + dot(expr.coeffs, spec.center);
}

/// Sum of the t smallest values (partial selection, no full sort).
inline double sum_smallest(std::vector<double>& v, std::size_t t) {
    if (t >= v.size()) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(t), v.end());
    double s = 0.0;
    for (std::size_t i = 0; i < t; ++i) s += v[i];
    return s;
}
} // namespace detail

/// Extremes over the box: every perturbable entry contributes.
inline Interval concretize_box(const AffineExpr& expr, const Ball0Spec& spec,
                               const BoxDomain& domain) {
    const double base = detail::base_value(expr, spec);
    double lo = 0.0, hi = 0.0;
    for (const auto& c : contributions(expr, spec, domain)) {
        lo += c.d_minus;
        hi += c.d_plus;
    }
    return {base + lo, base + hi};
}

/// Extremes over the radius-t ball (equivalently its convex hull): the t
/// lowest d_minus for the minimum, the t highest d_plus for the maximum.
inline Interval concretize_topt(const AffineExpr& expr, const Ball0Spec& spec,
                                const BoxDomain& domain) {
    const double base = detail::base_value(expr, spec);
    const auto contrib = contributions(expr, spec, domain);
    const std::size_t t = static_cast<std::size_t>(spec.radius);
    std::vector<double> mins(contrib.size()), negmaxs(contrib.size());
    for (std::size_t i = 0; i < contrib.size(); ++i) {
        mins[i] = contrib[i].d_minus;
        negmaxs[i] = -contrib[i].d_plus;
    }
    const double lo = detail::sum_smallest(mins, t);
    const double hi = -detail::sum_smallest(negmaxs, t);
    return {base + lo, base + hi};
}

/// Extremes over the scaled l1-style polytope: t times the single extreme
/// contribution.
inline Interval concretize_ttimestop(const AffineExpr& expr, const Ball0Spec& spec,
                                     const BoxDomain& domain) {
    const double base = detail::base_value(expr, spec);
    double dm = 0.0, dp = 0.0;
    for (const auto& c : contributions(expr, spec, domain)) {
        dm = std::min(dm, c.d_minus);
        dp = std::max(dp, c.d_plus);
    }
    const double t = static_cast<double>(spec.radius);
    return {base + t * dm, base + t * dp};
}

inline Interval concretize(const AffineExpr& expr, const Ball0Spec& spec, const BoxDomain& domain,
                           Strategy strategy) {
    switch (strategy) {
        case Strategy::box: return concretize_box(expr, spec, domain);
        case Strategy::top_t: return concretize_topt(expr, spec, domain);
        case Strategy::t_times_top: return concretize_ttimestop(expr, spec, domain);
    }
    return {};
}

// ----------------------------------------------------------------------------
// ReLU relaxation
// ----------------------------------------------------------------------------

/// Linear bounds for ReLU(x) given a pre-activation interval [l, u], each as
/// slope*x + intercept. Stable neurons substitute exactly; a crossing neuron
/// gets the chord as upper bound and lambda*x as lower bound with
/// lambda = 1 iff u > |l| (the area-minimizing choice; ties take lambda = 0).
struct ReluRelaxation {
    double lower_slope = 0.0;
    double lower_intercept = 0.0;
    double upper_slope = 0.0;
    double upper_intercept = 0.0;
};

// Ties u = |l| must resolve the same way no matter how rounding perturbed the
// two bounds, so the comparison carries a relative epsilon.
inline constexpr double kReluTieEps = 1e-9;

inline ReluRelaxation relax_relu(double l, double u) {
    if (!(l <= u)) throw std::invalid_argument("relax_relu: requires l <= u");
    if (u <= 0.0) return {0.0, 0.0, 0.0, 0.0};
    if (l >= 0.0) return {1.0, 0.0, 1.0, 0.0};
    const double slope = u / (u - l);
    const double lambda = (u + l > kReluTieEps * std::max(u, -l)) ? 1.0 : 0.0;
    return {lambda, 0.0, slope, -slope * l};
}

// ----------------------------------------------------------------------------
// Backward substitution
// ----------------------------------------------------------------------------

using LayerBounds = std::vector<Interval>;

/// Lower/upper bounding expressions for one neuron over the input layer.
struct ExprPair {
    AffineExpr lower, upper;
};

namespace detail {

/// Pushes a pair of expressions over stage `index`'s outputs back through
/// that stage, producing expressions over its inputs. For a ReLU stage, each
/// coefficient picks the relaxation side matching its sign: the lower
/// expression takes the ReLU lower bound where the coefficient is >= 0 and
/// the upper bound where it is negative; the upper expression mirrors this.
inline void pull_back_one(const Stage& stage, const LayerBounds* pre_bounds, AffineExpr& lower,
                          AffineExpr& upper) {
    if (const auto* a = std::get_if<AffineStage>(&stage)) {
        AffineExpr nl, nu;
        nl.coeffs.assign(a->in, 0.0);
        nu.coeffs.assign(a->in, 0.0);
        nl.bias = lower.bias;
        nu.bias = upper.bias;
        for (std::size_t o = 0; o < a->out; ++o) {
            const double cl = lower.coeffs[o];
            if (cl != 0.0) {
                nl.bias += cl * a->bias[o];
                for (const auto& [col, v] : a->rows[o]) nl.coeffs[col] += cl * v;
            }
            const double cu = upper.coeffs[o];
            if (cu != 0.0) {
                nu.bias += cu * a->bias[o];
                for (const auto& [col, v] : a->rows[o]) nu.coeffs[col] += cu * v;
            }
        }
        lower = std::move(nl);
        upper = std::move(nu);
    } else {
        assert(pre_bounds != nullptr);
        const std::size_t width = std::get<ReluStage>(stage).width;
        for (std::size_t i = 0; i < width; ++i) {
            const ReluRelaxation rr = relax_relu((*pre_bounds)[i].lo, (*pre_bounds)[i].hi);
            double& cl = lower.coeffs[i];
            if (cl >= 0.0) {
                lower.bias += cl * rr.lower_intercept;
                cl *= rr.lower_slope;
            } else {
                lower.bias += cl * rr.upper_intercept;
                cl *= rr.upper_slope;
            }
            double& cu = upper.coeffs[i];
            if (cu >= 0.0) {
                upper.bias += cu * rr.upper_intercept;
                cu *= rr.upper_slope;
            } else {
                upper.bias += cu * rr.lower_intercept;
                cu *= rr.lower_slope;
            }
        }
    }
}

} // namespace detail

/// Back-substitutes every neuron of affine stage `stage_index` to the input
/// layer. `bounds_so_far[q]` must hold bounds for every stage q preceding a
/// ReLU stage before `stage_index`.
inline std::vector<ExprPair> back_substitute(std::span<const Stage> stages,
                                             std::size_t input_size, std::size_t stage_index,
                                             const std::vector<LayerBounds>& bounds_so_far) {
    const auto* start = std::get_if<AffineStage>(&stages[stage_index]);
    if (start == nullptr)
        throw std::invalid_argument("back_substitute: stage must be affine");
    std::vector<ExprPair> out(start->out);
    for (std::size_t n = 0; n < start->out; ++n) {
        AffineExpr lower, upper;
        lower.coeffs.assign(start->in, 0.0);
        lower.bias = start->bias[n];
        for (const auto& [col, v] : start->rows[n]) lower.coeffs[col] = v;
        upper = lower;
        for (std::size_t q = stage_index; q-- > 0;) {
            const LayerBounds* pre =
                std::holds_alternative<ReluStage>(stages[q]) ? &bounds_so_far[q - 1] : nullptr;
            detail::pull_back_one(stages[q], pre, lower, upper);
        }
        assert(lower.coeffs.size() == input_size);
        (void)input_size;
        out[n] = {std::move(lower), std::move(upper)};
    }
    return out;
}

inline std::vector<ExprPair> back_substitute(const Network& net, std::size_t stage_index,
                                             const std::vector<LayerBounds>& bounds_so_far) {
    return back_substitute(net.stages(), net.input.size(), stage_index, bounds_so_far);
}

/// Interval bounds for every stage: affine stages by back substitution and
/// concretization over the chosen input set, ReLU stages as the clamped
/// pre-activation interval.
inline std::vector<LayerBounds> compute_bounds_stages(std::span<const Stage> stages,
                                                      std::size_t input_size,
                                                      const Ball0Spec& spec,
                                                      const BoxDomain& domain,
                                                      Strategy strategy) {
    std::vector<LayerBounds> bounds(stages.size());
    for (std::size_t p = 0; p < stages.size(); ++p) {
        if (std::holds_alternative<ReluStage>(stages[p])) {
            const LayerBounds& pre = bounds[p - 1];
            bounds[p].resize(pre.size());
            for (std::size_t i = 0; i < pre.size(); ++i)
                bounds[p][i] = {std::max(0.0, pre[i].lo), std::max(0.0, pre[i].hi)};
            continue;
        }
        const auto exprs = back_substitute(stages, input_size, p, bounds);
        bounds[p].resize(exprs.size());
        for (std::size_t n = 0; n < exprs.size(); ++n) {
            bounds[p][n] = {concretize(exprs[n].lower, spec, domain, strategy).lo,
                            concretize(exprs[n].upper, spec, domain, strategy).hi};
        }
    }
    return bounds;
}

inline std::vector<LayerBounds> compute_bounds(const Network& net, const Ball0Spec& spec,
                                               const BoxDomain& domain, Strategy strategy) {
    if (net.input.size() != domain.size())
        throw ShapeError("compute_bounds: domain does not match network input");
    return compute_bounds_stages(net.stages(), net.input.size(), spec, domain, strategy);
}

} // namespace l0cert
