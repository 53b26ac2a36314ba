// Robustness verification of sparse-perturbation neighborhoods.
//
// A query asks whether every point of a ball keeps the network's label. The
// verifier appends a virtual affine layer computing the score margins
// o_label - o_j, bounds it with the chosen strategy, and reports Verified
// when every margin's certified lower bound is positive. When certification
// fails it searches for a concrete counterexample (ball corners first, then
// random ball members) and reports Falsified or Unknown.
#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "l0cert/geometry.hpp"
#include "l0cert/network.hpp"
#include "l0cert/oracles.hpp"
#include "l0cert/parallel.hpp"
#include "l0cert/propagation.hpp"
#include "l0cert/rng.hpp"
#include "l0cert/types.hpp"

namespace l0cert {

inline constexpr std::uint64_t kDefaultSeed = 1729;

struct FalsificationBudget {
    std::size_t corners = 10000;
    std::size_t samples = 10000;
};

struct Query {
    const Network* net = nullptr;
    LabeledInput input;
    Ball0Spec spec;
    BoxDomain domain;
    Strategy strategy = Strategy::top_t;
    std::uint64_t seed = kDefaultSeed;
    FalsificationBudget budget;
};

enum class Verdict { verified, falsified, unknown };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::verified: return "verified";
        case Verdict::falsified: return "falsified";
        case Verdict::unknown: return "unknown";
    }
    return "?";
}

struct MarginBound {
    int adversary = 0;   // competing label j
    double lower = 0.0;  // certified lower bound of o_label - o_j
};

struct StageSummary {
    std::string name;
    std::size_t width = 0;
    double min_lo = 0.0;
    double max_hi = 0.0;
    std::size_t unstable = 0; // crossing ReLU pre-activations
};

struct VerdictReport {
    Verdict status = Verdict::unknown;
    std::vector<MarginBound> margins;
    std::optional<std::vector<double>> counterexample;
    int counterexample_label = -1;
    std::vector<StageSummary> stage_summary;
    double elapsed_ms = 0.0;
    std::uint64_t seed = kDefaultSeed;
    std::size_t propagation_calls = 1;
};

namespace detail {

inline std::vector<Stage> stages_with_margins(const Network& net, int label) {
    std::vector<Stage> stages(net.stages().begin(), net.stages().end());
    const std::size_t c = stage_width(stages.back());
    AffineStage m;
    m.in = c;
    m.out = c - 1;
    m.bias.assign(c - 1, 0.0);
    m.rows.resize(c - 1);
    std::size_t row = 0;
    for (std::size_t j = 0; j < c; ++j) {
        if (static_cast<int>(j) == label) continue;
        m.rows[row].emplace_back(static_cast<std::uint32_t>(label), 1.0);
        m.rows[row].emplace_back(static_cast<std::uint32_t>(j), -1.0);
        std::sort(m.rows[row].begin(), m.rows[row].end());
        ++row;
    }
    stages.emplace_back(std::move(m));
    return stages;
}

inline std::vector<StageSummary> summarize(const std::vector<Stage>& stages,
                                           const std::vector<LayerBounds>& bounds) {
    std::vector<StageSummary> out;
    std::size_t dense_i = 0, relu_i = 0;
    for (std::size_t p = 0; p < stages.size(); ++p) {
        StageSummary s;
        if (std::holds_alternative<AffineStage>(stages[p])) {
            s.name = (p + 1 == stages.size()) ? "margins" : "affine" + std::to_string(dense_i++);
        } else {
            s.name = "relu" + std::to_string(relu_i++);
            for (const Interval& iv : bounds[p - 1])
                if (iv.lo < 0.0 && iv.hi > 0.0) ++s.unstable;
        }
        s.width = bounds[p].size();
        s.min_lo = kInf;
        s.max_hi = -kInf;
        for (const Interval& iv : bounds[p]) {
            s.min_lo = std::min(s.min_lo, iv.lo);
            s.max_hi = std::max(s.max_hi, iv.hi);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Corners-first then random sampling; returns the first point whose label
/// flips, in a fixed deterministic order.
inline std::optional<std::pair<std::vector<double>, int>> find_counterexample(
    const Network& net, const Query& q) {
    std::optional<std::pair<std::vector<double>, int>> found;
    if (q.budget.corners > 0) {
        for_each_corner(q.spec, q.domain, q.budget.corners, [&](std::span<const double> y) {
            if (found) return;
            const int lab = classify(net, y);
            if (lab != q.input.label)
                found = {std::vector<double>(y.begin(), y.end()), lab};
        });
        if (found) return found;
    }
    for (std::size_t i = 0; i < q.budget.samples; ++i) {
        const std::vector<double> y = sample_in_ball0(q.spec, q.domain, derive_seed(q.seed, i));
        const int lab = classify(net, y);
        if (lab != q.input.label) return {{y, lab}};
    }
    return std::nullopt;
}

} // namespace detail

/// Decides one robustness query. Throws MisclassifiedError when the center is
/// not classified as its stated label (a rejected query, not an Unknown).
inline VerdictReport verify(const Query& q) {
    const auto t0 = std::chrono::steady_clock::now();
    const Network& net = *q.net;
    if (classify(net, q.input.x) != q.input.label)
        throw MisclassifiedError("verify: input is not classified as its label");
    q.spec.validate(q.domain);

    const std::vector<Stage> stages = detail::stages_with_margins(net, q.input.label);
    const std::vector<LayerBounds> bounds =
        compute_bounds_stages(stages, net.input.size(), q.spec, q.domain, q.strategy);

    VerdictReport rep;
    rep.seed = q.seed;
    const LayerBounds& margin_bounds = bounds.back();
    const std::size_t c = stage_width(net.stages().back());
    bool all_positive = true;
    std::size_t row = 0;
    for (std::size_t j = 0; j < c; ++j) {
        if (static_cast<int>(j) == q.input.label) continue;
        rep.margins.push_back({static_cast<int>(j), margin_bounds[row].lo});
        all_positive = all_positive && margin_bounds[row].lo > 0.0;
        ++row;
    }
    rep.stage_summary = detail::summarize(stages, bounds);

    if (all_positive) {
        rep.status = Verdict::verified;
    } else if (auto cex = detail::find_counterexample(net, q)) {
        rep.status = Verdict::falsified;
        rep.counterexample = std::move(cex->first);
        rep.counterexample_label = cex->second;
    } else {
        rep.status = Verdict::unknown;
    }
    rep.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ----------------------------------------------------------------------------
// Success-rate experiment
// ----------------------------------------------------------------------------

struct SuccessRates {
    std::size_t trials = 0;
    std::size_t verified_box = 0;
    std::size_t verified_topt = 0;
    std::size_t verified_ttimestop = 0;

    double rate(Strategy s) const {
        const std::size_t v = s == Strategy::box ? verified_box
                              : s == Strategy::top_t ? verified_topt
                                                     : verified_ttimestop;
        return static_cast<double>(v) / static_cast<double>(trials);
    }
};

/// Samples `trials` uniform perturbable subsets of the given size and counts,
/// per strategy, how many of the resulting balls certify. Trial subsets
/// derive from (seed, trial index), so results do not depend on `jobs`.
inline SuccessRates success_rate_experiment(const Network& net, const LabeledInput& input,
                                            const BoxDomain& domain, std::size_t subset_size,
                                            int t, std::size_t trials, std::uint64_t seed,
                                            unsigned jobs = 1) {
    if (trials < 1) throw std::invalid_argument("success_rate_experiment: trials >= 1 required");
    if (subset_size < static_cast<std::size_t>(t) || subset_size > domain.entries)
        throw std::invalid_argument("success_rate_experiment: need t <= k <= entries");
    if (classify(net, input.x) != input.label)
        throw MisclassifiedError("success_rate_experiment: input is not classified as its label");

    std::vector<std::array<bool, 3>> verified(trials, {false, false, false});
    parallel_for_chunks(trials, jobs, [&](std::size_t trial) {
        Rng rng(derive_seed(seed, trial));
        const Ball0Spec spec(input.x, t, rng.subset(domain.entries, subset_size), domain);
        Query q;
        q.net = &net;
        q.input = input;
        q.spec = spec;
        q.domain = domain;
        q.seed = derive_seed(seed, trial);
        q.budget = {0, 0}; // rate counts certificates only
        const Strategy strategies[3] = {Strategy::box, Strategy::top_t, Strategy::t_times_top};
        for (int s = 0; s < 3; ++s) {
            q.strategy = strategies[s];
            verified[trial][s] = verify(q).status == Verdict::verified;
        }
    });
    SuccessRates rates;
    rates.trials = trials;
    for (const auto& v : verified) {
        rates.verified_box += v[0];
        rates.verified_topt += v[1];
        rates.verified_ttimestop += v[2];
    }
    return rates;
}

} // namespace l0cert
