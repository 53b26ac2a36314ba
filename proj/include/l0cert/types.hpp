// Core domain types: box input domains and sparse-perturbation balls.
#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace l0cert {

/// Malformed document (model/input file) — message carries a field path.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dimension/shape mismatch between values that must agree.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An enumeration would exceed its configured cap.
struct CapExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Query input is not classified as its stated label.
struct MisclassifiedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
};

// ----------------------------------------------------------------------------
// BoxDomain
// ----------------------------------------------------------------------------

/// Axis-aligned product of per-entry, per-channel intervals. Values are stored
/// entry-major: coordinate (entry i, channel j) lives at flat index i*d + j.
struct BoxDomain {
    std::vector<double> lo;
    std::vector<double> hi;
    std::size_t entries = 0;  // k
    std::size_t channels = 1; // d

    BoxDomain() = default;
    BoxDomain(std::vector<double> lo_, std::vector<double> hi_, std::size_t entries_,
              std::size_t channels_ = 1)
        : lo(std::move(lo_)), hi(std::move(hi_)), entries(entries_), channels(channels_) {
        validate();
    }

    /// Uniform bounds [a, b] on every coordinate.
    static BoxDomain uniform(std::size_t entries, double a, double b, std::size_t channels = 1) {
        return BoxDomain(std::vector<double>(entries * channels, a),
                         std::vector<double>(entries * channels, b), entries, channels);
    }

    std::size_t size() const { return entries * channels; }
    std::size_t flat(std::size_t entry, std::size_t channel) const {
        return entry * channels + channel;
    }

    void validate() const {
        if (entries < 1 || channels < 1)
            throw ShapeError("BoxDomain: entries and channels must be >= 1");
        if (lo.size() != size() || hi.size() != size())
            throw ShapeError("BoxDomain: bound vectors must have entries*channels values");
        for (std::size_t i = 0; i < size(); ++i)
            if (!(lo[i] <= hi[i]))
                throw ShapeError("BoxDomain: lower bound exceeds upper bound at index " +
                                 std::to_string(i));
    }

    bool contains(std::span<const double> y) const {
        if (y.size() != size()) return false;
        for (std::size_t i = 0; i < size(); ++i)
            if (y[i] < lo[i] || y[i] > hi[i]) return false;
        return true;
    }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < size(); ++i) v *= hi[i] - lo[i];
        return v;
    }

    double log_volume() const {
        double s = 0.0;
        for (std::size_t i = 0; i < size(); ++i) s += std::log(hi[i] - lo[i]);
        return s;
    }
};

// ----------------------------------------------------------------------------
// Ball0Spec
// ----------------------------------------------------------------------------

/// A sparse-perturbation neighborhood: all points of the domain that agree
/// with `center` outside `perturbable` and differ from it in at most `radius`
/// entries (an entry differs when any of its channels differs).
struct Ball0Spec {
    std::vector<double> center;            // size entries*channels
    int radius = 1;                        // t
    std::vector<std::size_t> perturbable;  // sorted entry indices (K)

    Ball0Spec() = default;
    Ball0Spec(std::vector<double> center_, int radius_, const BoxDomain& domain)
        : center(std::move(center_)), radius(radius_) {
        perturbable.resize(domain.entries);
        std::iota(perturbable.begin(), perturbable.end(), std::size_t{0});
        validate(domain);
    }
    Ball0Spec(std::vector<double> center_, int radius_, std::vector<std::size_t> perturbable_,
              const BoxDomain& domain)
        : center(std::move(center_)), radius(radius_), perturbable(std::move(perturbable_)) {
        validate(domain);
    }

    void validate(const BoxDomain& domain) const {
        if (center.size() != domain.size())
            throw ShapeError("Ball0Spec: center size does not match domain");
        if (!domain.contains(center))
            throw ShapeError("Ball0Spec: center lies outside the domain");
        if (perturbable.empty())
            throw ShapeError("Ball0Spec: perturbable set is empty");
        for (std::size_t i = 0; i + 1 < perturbable.size(); ++i)
            if (perturbable[i] >= perturbable[i + 1])
                throw ShapeError("Ball0Spec: perturbable indices must be sorted and unique");
        if (perturbable.back() >= domain.entries)
            throw ShapeError("Ball0Spec: perturbable index out of range");
        if (radius < 1 || static_cast<std::size_t>(radius) > perturbable.size())
            throw ShapeError("Ball0Spec: radius must satisfy 1 <= t <= |K|");
    }
};

} // namespace l0cert
