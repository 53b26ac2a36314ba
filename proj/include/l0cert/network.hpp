// Feed-forward network representation: dense and 2-D convolution layers plus
// ReLU, with exact forward evaluation. Convolutions are additionally lowered
// to explicit sparse affine maps, which is the form bound propagation
// consumes.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "l0cert/types.hpp"

namespace l0cert {

struct InputShape {
    std::size_t entries = 0;  // pixels (height*width when an image)
    std::size_t channels = 1;
    std::size_t height = 0;   // 0 for flat inputs
    std::size_t width = 0;

    bool is_image() const { return height > 0; }
    std::size_t size() const { return entries * channels; }
};

struct DenseLayer {
    std::size_t out = 0, in = 0;
    std::vector<double> weights; // row-major [out][in]
    std::vector<double> bias;    // [out]
};

struct Conv2DLayer {
    std::size_t out_ch = 0, in_ch = 0, kh = 0, kw = 0;
    std::size_t stride = 1, pad = 0;
    std::vector<double> kernel; // row-major [out_ch][in_ch][kh][kw]
    std::vector<double> bias;   // [out_ch]
};

struct ReluLayer {};

using Layer = std::variant<DenseLayer, Conv2DLayer, ReluLayer>;

/// One lowered computation stage: an explicit affine map with sparse rows, or
/// an elementwise ReLU.
struct AffineStage {
    std::size_t in = 0, out = 0;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows; // per output neuron
    std::vector<double> bias;
};
struct ReluStage {
    std::size_t width = 0;
};
using Stage = std::variant<AffineStage, ReluStage>;

inline std::size_t stage_width(const Stage& s) {
    if (const auto* a = std::get_if<AffineStage>(&s)) return a->out;
    return std::get<ReluStage>(s).width;
}

namespace detail {
struct TensorShape { // shape flowing between layers
    std::size_t h = 0, w = 0, c = 0; // image when h > 0
    std::size_t n = 0;               // flat width otherwise
    std::size_t size() const { return h > 0 ? h * w * c : n; }
};

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride,
                                std::size_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}
} // namespace detail

// ----------------------------------------------------------------------------
// Network
// ----------------------------------------------------------------------------

class Network {
public:
    InputShape input;
    std::vector<Layer> layers;

    Network() = default;
    Network(InputShape in, std::vector<Layer> ls) : input(in), layers(std::move(ls)) {}

    /// Checks the shape chain, weight dimensions, and the >= 2 output scores
    /// requirement. Throws ShapeError naming the offending layer.
    void validate() const {
        if (input.entries < 1 || input.channels < 1)
            throw ShapeError("network: input shape must be non-empty");
        if (input.is_image() && input.height * input.width != input.entries)
            throw ShapeError("network: image dims do not match entry count");
        if (layers.empty()) throw ShapeError("network: layer list is empty");
        detail::TensorShape shape = input_tensor_shape();
        bool prev_affine = false;
        for (std::size_t li = 0; li < layers.size(); ++li) {
            const std::string at = "layer " + std::to_string(li);
            if (const auto* d = std::get_if<DenseLayer>(&layers[li])) {
                if (d->in != shape.size())
                    throw ShapeError(at + " (dense): input width " + std::to_string(d->in) +
                                     " does not match preceding width " +
                                     std::to_string(shape.size()));
                if (d->weights.size() != d->out * d->in)
                    throw ShapeError(at + " (dense): weights: expected " +
                                     std::to_string(d->out * d->in) + " values");
                if (d->bias.size() != d->out)
                    throw ShapeError(at + " (dense): bias: expected " + std::to_string(d->out) +
                                     " values, got " + std::to_string(d->bias.size()));
                if (d->out == 0) throw ShapeError(at + " (dense): zero outputs");
                shape = {0, 0, 0, d->out};
                prev_affine = true;
            } else if (const auto* cv = std::get_if<Conv2DLayer>(&layers[li])) {
                if (shape.h == 0)
                    throw ShapeError(at + " (conv2d): requires an image-shaped input");
                if (cv->in_ch != shape.c)
                    throw ShapeError(at + " (conv2d): in_ch " + std::to_string(cv->in_ch) +
                                     " does not match preceding channels " +
                                     std::to_string(shape.c));
                if (cv->kernel.size() != cv->out_ch * cv->in_ch * cv->kh * cv->kw)
                    throw ShapeError(at + " (conv2d): kernel: expected " +
                                     std::to_string(cv->out_ch * cv->in_ch * cv->kh * cv->kw) +
                                     " values");
                if (cv->bias.size() != cv->out_ch)
                    throw ShapeError(at + " (conv2d): bias: expected " +
                                     std::to_string(cv->out_ch) + " values, got " +
                                     std::to_string(cv->bias.size()));
                if (cv->stride == 0) throw ShapeError(at + " (conv2d): stride must be >= 1");
                if (shape.h + 2 * cv->pad < cv->kh || shape.w + 2 * cv->pad < cv->kw)
                    throw ShapeError(at + " (conv2d): kernel larger than padded input");
                shape = {detail::conv_out_dim(shape.h, cv->kh, cv->stride, cv->pad),
                         detail::conv_out_dim(shape.w, cv->kw, cv->stride, cv->pad), cv->out_ch,
                         0};
                prev_affine = true;
            } else {
                if (!prev_affine)
                    throw ShapeError(at + " (relu): must follow an affine layer");
                prev_affine = false;
            }
        }
        if (std::holds_alternative<ReluLayer>(layers.back()))
            throw ShapeError("network: last layer must be affine");
        if (shape.size() < 2) throw ShapeError("network: needs at least 2 output scores");
    }

    std::size_t output_count() const {
        detail::TensorShape shape = input_tensor_shape();
        for (const auto& l : layers) shape = layer_out_shape(l, shape);
        return shape.size();
    }

    /// Lowered affine/ReLU stage sequence; built on first use.
    const std::vector<Stage>& stages() const {
        if (stages_.empty()) lower();
        return stages_;
    }

private:
    mutable std::vector<Stage> stages_;

    detail::TensorShape input_tensor_shape() const {
        if (input.is_image()) return {input.height, input.width, input.channels, 0};
        if (input.channels > 1) return {1, input.entries, input.channels, 0};
        return {0, 0, 0, input.entries};
    }

    static detail::TensorShape layer_out_shape(const Layer& l, const detail::TensorShape& s) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) return {0, 0, 0, d->out};
        if (const auto* cv = std::get_if<Conv2DLayer>(&l))
            return {detail::conv_out_dim(s.h, cv->kh, cv->stride, cv->pad),
                    detail::conv_out_dim(s.w, cv->kw, cv->stride, cv->pad), cv->out_ch, 0};
        return s;
    }

    void lower() const {
        detail::TensorShape shape = input_tensor_shape();
        for (const auto& l : layers) {
            if (const auto* d = std::get_if<DenseLayer>(&l)) {
                AffineStage st;
                st.in = d->in;
                st.out = d->out;
                st.bias = d->bias;
                st.rows.resize(d->out);
                for (std::size_t o = 0; o < d->out; ++o) {
                    st.rows[o].reserve(d->in);
                    for (std::size_t i = 0; i < d->in; ++i) {
                        const double v = d->weights[o * d->in + i];
                        if (v != 0.0) st.rows[o].emplace_back(static_cast<std::uint32_t>(i), v);
                    }
                }
                stages_.push_back(std::move(st));
            } else if (const auto* cv = std::get_if<Conv2DLayer>(&l)) {
                stages_.push_back(lower_conv(*cv, shape));
            } else {
                stages_.push_back(ReluStage{shape.size()});
            }
            shape = layer_out_shape(l, shape);
        }
    }

    /// Materializes the convolution as a sparse matrix over the flattened
    /// input (pixel-major, channels innermost). Zero padding contributes no
    /// coefficients.
    static AffineStage lower_conv(const Conv2DLayer& cv, const detail::TensorShape& in) {
        const std::size_t oh = detail::conv_out_dim(in.h, cv.kh, cv.stride, cv.pad);
        const std::size_t ow = detail::conv_out_dim(in.w, cv.kw, cv.stride, cv.pad);
        AffineStage st;
        st.in = in.size();
        st.out = oh * ow * cv.out_ch;
        st.rows.resize(st.out);
        st.bias.resize(st.out);
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                for (std::size_t oc = 0; oc < cv.out_ch; ++oc) {
                    const std::size_t row = (y * ow + x) * cv.out_ch + oc;
                    st.bias[row] = cv.bias[oc];
                    auto& cells = st.rows[row];
                    for (std::size_t ic = 0; ic < cv.in_ch; ++ic) {
                        for (std::size_t ky = 0; ky < cv.kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(y * cv.stride + ky) -
                                static_cast<std::ptrdiff_t>(cv.pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                            for (std::size_t kx = 0; kx < cv.kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(x * cv.stride + kx) -
                                    static_cast<std::ptrdiff_t>(cv.pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                                const double v =
                                    cv.kernel[((oc * cv.in_ch + ic) * cv.kh + ky) * cv.kw + kx];
                                if (v == 0.0) continue;
                                const std::size_t col =
                                    (static_cast<std::size_t>(iy) * in.w +
                                     static_cast<std::size_t>(ix)) *
                                        in.c +
                                    ic;
                                cells.emplace_back(static_cast<std::uint32_t>(col), v);
                            }
                        }
                    }
                    std::sort(cells.begin(), cells.end());
                }
            }
        }
        return st;
    }
};

// ----------------------------------------------------------------------------
// Evaluation
// ----------------------------------------------------------------------------

/// Exact layer-by-layer evaluation (direct sliding window for convolutions).
inline std::vector<double> forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.input.size()) throw ShapeError("forward: input size mismatch");
    std::vector<double> cur(x.begin(), x.end());
    detail::TensorShape shape = net.input.is_image()
                                    ? detail::TensorShape{net.input.height, net.input.width,
                                                          net.input.channels, 0}
                                    : (net.input.channels > 1
                                           ? detail::TensorShape{1, net.input.entries,
                                                                 net.input.channels, 0}
                                           : detail::TensorShape{0, 0, 0, net.input.entries});
    for (const auto& l : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            std::vector<double> next(d->out);
            for (std::size_t o = 0; o < d->out; ++o) {
                double s = d->bias[o];
                for (std::size_t i = 0; i < d->in; ++i) s += d->weights[o * d->in + i] * cur[i];
                next[o] = s;
            }
            cur = std::move(next);
            shape = {0, 0, 0, d->out};
        } else if (const auto* cv = std::get_if<Conv2DLayer>(&l)) {
            const std::size_t oh = detail::conv_out_dim(shape.h, cv->kh, cv->stride, cv->pad);
            const std::size_t ow = detail::conv_out_dim(shape.w, cv->kw, cv->stride, cv->pad);
            std::vector<double> next(oh * ow * cv->out_ch);
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x2 = 0; x2 < ow; ++x2)
                    for (std::size_t oc = 0; oc < cv->out_ch; ++oc) {
                        double s = cv->bias[oc];
                        for (std::size_t ic = 0; ic < cv->in_ch; ++ic)
                            for (std::size_t ky = 0; ky < cv->kh; ++ky) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(y * cv->stride + ky) -
                                    static_cast<std::ptrdiff_t>(cv->pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(shape.h))
                                    continue;
                                for (std::size_t kx = 0; kx < cv->kw; ++kx) {
                                    const std::ptrdiff_t ix =
                                        static_cast<std::ptrdiff_t>(x2 * cv->stride + kx) -
                                        static_cast<std::ptrdiff_t>(cv->pad);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(shape.w))
                                        continue;
                                    s += cv->kernel[((oc * cv->in_ch + ic) * cv->kh + ky) *
                                                        cv->kw +
                                                    kx] *
                                         cur[(static_cast<std::size_t>(iy) * shape.w +
                                              static_cast<std::size_t>(ix)) *
                                                 shape.c +
                                             ic];
                                }
                            }
                        next[(y * ow + x2) * cv->out_ch + oc] = s;
                    }
            cur = std::move(next);
            shape = {oh, ow, cv->out_ch, 0};
        } else {
            for (double& v : cur) v = std::max(0.0, v);
        }
    }
    return cur;
}

/// Evaluates one lowered stage.
inline std::vector<double> apply_stage(const Stage& st, std::span<const double> x) {
    if (const auto* a = std::get_if<AffineStage>(&st)) {
        std::vector<double> next(a->out);
        for (std::size_t o = 0; o < a->out; ++o) {
            double s = a->bias[o];
            for (const auto& [c, v] : a->rows[o]) s += v * x[c];
            next[o] = s;
        }
        return next;
    }
    std::vector<double> next(x.begin(), x.end());
    for (double& v : next) v = std::max(0.0, v);
    return next;
}

/// Evaluation through the lowered stage list; used to cross-check lowering.
inline std::vector<double> forward_stages(const Network& net, std::span<const double> x) {
    std::vector<double> cur(x.begin(), x.end());
    for (const auto& st : net.stages()) cur = apply_stage(st, cur);
    return cur;
}

/// Index of the maximal score; ties break to the lowest index.
inline int classify(const Network& net, std::span<const double> x) {
    const std::vector<double> scores = forward(net, x);
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

/// An input point paired with its expected label.
struct LabeledInput {
    std::vector<double> x;
    int label = 0;
};

} // namespace l0cert
