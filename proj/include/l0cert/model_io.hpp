// On-disk text formats for networks and labeled inputs.
//
// Both formats are line-oriented, field-ordered, and human-readable; '#'
// starts a comment. Each record occupies one line. Floating-point values are
// written with enough significant digits (up to 17) to round-trip
// bit-exactly. The grammar is in docs/formats.md.
#pragma once

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "l0cert/common.hpp"
#include "l0cert/network.hpp"
#include "l0cert/types.hpp"

namespace l0cert {

namespace detail {

/// Line-of-tokens reader over the comment-stripped document.
class LineReader {
public:
    explicit LineReader(const std::string& text) {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream ws(line);
            std::vector<std::string> toks;
            std::string tok;
            while (ws >> tok) toks.push_back(tok);
            if (!toks.empty()) lines_.push_back(std::move(toks));
        }
    }

    bool at_end() const { return pos_ >= lines_.size(); }

    const std::vector<std::string>& next(const std::string& path) {
        if (at_end()) throw SchemaError(path + ": unexpected end of document");
        return lines_[pos_++];
    }

    const std::vector<std::string>& peek(const std::string& path) const {
        if (at_end()) throw SchemaError(path + ": unexpected end of document");
        return lines_[pos_];
    }

private:
    std::vector<std::vector<std::string>> lines_;
    std::size_t pos_ = 0;
};

inline long long parse_int(const std::string& tok, const std::string& path) {
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
        throw SchemaError(path + ": expected an integer, got '" + tok + "'");
    return v;
}

inline std::size_t parse_size(const std::string& tok, const std::string& path) {
    const long long v = parse_int(tok, path);
    if (v < 0) throw SchemaError(path + ": expected a non-negative integer, got '" + tok + "'");
    return static_cast<std::size_t>(v);
}

inline double parse_double(const std::string& tok, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw SchemaError(path + ": expected a number, got '" + tok + "'");
    return v;
}

/// A record line "<keyword> v1 ... vn" with exactly n values.
inline std::vector<double> parse_values(const std::vector<std::string>& line,
                                        const std::string& keyword, std::size_t n,
                                        const std::string& path) {
    if (line[0] != keyword)
        throw SchemaError(path + ": expected '" + keyword + "' record, got '" + line[0] + "'");
    if (line.size() != n + 1)
        throw SchemaError(path + ": expected " + std::to_string(n) + " values, got " +
                          std::to_string(line.size() - 1));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = parse_double(line[i + 1], path);
    return out;
}

inline void expect_arity(const std::vector<std::string>& line, std::size_t args,
                         const std::string& path) {
    if (line.size() != args + 1)
        throw SchemaError(path + ": expected " + std::to_string(args) + " fields, got " +
                          std::to_string(line.size() - 1));
}

} // namespace detail

// ----------------------------------------------------------------------------
// Model documents
// ----------------------------------------------------------------------------

inline Network load_model(const std::string& text) {
    detail::LineReader r(text);
    {
        const auto& header = r.next("header");
        if (header[0] != "l0net") throw SchemaError("header: expected 'l0net <version>'");
        detail::expect_arity(header, 1, "header");
        if (detail::parse_size(header[1], "header.format_version") != 1)
            throw SchemaError("header.format_version: unsupported version " + header[1]);
    }

    Network net;
    {
        const auto& line = r.next("header.input");
        if (line[0] != "input") throw SchemaError("header.input: expected 'input' record");
        if (line.size() >= 2 && line[1] == "flat") {
            detail::expect_arity(line, 3, "header.input");
            net.input.entries = detail::parse_size(line[2], "header.input.entries");
            net.input.channels = detail::parse_size(line[3], "header.input.channels");
        } else if (line.size() >= 2 && line[1] == "image") {
            detail::expect_arity(line, 4, "header.input");
            net.input.height = detail::parse_size(line[2], "header.input.height");
            net.input.width = detail::parse_size(line[3], "header.input.width");
            net.input.channels = detail::parse_size(line[4], "header.input.channels");
            net.input.entries = net.input.height * net.input.width;
        } else {
            throw SchemaError("header.input: expected 'flat' or 'image'");
        }
    }

    std::size_t li = 0;
    for (;;) {
        const auto line = r.next("layers");
        const std::string at = "layers[" + std::to_string(li) + "]";
        if (line[0] == "end") {
            detail::expect_arity(line, 0, "end");
            break;
        }
        if (line[0] == "dense") {
            detail::expect_arity(line, 2, at);
            DenseLayer d;
            d.out = detail::parse_size(line[1], at + ".out");
            d.in = detail::parse_size(line[2], at + ".in");
            d.weights.reserve(d.out * d.in);
            for (std::size_t o = 0; o < d.out; ++o) {
                const std::string rp = at + ".w[" + std::to_string(o) + "]";
                const auto row = detail::parse_values(r.next(rp), "w", d.in, rp);
                d.weights.insert(d.weights.end(), row.begin(), row.end());
            }
            const std::string bp = at + ".bias";
            d.bias = detail::parse_values(r.next(bp), "b", d.out, bp);
            net.layers.emplace_back(std::move(d));
        } else if (line[0] == "conv2d") {
            detail::expect_arity(line, 6, at);
            Conv2DLayer cv;
            cv.out_ch = detail::parse_size(line[1], at + ".out_ch");
            cv.in_ch = detail::parse_size(line[2], at + ".in_ch");
            cv.kh = detail::parse_size(line[3], at + ".kh");
            cv.kw = detail::parse_size(line[4], at + ".kw");
            cv.stride = detail::parse_size(line[5], at + ".stride");
            cv.pad = detail::parse_size(line[6], at + ".pad");
            const std::size_t per_row = cv.in_ch * cv.kh * cv.kw;
            cv.kernel.reserve(cv.out_ch * per_row);
            for (std::size_t o = 0; o < cv.out_ch; ++o) {
                const std::string rp = at + ".w[" + std::to_string(o) + "]";
                const auto row = detail::parse_values(r.next(rp), "w", per_row, rp);
                cv.kernel.insert(cv.kernel.end(), row.begin(), row.end());
            }
            const std::string bp = at + ".bias";
            cv.bias = detail::parse_values(r.next(bp), "b", cv.out_ch, bp);
            net.layers.emplace_back(std::move(cv));
        } else if (line[0] == "relu") {
            detail::expect_arity(line, 0, at);
            net.layers.emplace_back(ReluLayer{});
        } else {
            throw SchemaError(at + ": unknown layer kind '" + line[0] + "'");
        }
        ++li;
    }
    if (!r.at_end()) throw SchemaError("trailing content after 'end'");
    net.validate();
    return net;
}

inline std::string save_model(const Network& net) {
    net.validate();
    std::ostringstream out;
    out << "l0net 1\n";
    if (net.input.is_image())
        out << "input image " << net.input.height << ' ' << net.input.width << ' '
            << net.input.channels << '\n';
    else
        out << "input flat " << net.input.entries << ' ' << net.input.channels << '\n';
    auto write_values = [&](const std::vector<double>& v, std::size_t begin, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out << ' ' << format_double(v[begin + i]);
        out << '\n';
    };
    for (const auto& l : net.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&l)) {
            out << "dense " << d->out << ' ' << d->in << '\n';
            for (std::size_t o = 0; o < d->out; ++o) {
                out << "w";
                write_values(d->weights, o * d->in, d->in);
            }
            out << "b";
            write_values(d->bias, 0, d->out);
        } else if (const auto* cv = std::get_if<Conv2DLayer>(&l)) {
            out << "conv2d " << cv->out_ch << ' ' << cv->in_ch << ' ' << cv->kh << ' ' << cv->kw
                << ' ' << cv->stride << ' ' << cv->pad << '\n';
            const std::size_t per_row = cv->in_ch * cv->kh * cv->kw;
            for (std::size_t o = 0; o < cv->out_ch; ++o) {
                out << "w";
                write_values(cv->kernel, o * per_row, per_row);
            }
            out << "b";
            write_values(cv->bias, 0, cv->out_ch);
        } else {
            out << "relu\n";
        }
    }
    out << "end\n";
    return out.str();
}

// ----------------------------------------------------------------------------
// Input documents
// ----------------------------------------------------------------------------

/// A labeled input plus the box domain it lives in.
struct InputDoc {
    LabeledInput input;
    BoxDomain domain;
};

/// Parses an input document against a known input size (entries * channels).
inline InputDoc load_input(const std::string& text, std::size_t entries, std::size_t channels) {
    detail::LineReader r(text);
    {
        const auto& header = r.next("header");
        if (header[0] != "l0in") throw SchemaError("header: expected 'l0in <version>'");
        detail::expect_arity(header, 1, "header");
        if (detail::parse_size(header[1], "header.format_version") != 1)
            throw SchemaError("header.format_version: unsupported version " + header[1]);
    }
    const std::size_t n = entries * channels;

    InputDoc doc;
    bool have_label = false, have_x = false;
    std::vector<double> lo, hi;
    for (;;) {
        const auto line = r.next("body");
        if (line[0] == "end") break;
        if (line[0] == "label") {
            detail::expect_arity(line, 1, "label");
            doc.input.label = static_cast<int>(detail::parse_int(line[1], "label"));
            have_label = true;
        } else if (line[0] == "bounds") {
            detail::expect_arity(line, 2, "bounds");
            lo.assign(n, detail::parse_double(line[1], "bounds.lo"));
            hi.assign(n, detail::parse_double(line[2], "bounds.hi"));
        } else if (line[0] == "lo") {
            lo = detail::parse_values(line, "lo", n, "lo");
        } else if (line[0] == "hi") {
            hi = detail::parse_values(line, "hi", n, "hi");
        } else if (line[0] == "x") {
            doc.input.x = detail::parse_values(line, "x", n, "x");
            have_x = true;
        } else {
            throw SchemaError("body: unknown field '" + line[0] + "'");
        }
    }
    if (!have_label) throw SchemaError("label: missing");
    if (lo.empty() || hi.empty())
        throw SchemaError("bounds: missing (use 'bounds a b' or 'lo'/'hi' lines)");
    if (!have_x) throw SchemaError("x: missing");
    doc.domain = BoxDomain(std::move(lo), std::move(hi), entries, channels);
    if (!doc.domain.contains(doc.input.x))
        throw SchemaError("x: point lies outside the declared bounds");
    return doc;
}

inline std::string save_input(const InputDoc& doc) {
    std::ostringstream out;
    out << "l0in 1\n";
    out << "label " << doc.input.label << '\n';
    out << "lo";
    for (double v : doc.domain.lo) out << ' ' << format_double(v);
    out << "\nhi";
    for (double v : doc.domain.hi) out << ' ' << format_double(v);
    out << "\nx";
    for (double v : doc.input.x) out << ' ' << format_double(v);
    out << "\nend\n";
    return out.str();
}

} // namespace l0cert
