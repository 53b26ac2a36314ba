// l0cert: certify local robustness of ReLU networks against few-pixel
// perturbations, and emit plot-ready data for the geometry behind it.
//
// Subcommands: bounds, verify, volume, compare. See README.md and
// docs/formats.md for file formats and the exit-code contract.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "l0cert/cover.hpp"
#include "l0cert/geometry.hpp"
#include "l0cert/model_io.hpp"
#include "l0cert/network.hpp"
#include "l0cert/oracles.hpp"
#include "l0cert/parallel.hpp"
#include "l0cert/propagation.hpp"
#include "l0cert/report_io.hpp"
#include "l0cert/verifier.hpp"

namespace {

using namespace l0cert;

constexpr int kExitVerified = 0;
constexpr int kExitFalsified = 1;
constexpr int kExitSchema = 2;
constexpr int kExitShape = 3;
constexpr int kExitUnknown = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw SchemaError("cannot open output file: " + out_path);
    out << text;
}

/// Parses "1:4" (inclusive range), "1,2,8", or a mix "1:3,8".
std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        const auto colon = piece.find(':');
        try {
            if (colon == std::string::npos) {
                out.push_back(std::stoi(piece));
            } else {
                const int a = std::stoi(piece.substr(0, colon));
                const int b = std::stoi(piece.substr(colon + 1));
                for (int v = a; v <= b; ++v) out.push_back(v);
            }
        } catch (const std::exception&) {
            throw SchemaError(flag + ": cannot parse '" + piece + "'");
        }
    }
    if (out.empty()) throw SchemaError(flag + ": empty list");
    return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& flag) {
    std::vector<std::size_t> out;
    for (int v : parse_int_list(text, flag)) {
        if (v < 0) throw SchemaError(flag + ": negative index");
        out.push_back(static_cast<std::size_t>(v));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Strategy parse_strategy(const std::string& name) {
    if (name == "box") return Strategy::box;
    if (name == "topt") return Strategy::top_t;
    if (name == "ttimestop") return Strategy::t_times_top;
    throw SchemaError("--strategy: expected box|topt|ttimestop, got '" + name + "'");
}

struct LoadedProblem {
    Network net;
    InputDoc doc;
};

LoadedProblem load_problem(const std::string& model_path, const std::string& input_path,
                           int label_override) {
    LoadedProblem p;
    p.net = load_model(read_file(model_path));
    p.doc = load_input(read_file(input_path), p.net.input.entries, p.net.input.channels);
    if (label_override >= 0) p.doc.input.label = label_override;
    return p;
}

// --------------------------------------------------------------------------
// bounds
// --------------------------------------------------------------------------

int cmd_bounds(const std::string& model_path, const std::string& input_path, int t,
               const std::vector<std::string>& strategy_names, const std::string& out_path) {
    LoadedProblem p = load_problem(model_path, input_path, -1);
    const Ball0Spec spec(p.doc.input.x, t, p.doc.domain);

    std::vector<Strategy> strategies;
    if (strategy_names.empty()) {
        strategies = {Strategy::box, Strategy::top_t, Strategy::t_times_top};
    } else {
        for (const auto& n : strategy_names) strategies.push_back(parse_strategy(n));
    }

    std::vector<std::vector<LayerBounds>> all;
    for (Strategy s : strategies)
        all.push_back(compute_bounds(p.net, spec, p.doc.domain, s));

    std::ostringstream out;
    out << "stage neuron";
    for (Strategy s : strategies) out << ' ' << strategy_name(s) << "_lo " << strategy_name(s)
                                      << "_hi";
    out << '\n';
    const auto& stages = p.net.stages();
    std::size_t affine_i = 0, relu_i = 0;
    for (std::size_t st = 0; st < stages.size(); ++st) {
        std::string name;
        if (std::holds_alternative<AffineStage>(stages[st]))
            name = (st + 1 == stages.size()) ? "output" : "affine" + std::to_string(affine_i++);
        else
            name = "relu" + std::to_string(relu_i++);
        for (std::size_t n = 0; n < all[0][st].size(); ++n) {
            out << name << ' ' << n;
            for (std::size_t s = 0; s < strategies.size(); ++s)
                out << ' ' << format_double(all[s][st][n].lo) << ' '
                    << format_double(all[s][st][n].hi);
            out << '\n';
        }
    }
    write_output(out_path, out.str());
    return 0;
}

// --------------------------------------------------------------------------
// verify
// --------------------------------------------------------------------------

int cmd_verify(const std::string& model_path, const std::string& input_path, int label_override,
               int t, const std::string& pixels, const std::string& strategy_name_opt,
               bool complete, std::uint64_t seed, std::size_t cap_corners,
               const std::string& out_path) {
    LoadedProblem p = load_problem(model_path, input_path, label_override);

    nlohmann::json config = {{"subcommand", complete ? "verify --complete" : "verify"},
                             {"model", model_path},
                             {"input", input_path},
                             {"label", p.doc.input.label},
                             {"t", t},
                             {"seed", seed}};

    nlohmann::json report;
    Verdict verdict;
    if (complete) {
        CoverParams params;
        params.seed = seed;
        params.leaf_budget.corners = cap_corners;
        const CoverResult res = cover_verify(p.net, p.doc.input, p.doc.domain, t, params);
        verdict = res.report.status;
        report = report_to_json(res.report, config, &res.stats);
    } else {
        Query q;
        q.net = &p.net;
        q.input = p.doc.input;
        q.domain = p.doc.domain;
        q.strategy = strategy_name_opt.empty() ? Strategy::top_t : parse_strategy(strategy_name_opt);
        q.seed = seed;
        q.budget.corners = cap_corners;
        if (pixels.empty()) {
            q.spec = Ball0Spec(p.doc.input.x, t, p.doc.domain);
        } else {
            q.spec = Ball0Spec(p.doc.input.x, t, parse_index_list(pixels, "-k"), p.doc.domain);
            config["pixels"] = pixels;
        }
        config["strategy"] = strategy_name(q.strategy);
        const VerdictReport rep = verify(q);
        verdict = rep.status;
        report = report_to_json(rep, config);
    }
    write_output(out_path, report.dump(2) + "\n");
    switch (verdict) {
        case Verdict::verified: return kExitVerified;
        case Verdict::falsified: return kExitFalsified;
        case Verdict::unknown: return kExitUnknown;
    }
    return kExitUnknown;
}

// --------------------------------------------------------------------------
// volume
// --------------------------------------------------------------------------

int cmd_volume(const std::string& k_list, const std::string& t_list, bool with_mc,
               std::uint64_t samples, std::uint64_t seed, unsigned jobs,
               const std::string& out_path) {
    const std::vector<int> ks = parse_int_list(k_list, "-k");
    const std::vector<int> ts = parse_int_list(t_list, "-t");

    std::ostringstream out;
    out << "# l0cert volume csv format_version 1\n";
    out << "# config: k=" << k_list << " t=" << t_list << " domain=[-1,1]^k mc="
        << (with_mc ? "yes" : "no") << " samples=" << samples << " seed=" << seed << '\n';
    out << "k,t,vol_hull,vol_l1,excess_l1,excess_box";
    if (with_mc) out << ",mc_hull,mc_hull_se,mc_l1,mc_l1_se";
    out << '\n';

    std::size_t row = 0;
    for (int k : ks) {
        for (int t : ts) {
            if (k < 1 || t < 1 || t > k) continue;
            const BoxDomain domain = BoxDomain::uniform(static_cast<std::size_t>(k), -1.0, 1.0);
            const ExcessVolumes ex = relative_excess_volumes(domain, t);
            out << k << ',' << t << ',' << format_double(volume_hull(domain, t)) << ','
                << format_double(volume_scaled_l1(domain, t)) << ','
                << format_double(ex.excess_l1) << ',' << format_double(ex.excess_box);
            if (with_mc) {
                const std::vector<double> center(domain.size(), 0.0);
                const Ball0Spec spec(center, t, domain);
                const McEstimate hull = mc_volume(
                    [&](std::span<const double> y) { return in_hull(spec, domain, y); }, domain,
                    samples, derive_seed(seed, 2 * row), jobs);
                const BoxDomain expanded = BoxDomain::uniform(
                    static_cast<std::size_t>(k), -static_cast<double>(t),
                    static_cast<double>(t));
                const McEstimate l1 = mc_volume(
                    [&](std::span<const double> y) {
                        return scaled_distance_sum(spec, domain, y) <=
                               static_cast<double>(t) + kHullEps;
                    },
                    expanded, samples, derive_seed(seed, 2 * row + 1), jobs);
                out << ',' << format_double(hull.mean) << ',' << format_double(hull.std_error)
                    << ',' << format_double(l1.mean) << ',' << format_double(l1.std_error);
            }
            out << '\n';
            ++row;
        }
    }
    write_output(out_path, out.str());
    return 0;
}

// --------------------------------------------------------------------------
// compare
// --------------------------------------------------------------------------

int cmd_compare(const std::string& model_path, const std::string& input_path, int label_override,
                const std::string& k_list, const std::string& t_list, std::size_t trials,
                std::uint64_t seed, unsigned jobs, const std::string& out_path) {
    LoadedProblem p = load_problem(model_path, input_path, label_override);
    const std::vector<int> ks = parse_int_list(k_list, "-k");
    const std::vector<int> ts = parse_int_list(t_list, "-t");

    std::ostringstream out;
    out << "# l0cert compare csv format_version 1\n";
    out << "# config: model=" << model_path << " input=" << input_path << " k=" << k_list
        << " t=" << t_list << " trials=" << trials << " seed=" << seed << '\n';
    out << "k,t,strategy,verified,trials,rate\n";

    std::size_t row = 0;
    for (int k : ks) {
        for (int t : ts) {
            if (t < 1 || k < t || static_cast<std::size_t>(k) > p.doc.domain.entries) continue;
            const SuccessRates rates =
                success_rate_experiment(p.net, p.doc.input, p.doc.domain,
                                        static_cast<std::size_t>(k), t, trials,
                                        derive_seed(seed, row), jobs);
            for (Strategy s : {Strategy::box, Strategy::top_t, Strategy::t_times_top}) {
                const std::size_t v = s == Strategy::box ? rates.verified_box
                                      : s == Strategy::top_t ? rates.verified_topt
                                                             : rates.verified_ttimestop;
                out << k << ',' << t << ',' << strategy_name(s) << ',' << v << ',' << trials
                    << ',' << format_double(rates.rate(s)) << '\n';
            }
            ++row;
        }
    }
    write_output(out_path, out.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certify local robustness of ReLU networks against few-pixel perturbations"};
    app.require_subcommand(1);

    std::string model_path, input_path, out_path, pixels, strategy, k_list = "1:8",
                                                                    t_list = "1:3";
    std::vector<std::string> strategy_filter;
    int t = 1, label_override = -1;
    std::uint64_t seed = kDefaultSeed;
    std::uint64_t trials = 200;
    std::size_t cap_corners = 10000;
    unsigned jobs = l0cert::default_jobs();
    bool complete = false, with_mc = false;

    auto* bounds = app.add_subcommand("bounds", "per-neuron interval bounds per strategy");
    bounds->add_option("--model", model_path)->required();
    bounds->add_option("--input", input_path)->required();
    bounds->add_option("-t", t, "perturbation radius")->required();
    bounds->add_option("--strategy", strategy_filter, "limit to these strategies");
    bounds->add_option("--out", out_path);

    auto* verify = app.add_subcommand("verify", "decide one robustness query");
    verify->add_option("--model", model_path)->required();
    verify->add_option("--input", input_path)->required();
    verify->add_option("--label", label_override, "override the input document's label");
    verify->add_option("-t", t, "perturbation radius")->required();
    verify->add_option("-k", pixels, "restrict to these pixel indices (list/range)");
    verify->add_option("--strategy", strategy, "box|topt|ttimestop (default topt)");
    verify->add_flag("--complete", complete, "covering verification loop");
    verify->add_option("--seed", seed)->envname("L0CERT_SEED");
    verify->add_option("--cap-corners", cap_corners, "corner budget for falsification");
    verify->add_option("--out", out_path);

    auto* volume = app.add_subcommand("volume", "closed-form volumes as CSV");
    volume->add_option("-k", k_list, "entry counts (list/range)");
    volume->add_option("-t", t_list, "radii (list/range)");
    volume->add_flag("--mc", with_mc, "append Monte Carlo estimates");
    volume->add_option("--trials", trials, "Monte Carlo samples per row")
        ->default_val(std::uint64_t{1000000});
    volume->add_option("--seed", seed)->envname("L0CERT_SEED");
    volume->add_option("--jobs", jobs);
    volume->add_option("--out", out_path);

    auto* compare = app.add_subcommand("compare", "success-rate experiment as CSV");
    compare->add_option("--model", model_path)->required();
    compare->add_option("--input", input_path)->required();
    compare->add_option("--label", label_override);
    compare->add_option("-k", k_list, "subset sizes (list/range)")->required();
    compare->add_option("-t", t_list, "radii (list/range)")->required();
    compare->add_option("--trials", trials)->required();
    compare->add_option("--seed", seed)->envname("L0CERT_SEED");
    compare->add_option("--jobs", jobs);
    compare->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return kExitSchema;
    }

    try {
        if (bounds->parsed())
            return cmd_bounds(model_path, input_path, t, strategy_filter, out_path);
        if (verify->parsed())
            return cmd_verify(model_path, input_path, label_override, t, pixels, strategy,
                              complete, seed, cap_corners, out_path);
        if (volume->parsed())
            return cmd_volume(k_list, t_list, with_mc, trials, seed, jobs, out_path);
        if (compare->parsed())
            return cmd_compare(model_path, input_path, label_override, k_list, t_list,
                               static_cast<std::size_t>(trials), seed, jobs, out_path);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const MisclassifiedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitShape;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitSchema;
    }
    return kExitSchema;
}
