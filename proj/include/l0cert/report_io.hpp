// Structured verdict documents (JSON), versioned alongside the model format.
#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "l0cert/cover.hpp"
#include "l0cert/verifier.hpp"

namespace l0cert {

inline nlohmann::json report_to_json(const VerdictReport& rep,
                                     const nlohmann::json& resolved_config,
                                     const CoverStats* cover_stats = nullptr) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = resolved_config;
    j["status"] = verdict_name(rep.status);
    nlohmann::json margins = nlohmann::json::object();
    for (const MarginBound& m : rep.margins)
        margins[std::to_string(m.adversary)] = m.lower;
    j["margins"] = margins;
    if (rep.counterexample) {
        j["counterexample"] = *rep.counterexample;
        j["counterexample_label"] = rep.counterexample_label;
    }
    nlohmann::json stages = nlohmann::json::array();
    for (const StageSummary& s : rep.stage_summary) {
        stages.push_back({{"name", s.name},
                          {"width", s.width},
                          {"min_lower", s.min_lo},
                          {"max_upper", s.max_hi},
                          {"unstable", s.unstable}});
    }
    j["stage_summary"] = stages;
    j["propagation_calls"] = rep.propagation_calls;
    j["elapsed_ms"] = rep.elapsed_ms;
    j["seed"] = rep.seed;
    if (cover_stats != nullptr) {
        j["cover_stats"] = {{"propagation_calls", cover_stats->propagation_calls},
                            {"refinements", cover_stats->refinements},
                            {"leaf_enumerations", cover_stats->leaf_enumerations}};
    }
    return j;
}

} // namespace l0cert
