#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <json.hpp>

#include "stagelens/pipeline.hpp"

namespace stagelens {

using Json = nlohmann::json;  // std::map-backed, so keys serialize sorted

inline constexpr std::string_view kBundleFormat = "stagelens-bundle/1";

Json to_json(const PipelineParams& p);
// Overrides on top of `base`. Unknown keys and wrong types throw std::invalid_argument.
PipelineParams params_from_json(const Json& j, PipelineParams base = {});

Json to_json(const ImpactResult& r);
ImpactResult impact_from_json(const Json& j);
Json to_json(const StagePattern& p);
StagePattern pattern_from_json(const Json& j);
Json to_json(const StageSequence& s);
StageSequence stage_sequence_from_json(const Json& j);
Json to_json(const SankeyModel& m);
Json to_json(const PatternCentricModel& m);

// Everything a run produces, with no run ids or clocks in it.
Json bundle_json(const RunArtifacts& art);
std::string dump_bundle(const Json& bundle);

// Route payloads, computed from a bundle so they work on reloaded sessions.
// Lookup failures throw std::out_of_range (unknown group/kind) or PatternAbsent.
Json clusters_payload(const Json& bundle, BehaviorKind kind);
Json stages_payload(const Json& bundle);
Json progression_payload(const Json& bundle, std::optional<Group> group);
Json patterns_payload(const Json& bundle, PatternSortKey key, const std::set<int>& contains);
Json context_payload(const Json& bundle, std::string_view pattern_key, std::optional<Group> group = std::nullopt);

}  // namespace stagelens
