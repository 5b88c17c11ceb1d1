#pragma once

#include <map>
#include <optional>
#include <vector>

#include "stagelens/patterns.hpp"

namespace stagelens {

inline constexpr std::size_t kHighlightedFlows = 10;

struct SankeyNode {
  int time_index = 0;
  int stage_id = 0;
  std::size_t count = 0;
};

struct SankeyFlow {
  int time_index = 0;  // flow goes from time_index to time_index + 1
  int from_stage = 0;
  int to_stage = 0;
  std::size_t count = 0;
  bool highlighted = false;
};

// Sequences that start or end at a node (pseudo-flows from a source / to a sink).
struct SankeyTerminal {
  int time_index = 0;
  int stage_id = 0;
  std::size_t count = 0;
};

struct SankeyModel {
  std::optional<Group> group;  // unset: every cohort
  std::vector<SankeyNode> nodes;
  std::vector<SankeyFlow> flows;
  std::vector<SankeyTerminal> sources;
  std::vector<SankeyTerminal> sinks;
};

/// Time axis is the segment ordinal. The 10 largest flows are highlighted;
/// ties at the cutoff go to the lexicographically smaller (from, to, time).
SankeyModel build_group_sankey(const std::vector<StageSequence>& sequences, std::optional<Group> group);

enum class Polarity { Positive, Negative };
enum class ColumnRegion { Before, Pattern, After };

std::string_view to_string(Polarity p);
std::string_view to_string(ColumnRegion r);

inline constexpr double kColumnMinShare = 0.05;

struct ColumnNode {
  int stage_id = 0;
  std::size_t count = 0;
  Polarity polarity = Polarity::Positive;
  double w = 0.0;       // single-stage positivity
  bool zero_w = false;  // polarity assigned by convention
};

struct Column {
  int position = 0;  // relative to the anchor start: before < 0 <= pattern < len <= after
  ColumnRegion region = ColumnRegion::Pattern;
  int offset = 0;    // -k before, index within the pattern, +k after
  std::size_t total = 0;
  std::vector<ColumnNode> nodes;  // Positive band first, each band by descending w
};

struct ColumnFlow {
  int from_position = 0;
  int from_stage = 0;
  int to_stage = 0;
  std::size_t count = 0;
};

struct PolarityFlow {
  int from_position = 0;
  Polarity from = Polarity::Positive;
  Polarity to = Polarity::Positive;
  std::size_t count = 0;
};

struct ColumnTerminal {
  int position = 0;
  int stage_id = 0;
  std::size_t count = 0;
};

struct PatternCentricModel {
  std::vector<int> anchor;
  double anchor_w = 0.0;
  std::optional<ImpactResult> impact;
  std::size_t containing = 0;
  std::vector<Column> columns;  // ascending position
  std::vector<ColumnFlow> flows;
  std::vector<PolarityFlow> polarity_flows;
  std::vector<ColumnTerminal> sources;
  std::vector<ColumnTerminal> sinks;
  std::map<int, double> stage_w;  // tooltip payload
};

/// Aligns every sequence containing the anchor at its first occurrence.
/// Context columns are dropped from the first offset where fewer than 5% of
/// the containing sequences reach. Throws PatternAbsent.
PatternCentricModel build_pattern_centric(const std::vector<StageSequence>& sequences, const StagePattern& anchor,
                                          const std::map<int, double>& stage_w,
                                          std::optional<Group> group = std::nullopt);

}  // namespace stagelens
