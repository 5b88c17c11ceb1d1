#include "stagelens/progression.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace stagelens {

std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }

std::string_view to_string(ColumnRegion r) {
  switch (r) {
    case ColumnRegion::Before: return "before";
    case ColumnRegion::Pattern: return "pattern";
    case ColumnRegion::After: return "after";
  }
  return "?";
}

SankeyModel build_group_sankey(const std::vector<StageSequence>& sequences, std::optional<Group> group) {
  std::map<std::pair<int, int>, std::size_t> nodes, sources, sinks;
  std::map<std::tuple<int, int, int>, std::size_t> flows;
  for (const auto& s : sequences) {
    if (group && s.group != *group) continue;
    if (s.stages.empty()) continue;
    for (std::size_t t = 0; t < s.stages.size(); ++t) {
      ++nodes[{static_cast<int>(t), s.stages[t]}];
      if (t + 1 < s.stages.size()) ++flows[{static_cast<int>(t), s.stages[t], s.stages[t + 1]}];
    }
    ++sources[{0, s.stages.front()}];
    ++sinks[{static_cast<int>(s.stages.size()) - 1, s.stages.back()}];
  }
  SankeyModel m;
  m.group = group;
  for (const auto& [k, c] : nodes) m.nodes.push_back({k.first, k.second, c});
  for (const auto& [k, c] : sources) m.sources.push_back({k.first, k.second, c});
  for (const auto& [k, c] : sinks) m.sinks.push_back({k.first, k.second, c});
  for (const auto& [k, c] : flows) m.flows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), c, false});

  std::vector<std::size_t> order(m.flows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& fa = m.flows[a];
    const auto& fb = m.flows[b];
    if (fa.count != fb.count) return fa.count > fb.count;
    return std::tie(fa.from_stage, fa.to_stage, fa.time_index) < std::tie(fb.from_stage, fb.to_stage, fb.time_index);
  });
  for (std::size_t i = 0; i < std::min(order.size(), kHighlightedFlows); ++i) m.flows[order[i]].highlighted = true;
  return m;
}

PatternCentricModel build_pattern_centric(const std::vector<StageSequence>& sequences, const StagePattern& anchor,
                                          const std::map<int, double>& stage_w, std::optional<Group> group) {
  const int len = static_cast<int>(anchor.symbols.size());
  struct Aligned {
    const std::vector<int>* stages;
    int offset;
  };
  std::vector<Aligned> aligned;
  for (const auto& s : sequences) {
    if (group && s.group != *group) continue;
    const int at = first_occurrence(s.stages, anchor.symbols);
    if (at >= 0) aligned.push_back({&s.stages, at});
  }
  if (aligned.empty()) throw PatternAbsent("pattern absent: " + pattern_key(anchor.symbols));

  PatternCentricModel m;
  m.anchor = anchor.symbols;
  m.anchor_w = anchor.w;
  m.impact = anchor.impact;
  m.containing = aligned.size();
  m.stage_w = stage_w;

  const double min_count = kColumnMinShare * static_cast<double>(aligned.size());
  auto reach = [&](int position) {
    std::size_t n = 0;
    for (const auto& a : aligned) {
      const int idx = a.offset + position;
      if (idx >= 0 && idx < static_cast<int>(a.stages->size())) ++n;
    }
    return n;
  };
  int first = 0;
  while (static_cast<double>(reach(first - 1)) >= min_count && reach(first - 1) > 0) --first;
  int last = len - 1;
  while (static_cast<double>(reach(last + 1)) >= min_count && reach(last + 1) > 0) ++last;

  auto w_of = [&](int stage) {
    const auto it = stage_w.find(stage);
    return it == stage_w.end() ? 0.0 : it->second;
  };
  auto polarity_of = [&](int stage) { return w_of(stage) >= 0.0 ? Polarity::Positive : Polarity::Negative; };

  auto stage_at = [&](const Aligned& a, int position) -> std::optional<int> {
    const int idx = a.offset + position;
    if (idx < 0 || idx >= static_cast<int>(a.stages->size())) return std::nullopt;
    return (*a.stages)[static_cast<std::size_t>(idx)];
  };

  std::map<std::tuple<int, int, int>, std::size_t> flows;
  std::map<std::tuple<int, int, int>, std::size_t> polarity_flows;
  std::map<std::pair<int, int>, std::size_t> sources, sinks;
  for (int pos = first; pos <= last; ++pos) {
    Column col;
    col.position = pos;
    if (pos < 0) {
      col.region = ColumnRegion::Before;
      col.offset = pos;
    } else if (pos < len) {
      col.region = ColumnRegion::Pattern;
      col.offset = pos;
    } else {
      col.region = ColumnRegion::After;
      col.offset = pos - len + 1;
    }
    std::map<int, std::size_t> counts;
    for (const auto& a : aligned) {
      const auto here = stage_at(a, pos);
      if (!here) continue;
      ++counts[*here];
      ++col.total;
      const auto prev = pos > first ? stage_at(a, pos - 1) : std::nullopt;
      const auto next = pos < last ? stage_at(a, pos + 1) : std::nullopt;
      if (!prev) ++sources[{pos, *here}];
      if (!next) ++sinks[{pos, *here}];
      if (next) {
        ++flows[{pos, *here, *next}];
        ++polarity_flows[{pos, static_cast<int>(polarity_of(*here)), static_cast<int>(polarity_of(*next))}];
      }
    }
    for (const auto& [stage, c] : counts) {
      const double w = w_of(stage);
      col.nodes.push_back({stage, c, polarity_of(stage), w, w == 0.0});
    }
    std::stable_sort(col.nodes.begin(), col.nodes.end(), [](const ColumnNode& a, const ColumnNode& b) {
      if (a.polarity != b.polarity) return a.polarity == Polarity::Positive;
      return a.w > b.w;
    });
    m.columns.push_back(std::move(col));
  }
  for (const auto& [k, c] : flows) m.flows.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), c});
  for (const auto& [k, c] : polarity_flows)
    m.polarity_flows.push_back(
        {std::get<0>(k), static_cast<Polarity>(std::get<1>(k)), static_cast<Polarity>(std::get<2>(k)), c});
  for (const auto& [k, c] : sources) m.sources.push_back({k.first, k.second, c});
  for (const auto& [k, c] : sinks) m.sinks.push_back({k.first, k.second, c});
  return m;
}

}  // namespace stagelens
