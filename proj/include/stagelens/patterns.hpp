#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stagelens/model.hpp"
#include "stagelens/segmentation.hpp"

namespace stagelens {

struct StageSequence {
  std::string user_id;
  Group group = Group::Middle;
  std::vector<int> stages;  // one stage id per segment, temporal order
};

/// Groups segments by sequence (in dataset order) and reads their stage ids
/// in start order. Every segment must carry a stage id.
std::vector<StageSequence> to_stage_sequences(const std::vector<Segment>& segments, const Dataset& dataset);

/// Pattern key: dash-joined stage ids, e.g. "2-1-1".
std::string pattern_key(const std::vector<int>& symbols);
std::vector<int> parse_pattern_key(std::string_view key);

/// Offset of the first contiguous occurrence, or -1.
int first_occurrence(const std::vector<int>& sequence, const std::vector<int>& pattern);
std::size_t count_occurrences(const std::vector<int>& sequence, const std::vector<int>& pattern);

/// Fraction of the group's sequences containing the pattern; 0 for an empty group.
double support(const std::vector<StageSequence>& sequences, const std::vector<int>& pattern, Group group);

inline constexpr double kRatioEpsilon = 1e-6;

struct ImpactResult {
  double s_r_former = 0.0, s_d_former = 0.0;
  double s_r_latter = 0.0, s_d_latter = 0.0;
  double r_f = 0.0, r_l = 0.0, d_i = 0.0;
  std::size_t n_containing = 0;
  std::size_t n_former = 0, n_latter = 0;  // sides kept by the length filter
  bool degenerate = false;                 // a zero negativity sum was replaced by epsilon
};

struct StagePattern {
  std::vector<int> symbols;
  double f_r = 0.0, f_d = 0.0, f_m = 0.0;
  double w = 0.0;  // f_r - f_d
  std::optional<ImpactResult> impact;
  // (sequence index, offset of the first match) for every containing sequence.
  std::vector<std::pair<std::size_t, int>> occurrences;

  double max_support() const { return std::max(f_r, f_d); }
};

/// Exhaustive enumeration of contiguous patterns of length 1..max_len. Keeps
/// patterns whose recovery or deterioration support reaches min_support.
/// Ordered by length, then lexicographically.
std::vector<StagePattern> mine_patterns(const std::vector<StageSequence>& sequences, double min_support,
                                        int max_len);

class PatternAbsent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits every recovery/deterioration sequence containing `pattern` at its
/// first occurrence and weighs the frequent patterns found before and after.
ImpactResult pattern_impact(const std::vector<int>& pattern, const std::vector<StageSequence>& sequences,
                            const std::vector<StagePattern>& frequent);

/// Single-stage w for every stage id in [1, n_stages].
std::map<int, double> single_stage_positivity(const std::vector<StageSequence>& sequences, int n_stages);

enum class PatternSortKey { Positivity, Impact, Support };

PatternSortKey parse_sort_key(std::string_view s);

/// Stable sort, descending by key; keeps patterns containing every stage in `required`.
std::vector<StagePattern> rank_patterns(std::vector<StagePattern> patterns, PatternSortKey key,
                                        const std::set<int>& required, bool descending = true);

}  // namespace stagelens
